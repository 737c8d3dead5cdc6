#pragma once

// Run configuration and the pipeline commands behind the command-line tool.
// Layout per conversation:
//   <workspace>/<conversation_id>/{conversation.jsonl, plan.json, probes/, memory/,
//                                  answers.jsonl, scores.jsonl, report.md}

#include "memlab/embedding.hpp"
#include "memlab/evaluator.hpp"
#include "memlab/gateway.hpp"
#include "memlab/io.hpp"
#include "memlab/mock_provider.hpp"
#include "memlab/orchestrator.hpp"
#include "memlab/probes.hpp"
#include "memlab/synthesizer.hpp"

#include <cstdlib>
#include <map>

namespace memlab {

struct ProviderSpec {
    std::string kind = "mock";      // "mock" or "openai"
    std::filesystem::path script;   // mock script, resolved against the config directory
    ProviderConfig http;
};

struct EmbedderSpec {
    std::string kind = "hash";  // "hash" or "openai"
    std::size_t dimension = 256;
    ProviderConfig http;
};

struct RunConfig {
    std::string conversation_id;
    std::filesystem::path workspace = "workspace";
    std::size_t parallelism = 4;
    std::map<std::string, ProviderSpec> providers;  // by role, with "default" as fallback
    EmbedderSpec embedder;
    std::string length = "mini";  // "mini" or a target length name
    SynthesisConfig synthesis = SynthesisConfig::mini();
    std::optional<Seed> seed;
    Temperatures temperatures;
    std::size_t k = 15;
    std::size_t z = 5;
    AblationConfig ablation;
    std::size_t probe_cap = 2;
    std::size_t probe_window = 2;
    RetryPolicy retry;

    std::string resolved_conversation_id() const {
        return conversation_id.empty() ? "conv-" + std::to_string(synthesis.seed_rng) : conversation_id;
    }
};

inline constexpr std::string_view kProviderRoles[] = {"synthesis", "probe", "memory", "answer", "judge"};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<std::string_view> known, std::string_view where) {
    if (!j.is_object()) throw Error(ErrorCode::Config, std::string(where) + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw Error(ErrorCode::Config, "unknown key '" + it.key() + "' in " + std::string(where));
        }
    }
}

inline void read_http(const json& j, ProviderConfig& http) {
    http.base_url = j.value("base_url", http.base_url);
    http.api_key_env = j.value("api_key_env", http.api_key_env);
    http.model = j.value("model", http.model);
    http.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long long>(http.timeout.count())));
    http.max_retries = j.value("max_retries", http.max_retries);
    http.backoff_base = std::chrono::milliseconds(j.value("backoff_ms", static_cast<long long>(http.backoff_base.count())));
}

inline ProviderSpec parse_provider(const json& j, const std::filesystem::path& base, std::string_view role) {
    check_keys(j, {"kind", "script", "base_url", "api_key_env", "model", "timeout_ms", "max_retries", "backoff_ms"},
               "provider " + std::string(role));
    ProviderSpec s;
    s.kind = j.value("kind", "mock");
    if (s.kind == "mock") {
        if (!j.contains("script")) throw Error(ErrorCode::Config, "mock provider " + std::string(role) + " needs a script");
        s.script = base / j.at("script").get<std::string>();
    } else if (s.kind == "openai") {
        read_http(j, s.http);
    } else {
        throw Error(ErrorCode::Config, "unknown provider kind '" + s.kind + "'");
    }
    return s;
}

}  // namespace detail

// Relative paths inside the document resolve against `base` (the config
// file's directory).
inline RunConfig parse_run_config(const json& j, const std::filesystem::path& base = {}) {
    try {
        detail::check_keys(j, {"conversation_id", "workspace", "parallelism", "providers", "embedder", "synthesis",
                               "seed", "temperatures", "orchestrator", "probe", "retry"},
                           "config");
        RunConfig c;
        c.conversation_id = j.value("conversation_id", "");
        if (j.contains("workspace")) c.workspace = base / j.at("workspace").get<std::string>();
        else c.workspace = base / "workspace";
        c.parallelism = j.value("parallelism", c.parallelism);
        if (c.parallelism == 0) throw Error(ErrorCode::Config, "parallelism must be positive");

        const auto providers = j.value("providers", json::object());
        for (auto it = providers.begin(); it != providers.end(); ++it) {
            const auto& role = it.key();
            if (role != "default" &&
                std::find(std::begin(kProviderRoles), std::end(kProviderRoles), role) == std::end(kProviderRoles)) {
                throw Error(ErrorCode::Config, "unknown provider role '" + role + "'");
            }
            c.providers[role] = detail::parse_provider(it.value(), base, role);
        }

        if (j.contains("embedder")) {
            const auto& e = j.at("embedder");
            detail::check_keys(e, {"kind", "dimension", "base_url", "api_key_env", "model", "timeout_ms", "max_retries",
                                   "backoff_ms"},
                               "embedder");
            c.embedder.kind = e.value("kind", "hash");
            c.embedder.dimension = e.value("dimension", c.embedder.dimension);
            if (c.embedder.kind == "openai") {
                c.embedder.http.model = "text-embedding-3-small";
                detail::read_http(e, c.embedder.http);
            } else if (c.embedder.kind != "hash") {
                throw Error(ErrorCode::Config, "unknown embedder kind '" + c.embedder.kind + "'");
            }
            if (c.embedder.dimension == 0) throw Error(ErrorCode::Config, "embedder dimension must be positive");
        }

        if (j.contains("synthesis")) {
            const auto& s = j.at("synthesis");
            detail::check_keys(s, {"length", "category", "plan_mode", "seed_rng", "summary_window", "sub_plans", "bullets",
                                   "batches", "questions_per_batch", "delta1", "delta2", "min_narratives",
                                   "max_narratives", "plan_count_10m"},
                               "synthesis");
            const auto category = parse_category(s.value("category", "general"));
            if (!category) throw Error(ErrorCode::Config, "unknown category " + s.value("category", ""));
            const auto length = to_lower(s.value("length", "mini"));
            c.length = length;
            if (length == "mini") {
                c.synthesis = SynthesisConfig::mini(*category);
            } else {
                const auto l = parse_target_length(length);
                if (!l) throw Error(ErrorCode::Config, "unknown target length " + length);
                c.synthesis = SynthesisConfig::preset(*l, *category);
            }
            if (s.contains("plan_mode")) c.synthesis.plan_mode = parse_plan_mode(s.at("plan_mode").get<std::string>());
            c.synthesis.seed_rng = s.value("seed_rng", c.synthesis.seed_rng);
            c.synthesis.summary_window = s.value("summary_window", c.synthesis.summary_window);
            c.synthesis.sub_plans = s.value("sub_plans", c.synthesis.sub_plans);
            c.synthesis.bullets = s.value("bullets", c.synthesis.bullets);
            c.synthesis.batches = s.value("batches", c.synthesis.batches);
            c.synthesis.questions_per_batch = s.value("questions_per_batch", c.synthesis.questions_per_batch);
            c.synthesis.delta1 = s.value("delta1", c.synthesis.delta1);
            c.synthesis.delta2 = s.value("delta2", c.synthesis.delta2);
            c.synthesis.min_narratives = s.value("min_narratives", c.synthesis.min_narratives);
            c.synthesis.max_narratives = s.value("max_narratives", c.synthesis.max_narratives);
            c.synthesis.plan_count_10m = s.value("plan_count_10m", c.synthesis.plan_count_10m);
            c.synthesis.validate();
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<Seed>();

        if (j.contains("temperatures")) {
            const auto& t = j.at("temperatures");
            detail::check_keys(t, {"answer", "judge", "detect", "extract", "filter", "synthesis"}, "temperatures");
            c.temperatures.answer = t.value("answer", c.temperatures.answer);
            c.temperatures.judge = t.value("judge", c.temperatures.judge);
            c.temperatures.detect = t.value("detect", c.temperatures.detect);
            c.temperatures.extract = t.value("extract", c.temperatures.extract);
            c.temperatures.filter = t.value("filter", c.temperatures.filter);
            c.temperatures.synthesis = t.value("synthesis", c.temperatures.synthesis);
        }
        if (j.contains("orchestrator")) {
            const auto& o = j.at("orchestrator");
            detail::check_keys(o, {"k", "z", "use_retrieval", "use_scratchpad", "use_working", "use_noise_filter"},
                               "orchestrator");
            c.k = o.value("k", c.k);
            c.z = o.value("z", c.z);
            c.ablation.use_retrieval = o.value("use_retrieval", true);
            c.ablation.use_scratchpad = o.value("use_scratchpad", true);
            c.ablation.use_working = o.value("use_working", true);
            c.ablation.use_noise_filter = o.value("use_noise_filter", true);
            if (c.k == 0 || c.z == 0) throw Error(ErrorCode::Config, "k and z must be positive");
        }
        if (j.contains("probe")) {
            const auto& p = j.at("probe");
            detail::check_keys(p, {"cap", "window"}, "probe");
            c.probe_cap = p.value("cap", c.probe_cap);
            c.probe_window = p.value("window", c.probe_window);
            if (c.probe_window == 0) throw Error(ErrorCode::Config, "probe window must be positive");
        }
        if (j.contains("retry")) {
            const auto& r = j.at("retry");
            detail::check_keys(r, {"max_retries", "backoff_ms"}, "retry");
            c.retry.max_retries = r.value("max_retries", c.retry.max_retries);
            c.retry.backoff_base = std::chrono::milliseconds(r.value("backoff_ms", 500));
            if (c.retry.max_retries < 0) throw Error(ErrorCode::Config, "max_retries must be >= 0");
        }
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        throw Error(ErrorCode::Config, std::string("config: ") + e.what());
    }
}

// Re-derives the batching preset for a new length or category; seed, plan
// mode override and summary window are kept.
inline void apply_preset(RunConfig& c, std::string_view length, Category category) {
    const auto keep = c.synthesis;
    if (length == "mini") {
        c.synthesis = SynthesisConfig::mini(category);
    } else {
        const auto l = parse_target_length(length);
        if (!l) throw Error(ErrorCode::Config, "unknown target length " + std::string(length));
        c.synthesis = SynthesisConfig::preset(*l, category);
    }
    c.length = std::string(length);
    c.synthesis.seed_rng = keep.seed_rng;
    c.synthesis.summary_window = keep.summary_window;
    c.synthesis.validate();
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const Error& e) {
        throw Error(ErrorCode::Config, e.what());
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Config, path.string() + ": " + e.what());
    }
    return parse_run_config(j, path.parent_path());
}

// Every secret the configuration refers to must be present before any work
// starts.
inline void check_environment(const RunConfig& c) {
    auto need = [](const std::string& var) {
        const char* v = std::getenv(var.c_str());
        if (v == nullptr || *v == '\0') throw Error(ErrorCode::Config, "environment variable " + var + " is not set");
    };
    for (const auto& [_, p] : c.providers) {
        if (p.kind == "openai") need(p.http.api_key_env);
    }
    if (c.embedder.kind == "openai") need(c.embedder.http.api_key_env);
}

using ProviderFactory = std::function<std::shared_ptr<Provider>(const ProviderSpec&)>;
using EmbedderFactory = std::function<std::shared_ptr<EmbeddingProvider>(const EmbedderSpec&)>;

// Offline factories: mock scripts and the hashing embedder.
inline std::shared_ptr<Provider> make_offline_provider(const ProviderSpec& s) {
    if (s.kind == "mock") {
        try {
            return ScriptedProvider::from_file(s.script);
        } catch (const Error& e) {
            throw Error(ErrorCode::Config, "mock script " + s.script.string() + ": " + e.what());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Config, "mock script " + s.script.string() + ": " + e.what());
        }
    }
    throw Error(ErrorCode::Config, "provider kind '" + s.kind + "' is not available in this build");
}

inline std::shared_ptr<EmbeddingProvider> make_offline_embedder(const EmbedderSpec& s) {
    if (s.kind == "hash") return std::make_shared<HashEmbedder>(s.dimension);
    throw Error(ErrorCode::Config, "embedder kind '" + s.kind + "' is not available in this build");
}

inline std::string method_name(const AblationConfig& a) {
    std::string out = "light";
    if (!a.use_retrieval) out += "-no_retrieval";
    if (!a.use_scratchpad) out += "-no_scratchpad";
    if (!a.use_working) out += "-no_working";
    if (!a.use_noise_filter) out += "-no_filter";
    return out;
}

struct PlanFile {
    Seed main_seed;
    std::vector<Seed> seeds;  // indexed by Plan::seed_ref
    std::vector<Plan> plans;
};

inline json plan_file_to_json(const PlanFile& f) {
    return json{{"main_seed", f.main_seed}, {"seeds", f.seeds}, {"plans", f.plans}};
}

inline PlanFile plan_file_from_json(const json& j) {
    try {
        PlanFile f;
        f.main_seed = j.at("main_seed").get<Seed>();
        f.seeds = j.at("seeds").get<std::vector<Seed>>();
        f.plans = j.at("plans").get<std::vector<Plan>>();
        return f;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("plan file: ") + e.what());
    }
}

struct SynthesisOutcome {
    std::filesystem::path dir;
    bool complete = false;
    std::size_t questions = 0;
    std::size_t turns = 0;
};

class Workspace {
public:
    explicit Workspace(RunConfig cfg, ProviderFactory providers = make_offline_provider,
                       EmbedderFactory embedders = make_offline_embedder)
        : cfg_(std::move(cfg)), make_provider_(std::move(providers)), make_embedder_(std::move(embedders)) {}

    const RunConfig& config() const { return cfg_; }
    RunConfig& config() { return cfg_; }

    std::shared_ptr<Gateway> gateway(const std::string& role) {
        if (auto it = gateways_.find(role); it != gateways_.end()) return it->second;
        auto spec = cfg_.providers.find(role);
        if (spec == cfg_.providers.end()) spec = cfg_.providers.find("default");
        if (spec == cfg_.providers.end()) throw Error(ErrorCode::Config, "no provider configured for role " + role);
        RetryPolicy policy = cfg_.retry;
        if (spec->second.kind == "openai") policy = {spec->second.http.max_retries, spec->second.http.backoff_base};
        auto gw = std::make_shared<Gateway>(make_provider_(spec->second), policy, cfg_.parallelism);
        gateways_[role] = gw;
        return gw;
    }

    std::shared_ptr<EmbeddingProvider> embedder() {
        if (!embedder_) embedder_ = make_embedder_(cfg_.embedder);
        return embedder_;
    }

    std::string model_for(const std::string& role) const {
        auto spec = cfg_.providers.find(role);
        if (spec == cfg_.providers.end()) spec = cfg_.providers.find("default");
        if (spec == cfg_.providers.end() || spec->second.kind != "openai") return "mock";
        return spec->second.http.model;
    }

    SynthesisSettings synthesis_settings() const {
        const auto model = model_for("synthesis");
        SynthesisSettings s;
        s.plan = {model, cfg_.temperatures.synthesis, std::nullopt};
        s.questions = {model, cfg_.temperatures.synthesis, 6000};
        s.dialogue = {model, cfg_.temperatures.synthesis, std::nullopt};
        s.detect = {model, cfg_.temperatures.detect, std::nullopt};
        return s;
    }

    OrchestratorSettings orchestrator_settings(std::size_t z) const {
        const auto memory = model_for("memory");
        OrchestratorSettings s;
        s.extract = {memory, cfg_.temperatures.extract, std::nullopt};
        s.notes = {memory, cfg_.temperatures.extract, std::nullopt};
        s.summary = {memory, cfg_.temperatures.extract, std::nullopt};
        s.filter = {memory, cfg_.temperatures.filter, std::nullopt};
        s.answer = {model_for("answer"), cfg_.temperatures.answer, std::nullopt};
        s.z = z;
        return s;
    }

    // Resumable: every finished stage is a file, and the dialogue checkpoints
    // after each scripted question. stop_after bounds the questions handled in
    // this call.
    SynthesisOutcome synthesize(const std::filesystem::path& out_root, std::optional<int> stop_after = std::nullopt) {
        if (!cfg_.seed) throw Error(ErrorCode::Config, "config has no conversation seed");
        if (auto problems = validate_seed(*cfg_.seed); !problems.empty()) {
            throw Error(ErrorCode::Config, "seed: " + problems.front());
        }
        const auto dir = out_root / cfg_.resolved_conversation_id();
        std::filesystem::create_directories(dir);
        auto gw = gateway("synthesis");
        Synthesizer synth(gw, cfg_.synthesis, synthesis_settings());
        Rng rng(cfg_.synthesis.seed_rng);

        UserProfile profile;
        RelationshipGraph relations;
        if (std::filesystem::exists(dir / "profile.json")) {
            const auto j = read_json(dir / "profile.json");
            profile = j.at("profile").get<UserProfile>();
            relations = j.at("relationships").get<RelationshipGraph>();
        } else {
            profile = synth.sample_profile(rng);
            relations = synth.sample_relationships(rng, profile);
            write_json(dir / "profile.json", json{{"profile", profile}, {"relationships", relations}});
        }

        PlanFile plan_file;
        if (std::filesystem::exists(dir / "plan.json")) {
            plan_file = plan_file_from_json(read_json(dir / "plan.json"));
        } else {
            plan_file.main_seed = *cfg_.seed;
            if (cfg_.synthesis.plan_mode == PlanMode::Single) {
                plan_file.seeds = {*cfg_.seed};
                const auto narratives = synth.generate_narratives(*cfg_.seed);
                plan_file.plans = {synth.generate_plan(*cfg_.seed, profile, relations, narratives)};
            } else {
                plan_file.seeds = synth.derive_seeds(*cfg_.seed, profile);
                plan_file.plans = synth.generate_plans_10m(*cfg_.seed, plan_file.seeds, profile, relations);
            }
            for (auto& p : plan_file.plans) p = synth.augment_plan(p);
            write_json(dir / "plan.json", plan_file_to_json(plan_file));
        }

        std::vector<ScriptedQuestion> questions;
        if (std::filesystem::exists(dir / "questions.json")) {
            questions = read_json(dir / "questions.json").get<std::vector<ScriptedQuestion>>();
        } else {
            for (std::size_t i = 0; i < plan_file.plans.size(); ++i) {
                const auto& plan = plan_file.plans[i];
                auto qs = synth.generate_user_questions(plan_file.seeds.at(static_cast<std::size_t>(plan.seed_ref)), plan,
                                                        static_cast<int>(i));
                questions.insert(questions.end(), qs.begin(), qs.end());
            }
            write_json(dir / "questions.json", questions);
        }

        DialogueState state;
        if (std::filesystem::exists(dir / "checkpoint.json")) state = checkpoint_from_json(read_json(dir / "checkpoint.json"));
        synth.generate_dialogue(questions, plan_file.plans, plan_file.seeds, state,
                                [&](const DialogueState& s) { write_json(dir / "checkpoint.json", checkpoint_to_json(s)); },
                                stop_after);

        SynthesisOutcome outcome{dir, false, questions.size(), state.conversation.turns.size()};
        if (state.next_question < static_cast<int>(questions.size())) return outcome;

        state.conversation.id = cfg_.resolved_conversation_id();
        if (auto v = validate_conversation(state.conversation); !v.empty()) {
            throw Error(ErrorCode::Malformed, "synthesized conversation is invalid at turn " +
                                                  std::to_string(v.front().turn_index) + ": " + v.front().message);
        }
        align_bullets(plan_file.plans, questions, state.threads);
        write_json(dir / "plan.json", plan_file_to_json(plan_file));
        write_file(dir / "conversation.jsonl", conversation_to_jsonl(state.conversation));
        outcome.complete = true;
        return outcome;
    }

    // One JSON array file per ability under out_dir; returns every probe.
    std::vector<ProbeQuestion> probe(const std::filesystem::path& conversation, const std::filesystem::path& plan,
                                     const std::vector<MemoryAbility>& abilities, std::size_t cap,
                                     const std::filesystem::path& out_dir) {
        const auto conv = load_conversation(conversation);
        const auto plan_file = plan_file_from_json(read_json(plan));
        ProbeSettings settings;
        settings.generate = {model_for("probe"), 0.0, std::nullopt};
        settings.window = cfg_.probe_window;
        ProbeGenerator gen(gateway("probe"), settings);
        auto probes = gen.generate_probes(conv, plan_file.plans, abilities, cap);
        std::map<MemoryAbility, json> files;
        for (const auto& p : probes) {
            if (auto problems = validate_probe(p, conv.turns.size()); !problems.empty()) {
                throw Error(ErrorCode::Malformed, "probe " + p.id + ": " + problems.front());
            }
            files[p.ability].push_back(probe_to_json(p));
        }
        std::filesystem::create_directories(out_dir);
        for (const auto& [ability, arr] : files) write_json(out_dir / (std::string(to_string(ability)) + ".json"), arr);
        return probes;
    }

    MemoryOrchestrator build_memory(const Conversation& conv) {
        MemoryOrchestrator orch(gateway("memory"), embedder(), orchestrator_settings(cfg_.z));
        orch.ingest_conversation(conv);
        return orch;
    }

    void ingest(const std::filesystem::path& conversation, const std::filesystem::path& store) {
        const auto conv = load_conversation(conversation);
        if (auto v = validate_conversation(conv); !v.empty()) {
            throw Error(ErrorCode::Malformed, "conversation is invalid at turn " + std::to_string(v.front().turn_index) +
                                                  ": " + v.front().message);
        }
        build_memory(conv).save(store);
    }

    MemoryOrchestrator load_memory(const std::filesystem::path& store, std::size_t z) {
        const auto stored = read_json(store / "state.json").value("z", z);
        if (z > stored) {
            log_warn("store keeps " + std::to_string(stored) + " recent pairs; using that instead of z=" + std::to_string(z));
        }
        auto settings = orchestrator_settings(std::min(z, stored));
        return MemoryOrchestrator::load(store, gateway("memory"), embedder(), settings);
    }

    std::string answer_question(const std::filesystem::path& store, std::string_view question, std::size_t k,
                                std::size_t z, const AblationConfig& ablation) {
        const auto orch = load_memory(store, z);
        return answer_with(orch, question, k, ablation);
    }

    // Answers every non-rejected probe; rows {probe_id, response, method}.
    std::vector<json> answer_probes(const std::filesystem::path& store, const std::filesystem::path& probes_path,
                                    std::size_t k, std::size_t z, const AblationConfig& ablation,
                                    const std::filesystem::path& out) {
        const auto orch = load_memory(store, z);
        std::vector<ProbeQuestion> probes;
        for (auto& p : load_probes(probes_path)) {
            if (p.review_status != ReviewStatus::Rejected) probes.push_back(std::move(p));
        }
        std::vector<json> rows(probes.size());
        const auto method = method_name(ablation);
        parallel_for(probes.size(), cfg_.parallelism, [&](std::size_t i) {
            rows[i] = json{{"probe_id", probes[i].id},
                           {"response", answer_with(orch, probes[i].question, k, ablation)},
                           {"method", method}};
        });
        write_file(out, to_jsonl(rows));
        return rows;
    }

    std::vector<ProbeScore> evaluate(const std::filesystem::path& probes_path, const std::filesystem::path& answers_path,
                                     const std::filesystem::path& out) {
        const auto probes = load_probes(probes_path);
        std::map<std::string, std::string> answers;
        std::string method;
        for (const auto& row : read_jsonl(answers_path)) {
            try {
                answers[row.at("probe_id").get<std::string>()] = row.at("response").get<std::string>();
                if (method.empty()) method = row.value("method", "");
            } catch (const json::exception& e) {
                throw Error(ErrorCode::Malformed, std::string("answer row: ") + e.what());
            }
        }
        EvaluatorSettings settings;
        settings.judge = {model_for("judge"), cfg_.temperatures.judge, std::nullopt};
        settings.equivalence = {model_for("judge"), cfg_.temperatures.judge, std::nullopt};
        Evaluator evaluator(gateway("judge"), settings);
        auto scores = evaluator.evaluate(probes, answers);
        std::vector<json> rows;
        for (auto& s : scores) {
            s.method = method;
            rows.push_back(score_to_json(s));
        }
        write_file(out, to_jsonl(rows));
        return scores;
    }

private:
    static std::string answer_with(const MemoryOrchestrator& orch, std::string_view question, std::size_t k,
                                   const AblationConfig& ablation) {
        return orch.answer(question, k, ablation);
    }

    RunConfig cfg_;
    ProviderFactory make_provider_;
    EmbedderFactory make_embedder_;
    std::map<std::string, std::shared_ptr<Gateway>> gateways_;
    std::shared_ptr<EmbeddingProvider> embedder_;
};

// Aggregates every scores.jsonl below `in_dir` and writes report.md or
// report.csv next to them. Returns the rendered text.
inline std::string write_report(const std::filesystem::path& in_dir, std::string_view format) {
    if (format != "md" && format != "csv") throw Error(ErrorCode::Config, "report format must be md or csv");
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_regular_file(in_dir)) {
        files.push_back(in_dir);
    } else {
        for (const auto& e : std::filesystem::recursive_directory_iterator(in_dir)) {
            if (e.is_regular_file() && e.path().filename() == "scores.jsonl") files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCode::Io, "no scores.jsonl under " + in_dir.string());
    std::vector<ProbeScore> scores;
    for (const auto& f : files) {
        for (const auto& row : read_jsonl(f)) scores.push_back(score_from_json(row));
    }
    const auto report = aggregate(scores);
    const auto text = format == "md" ? render_markdown(report) : render_csv(report);
    const auto dir = std::filesystem::is_directory(in_dir) ? in_dir : in_dir.parent_path();
    write_file(dir / (format == "md" ? "report.md" : "report.csv"), text);
    return text;
}

}  // namespace memlab
