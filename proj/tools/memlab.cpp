// memlab: synthesize conversations, generate probes, run the memory
// orchestrator over them and score the answers.
//
// Exit codes: 0 success, 2 configuration error, 3 unrecoverable runtime error.

#include "memlab/http_provider.hpp"
#include "memlab/workspace.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

using namespace memlab;

std::shared_ptr<Provider> make_provider(const ProviderSpec& s) {
    if (s.kind == "openai") return std::make_shared<OpenAIProvider>(s.http);
    return make_offline_provider(s);
}

std::shared_ptr<EmbeddingProvider> make_embedder(const EmbedderSpec& s) {
    if (s.kind == "openai") return std::make_shared<OpenAIEmbeddingProvider>(s.http, s.dimension);
    return make_offline_embedder(s);
}

struct Options {
    std::string config;
    std::string verbosity = "warn";

    std::string length;
    std::string category;
    std::string out;
    int stop_after = -1;

    std::string conversation;
    std::string plan;
    std::string ability = "all";
    int cap = -1;

    std::string store;
    std::string question;
    std::string probes;
    int k = -1;
    int z = -1;
    bool no_retrieval = false;
    bool no_scratchpad = false;
    bool no_working = false;
    bool no_filter = false;

    std::string answers;
    std::string in;
    std::string format = "md";
};

Workspace open_workspace(const Options& o) {
    if (o.config.empty()) throw Error(ErrorCode::Config, "--config is required");
    auto cfg = load_run_config(o.config);
    check_environment(cfg);
    return Workspace(std::move(cfg), make_provider, make_embedder);
}

std::vector<MemoryAbility> parse_abilities(const std::string& spec) {
    if (spec == "all") return {kAllAbilities.begin(), kAllAbilities.end()};
    std::vector<MemoryAbility> out;
    std::stringstream in(spec);
    for (std::string part; std::getline(in, part, ',');) {
        auto a = parse_ability(trim(part));
        if (!a) throw Error(ErrorCode::Config, "unknown ability '" + part + "'");
        out.push_back(*a);
    }
    return out;
}

std::filesystem::path sibling(const std::string& path, std::string_view name) {
    return std::filesystem::path(path).parent_path() / name;
}

int run_synthesize(const Options& o) {
    auto ws = open_workspace(o);
    auto& cfg = ws.config();
    if (!o.length.empty() || !o.category.empty()) {
        apply_preset(cfg, o.length.empty() ? cfg.length : o.length,
                     o.category.empty() ? cfg.synthesis.category : *parse_category(o.category));
    }
    const std::filesystem::path out = o.out.empty() ? cfg.workspace : std::filesystem::path(o.out);
    auto result = ws.synthesize(out, o.stop_after >= 0 ? std::optional<int>(o.stop_after) : std::nullopt);
    std::cout << (result.complete ? "complete" : "checkpointed") << ' ' << result.dir.string() << " turns "
              << result.turns << '\n';
    return 0;
}

int run_probe(const Options& o) {
    auto ws = open_workspace(o);
    const auto cap = o.cap >= 0 ? static_cast<std::size_t>(o.cap) : ws.config().probe_cap;
    const auto out = o.out.empty() ? sibling(o.conversation, "probes") : std::filesystem::path(o.out);
    const auto probes = ws.probe(o.conversation, o.plan, parse_abilities(o.ability), cap, out);
    std::cout << probes.size() << " probes written to " << out.string() << '\n';
    return 0;
}

int run_ingest(const Options& o) {
    auto ws = open_workspace(o);
    ws.ingest(o.conversation, o.store);
    std::cout << "memory stored in " << o.store << '\n';
    return 0;
}

int run_answer(const Options& o) {
    auto ws = open_workspace(o);
    const auto& cfg = ws.config();
    const auto k = o.k > 0 ? static_cast<std::size_t>(o.k) : cfg.k;
    const auto z = o.z > 0 ? static_cast<std::size_t>(o.z) : cfg.z;
    AblationConfig ab = cfg.ablation;
    if (o.no_retrieval) ab.use_retrieval = false;
    if (o.no_scratchpad) ab.use_scratchpad = false;
    if (o.no_working) ab.use_working = false;
    if (o.no_filter) ab.use_noise_filter = false;
    if (!o.question.empty()) {
        std::cout << ws.answer_question(o.store, o.question, k, z, ab) << '\n';
        return 0;
    }
    const auto out = o.out.empty() ? std::filesystem::path(o.store).parent_path() / "answers.jsonl"
                                   : std::filesystem::path(o.out);
    const auto rows = ws.answer_probes(o.store, o.probes, k, z, ab, out);
    std::cout << rows.size() << " answers written to " << out.string() << '\n';
    return 0;
}

int run_evaluate(const Options& o) {
    auto ws = open_workspace(o);
    const auto out = o.out.empty() ? sibling(o.answers, "scores.jsonl") : std::filesystem::path(o.out);
    const auto scores = ws.evaluate(o.probes, o.answers, out);
    std::cout << scores.size() << " scores written to " << out.string() << '\n';
    return 0;
}

int run_report(const Options& o) {
    std::cout << write_report(o.in, o.format);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memlab: long-conversation memory benchmark toolkit"};
    app.require_subcommand(1);
    Options o;

    auto with_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", o.config, "run configuration (JSON)");
        cmd->add_option("--log-level", o.verbosity, "debug|info|warn|error")
            ->check(CLI::IsMember({"debug", "info", "warn", "error"}));
    };

    auto* synth = app.add_subcommand("synthesize", "generate a conversation and its plan");
    with_config(synth);
    synth->add_option("--length", o.length)->check(CLI::IsMember({"128k", "500k", "1m", "10m", "mini"}));
    synth->add_option("--category", o.category)->check(CLI::IsMember({"general", "coding", "math"}));
    synth->add_option("--out", o.out, "output root; defaults to the configured workspace");
    synth->add_option("--stop-after", o.stop_after, "stop after this many scripted questions (checkpoint stays)");
    synth->get_option("--config")->required();

    auto* probe = app.add_subcommand("probe", "generate probing questions");
    with_config(probe);
    probe->add_option("--conversation", o.conversation)->required()->check(CLI::ExistingFile);
    probe->add_option("--plan", o.plan)->required()->check(CLI::ExistingFile);
    probe->add_option("--ability", o.ability, "ability name, comma list, or all");
    probe->add_option("--cap", o.cap, "probes kept per ability");
    probe->add_option("--out", o.out, "probe directory; defaults to probes/ next to the conversation");

    auto* ingest = app.add_subcommand("ingest", "build the memory store for a conversation");
    with_config(ingest);
    ingest->add_option("--conversation", o.conversation)->required()->check(CLI::ExistingFile);
    ingest->add_option("--store", o.store)->required();

    auto* answer = app.add_subcommand("answer", "answer a question or a probe set from memory");
    with_config(answer);
    auto* q = answer->add_option("--question", o.question);
    auto* p = answer->add_option("--probes", o.probes)->check(CLI::ExistingPath);
    q->excludes(p);
    answer->add_option("--store", o.store)->required()->check(CLI::ExistingDirectory);
    answer->add_option("--k", o.k, "retrieved segments");
    answer->add_option("--z", o.z, "recent exchange pairs");
    answer->add_flag("--no-retrieval", o.no_retrieval);
    answer->add_flag("--no-scratchpad", o.no_scratchpad);
    answer->add_flag("--no-working", o.no_working);
    answer->add_flag("--no-filter", o.no_filter);
    answer->add_option("--out", o.out, "answers file; defaults to answers.jsonl next to the store");

    auto* evaluate = app.add_subcommand("evaluate", "score answers against probe rubrics");
    with_config(evaluate);
    evaluate->add_option("--probes", o.probes)->required()->check(CLI::ExistingPath);
    evaluate->add_option("--answers", o.answers)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", o.out, "scores file; defaults to scores.jsonl next to the answers");

    auto* report = app.add_subcommand("report", "aggregate scores into a table");
    report->add_option("--in", o.in)->required()->check(CLI::ExistingPath);
    report->add_option("--format", o.format)->check(CLI::IsMember({"csv", "md"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::map<std::string, LogLevel> levels{
        {"debug", LogLevel::Debug}, {"info", LogLevel::Info}, {"warn", LogLevel::Warn}, {"error", LogLevel::Error}};
    set_log_level(levels.at(o.verbosity));

    if (answer->parsed() && o.question.empty() && o.probes.empty()) {
        std::cerr << "answer: one of --question or --probes is required\n";
        return 2;
    }

    try {
        if (synth->parsed()) return run_synthesize(o);
        if (probe->parsed()) return run_probe(o);
        if (ingest->parsed()) return run_ingest(o);
        if (answer->parsed()) return run_answer(o);
        if (evaluate->parsed()) return run_evaluate(o);
        if (report->parsed()) return run_report(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::Config ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
