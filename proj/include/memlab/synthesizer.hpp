#pragma once

// Benchmark conversation synthesis: user profile, storyline plan(s), special
// bullets, batched user questions and the role-played dialogue.

#include "memlab/domain.hpp"
#include "memlab/gateway.hpp"
#include "memlab/io.hpp"
#include "memlab/log.hpp"
#include "memlab/prompts.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <set>

namespace memlab {

enum class PlanMode { Single, SequentialExpansion, HierarchicalDecomposition };

inline std::string_view to_string(PlanMode m) {
    switch (m) {
        case PlanMode::Single: return "single";
        case PlanMode::SequentialExpansion: return "sequential";
        case PlanMode::HierarchicalDecomposition: return "hierarchical";
    }
    return "";
}

inline PlanMode parse_plan_mode(std::string_view s) {
    const auto l = to_lower(trim(s));
    if (l == "single") return PlanMode::Single;
    if (l == "sequential" || l == "sequential_expansion") return PlanMode::SequentialExpansion;
    if (l == "hierarchical" || l == "hierarchical_decomposition") return PlanMode::HierarchicalDecomposition;
    throw Error(ErrorCode::Config, "unknown plan mode '" + std::string(s) + "'");
}

struct SynthesisConfig {
    TargetLength target_length = TargetLength::L128K;
    Category category = Category::General;
    int sub_plans = 5;            // N
    int bullets = 20;             // M, base bullets per sub-plan
    int batches = 10;             // K
    int questions_per_batch = 2;  // I
    int delta1 = 2;               // counter-question cycles per scripted question
    int delta2 = 2;               // follow-up cycles per scripted question
    int summary_window = 10;      // recent exchange pairs shown verbatim
    PlanMode plan_mode = PlanMode::Single;
    std::uint64_t seed_rng = 0;
    int min_narratives = 15;
    int max_narratives = 20;
    int plan_count_10m = 10;
    int min_parent_gap = 15;

    // Batching presets per size and category; M is the smallest multiple of
    // K that is at least 20.
    static SynthesisConfig preset(TargetLength length, Category category) {
        struct Row {
            int n, k, i;
        };
        static constexpr std::array<std::array<Row, 3>, 4> table{{
            {{{5, 10, 2}, {3, 23, 1}, {3, 25, 1}}},
            {{{10, 10, 4}, {10, 10, 3}, {10, 10, 4}}},
            {{{10, 10, 9}, {10, 10, 6}, {10, 10, 6}}},
            {{{10, 10, 9}, {10, 10, 6}, {10, 10, 6}}},
        }};
        const auto& row = table[static_cast<std::size_t>(length)][static_cast<std::size_t>(category)];
        SynthesisConfig c;
        c.target_length = length;
        c.category = category;
        c.sub_plans = row.n;
        c.batches = row.k;
        c.bullets = (20 + row.k - 1) / row.k * row.k;
        c.questions_per_batch = row.i;
        c.plan_mode = length == TargetLength::L10M ? PlanMode::SequentialExpansion : PlanMode::Single;
        return c;
    }

    static SynthesisConfig mini(Category category = Category::General) {
        SynthesisConfig c;
        c.category = category;
        c.sub_plans = 2;
        c.bullets = 4;
        c.batches = 2;
        c.questions_per_batch = 1;
        return c;
    }

    int questions_per_sub_plan() const { return batches * questions_per_batch; }

    void validate() const {
        auto fail = [](const std::string& m) { throw Error(ErrorCode::Config, m); };
        if (sub_plans <= 0 || bullets <= 0 || batches <= 0 || questions_per_batch <= 0) {
            fail("N, M, K and I must be positive");
        }
        if (bullets % batches != 0) fail("bullets per sub-plan must be divisible by the batch count");
        if (delta1 < 0 || delta2 < 0) fail("loop thresholds must be non-negative");
        if (summary_window <= 0) fail("summary window must be positive");
        if (min_narratives <= 0 || min_narratives > max_narratives) fail("narrative bounds are inconsistent");
        if ((plan_mode == PlanMode::Single) != (target_length != TargetLength::L10M)) {
            fail("plan mode must be single exactly when the target length is not 10m");
        }
        if (plan_count_10m <= 0) fail("10m plan count must be positive");
    }
};

struct SynthesisSettings {
    CallSettings plan{"default", 0.1, std::nullopt};
    CallSettings questions{"default", 0.1, 6000};
    CallSettings dialogue{"default", 0.1, std::nullopt};
    CallSettings detect{"default", 0.0, std::nullopt};
};

// ---- deterministic sampling ----------------------------------------------------

// Bounded draws are done here rather than through std distributions, whose
// output differs across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty range");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do x = engine_();
        while (x >= limit);
        return x % n;
    }

    int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }

    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[below(v.size())];
    }

private:
    std::mt19937_64 engine_;
};

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

// rank in [0, C(n,k)) -> k ascending indices, lexicographic order.
inline std::vector<int> unrank_combination(std::uint64_t rank, int n, int k) {
    if (rank >= binomial(n, k)) throw Error(ErrorCode::InvalidArgument, "combination rank out of range");
    std::vector<int> out;
    int x = 0;
    for (int remaining = k; remaining > 0; --remaining) {
        for (;;) {
            const auto c = binomial(n - x - 1, remaining - 1);
            if (rank < c) break;
            rank -= c;
            ++x;
        }
        out.push_back(x++);
    }
    return out;
}

inline constexpr int kMbtiPick = 6;

inline std::vector<std::string> sample_mbti(Rng& rng) {
    const int n = static_cast<int>(kMbtiTypes.size());
    std::vector<std::string> out;
    for (int i : unrank_combination(rng.below(binomial(n, kMbtiPick)), n, kMbtiPick)) {
        out.emplace_back(kMbtiTypes[static_cast<std::size_t>(i)]);
    }
    return out;
}

namespace detail {
inline const std::vector<std::string> kFirstNames = {"Alex",  "Priya", "Mateo", "Hana",  "Jonas", "Amara",
                                                     "Lukas", "Mei",   "Omar",  "Sofia", "Ravi",  "Elena",
                                                     "Tomas", "Aisha", "Noah",  "Yuki"};
inline const std::vector<std::string> kLastNames = {"Okafor", "Lindqvist", "Moreau", "Tanaka", "Demir",
                                                    "Novak",  "Haddad",    "Silva",  "Kowalski", "Iyer"};
inline const std::vector<std::string> kGenders = {"female", "male", "non-binary"};
inline const std::vector<std::string> kLocations = {"Lisbon, Portugal", "Toronto, Canada", "Istanbul, Turkey",
                                                    "Austin, USA",      "Pune, India",     "Melbourne, Australia",
                                                    "Leipzig, Germany", "Osaka, Japan"};
inline const std::vector<std::string> kProfessions = {"software engineer", "nurse",          "high-school teacher",
                                                      "architect",         "data analyst",   "chef",
                                                      "mechanical engineer", "graduate student", "accountant",
                                                      "graphic designer"};
}  // namespace detail

inline std::string sample_name(Rng& rng) { return rng.pick(detail::kFirstNames) + " " + rng.pick(detail::kLastNames); }

// ---- output parsing ---------------------------------------------------------------

namespace detail {

inline std::string text_field(const json& j, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        if (auto it = j.find(k); it != j.end() && it->is_string()) return it->get<std::string>();
    }
    return {};
}

inline void check_anchors(const Plan& plan, const std::optional<Timeline>& timeline) {
    std::optional<Date> previous;
    for (std::size_t i = 0; i < plan.sub_plans.size(); ++i) {
        const auto date = find_date(plan.sub_plans[i].time_anchor);
        if (!date) continue;  // period text ("Spring 2024") is accepted as is
        if (timeline && (*date < timeline->start || timeline->end < *date)) {
            throw Error(ErrorCode::Malformed, "sub-plan " + std::to_string(i) + " anchor " + date->iso() +
                                                  " is outside the timeline");
        }
        if (previous && *date < *previous) {
            throw Error(ErrorCode::Malformed, "sub-plan " + std::to_string(i) + " anchor goes back in time");
        }
        previous = date;
    }
}

template <class F>
auto with_retries(int retries, std::string_view what, F&& attempt) -> decltype(attempt()) {
    for (int i = 0;; ++i) {
        try {
            return attempt();
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Malformed || i >= retries) throw;
            log_warn(std::string(what) + ": malformed output, retrying (" + e.what() + ")");
        }
    }
}

}  // namespace detail

inline Plan parse_plan(std::string_view text, int sub_plans, int bullets, const std::optional<Timeline>& timeline) {
    const auto j = extract_json(text, '{');
    Plan plan;
    const auto it = j.find("sub_plans");
    if (it == j.end() || !it->is_array()) throw Error(ErrorCode::Malformed, "plan has no sub_plans array");
    if (static_cast<int>(it->size()) != sub_plans) {
        throw Error(ErrorCode::Malformed, "plan has " + std::to_string(it->size()) + " sub-plans, expected " +
                                              std::to_string(sub_plans));
    }
    for (const auto& sj : *it) {
        SubPlan sp;
        sp.time_anchor = detail::text_field(sj, {"time_anchor", "anchor", "date"});
        if (trim(sp.time_anchor).empty()) throw Error(ErrorCode::Malformed, "sub-plan without time anchor");
        const auto bj = sj.find("bullets");
        if (bj == sj.end() || !bj->is_array() || static_cast<int>(bj->size()) != bullets) {
            throw Error(ErrorCode::Malformed, "sub-plan must have exactly " + std::to_string(bullets) + " bullets");
        }
        for (const auto& b : *bj) {
            BulletPoint bp;
            if (b.is_string()) {
                bp.description = b.get<std::string>();
            } else {
                bp.narrative_label = detail::text_field(b, {"narrative", "narrative_label", "label"});
                bp.description = detail::text_field(b, {"description", "text", "bullet"});
            }
            if (trim(bp.description).empty()) throw Error(ErrorCode::Malformed, "bullet with empty description");
            sp.bullets.push_back(std::move(bp));
        }
        plan.sub_plans.push_back(std::move(sp));
    }
    plan.summary = detail::text_field(j, {"summary"});
    detail::check_anchors(plan, timeline);
    return plan;
}

// Lines "label: description"; list markers are stripped.
inline std::vector<std::string> parse_narratives(std::string_view text) {
    std::vector<std::string> out;
    for (auto line : split_lines(text)) {
        auto item = strip_list_marker(line);
        if (!item.empty()) out.emplace_back(item);
    }
    return out;
}

// Splits on "QUESTION:" markers; text before the first marker is ignored.
inline std::vector<std::string> parse_questions(std::string_view text) {
    std::vector<std::string> out;
    std::optional<std::string> current;
    auto flush = [&] {
        if (current) {
            auto t = std::string(trim(*current));
            if (!t.empty()) out.push_back(std::move(t));
        }
    };
    for (auto line : split_lines(text)) {
        auto stripped = strip_list_marker(line);
        while (!stripped.empty() && stripped.front() == '*') stripped.remove_prefix(1);
        if (starts_with_icase(stripped, "question:")) {
            flush();
            current = std::string(trim(stripped.substr(9)));
            while (!current->empty() && current->front() == '*') current->erase(0, 1);
            continue;
        }
        if (current) {
            if (!current->empty()) *current += "\n";
            *current += std::string(line);
        }
    }
    flush();
    return out;
}

// ---- dialogue state -------------------------------------------------------------------

struct ScriptedQuestion {
    int plan = 0;
    int sub_plan = 0;
    int batch = 0;
    int ordinal = 0;  // within the batch
    std::vector<BulletRef> bullet_refs;
    std::string text;
};

struct QuestionThread {
    int question = 0;
    int first_turn = 0;
    int end_turn = 0;  // exclusive
    int counter_cycles = 0;
    int followup_cycles = 0;
    bool aborted = false;
};

struct DialogueState {
    Conversation conversation;
    std::string older_summary;
    int summarized_pairs = 0;  // pairs already folded into older_summary
    int next_question = 0;     // first question not yet processed
    std::vector<QuestionThread> threads;
};

inline void to_json(json& j, const ScriptedQuestion& q) {
    json refs = json::array();
    for (const auto& r : q.bullet_refs) refs.push_back(r);
    j = json{{"plan", q.plan}, {"sub_plan", q.sub_plan}, {"batch", q.batch},
             {"ordinal", q.ordinal}, {"bullet_refs", refs}, {"text", q.text}};
}

inline void from_json(const json& j, ScriptedQuestion& q) {
    q.plan = j.value("plan", 0);
    q.sub_plan = j.at("sub_plan").get<int>();
    q.batch = j.at("batch").get<int>();
    q.ordinal = j.value("ordinal", 0);
    q.bullet_refs.clear();
    for (const auto& r : j.at("bullet_refs")) q.bullet_refs.push_back(r.get<BulletRef>());
    q.text = j.at("text").get<std::string>();
}

inline void to_json(json& j, const QuestionThread& t) {
    j = json{{"question", t.question},           {"first_turn", t.first_turn},
             {"end_turn", t.end_turn},           {"counter_cycles", t.counter_cycles},
             {"followup_cycles", t.followup_cycles}, {"aborted", t.aborted}};
}

inline void from_json(const json& j, QuestionThread& t) {
    t.question = j.at("question").get<int>();
    t.first_turn = j.at("first_turn").get<int>();
    t.end_turn = j.at("end_turn").get<int>();
    t.counter_cycles = j.value("counter_cycles", 0);
    t.followup_cycles = j.value("followup_cycles", 0);
    t.aborted = j.value("aborted", false);
}

inline json checkpoint_to_json(const DialogueState& s) {
    json turns = json::array();
    for (const auto& t : s.conversation.turns) turns.push_back(turn_to_json(t));
    return json{{"next_question", s.next_question},
                {"summarized_pairs", s.summarized_pairs},
                {"older_summary", s.older_summary},
                {"threads", s.threads},
                {"turns", turns}};
}

inline DialogueState checkpoint_from_json(const json& j, const Tokenizer& tok = default_tokenizer()) {
    DialogueState s;
    s.next_question = j.at("next_question").get<int>();
    s.summarized_pairs = j.value("summarized_pairs", 0);
    s.older_summary = j.value("older_summary", "");
    s.threads = j.at("threads").get<std::vector<QuestionThread>>();
    std::string lines;
    for (const auto& t : j.at("turns")) lines += t.dump() + "\n";
    s.conversation = conversation_from_jsonl(lines, {}, tok);
    return s;
}

// Records, on every bullet a question was generated from, the turns of that
// question's thread.
inline void align_bullets(std::vector<Plan>& plans, const std::vector<ScriptedQuestion>& questions,
                          const std::vector<QuestionThread>& threads) {
    for (auto& p : plans) {
        for (auto& sp : p.sub_plans) {
            for (auto& b : sp.bullets) b.turn_ids.clear();
        }
    }
    for (const auto& t : threads) {
        const auto& q = questions.at(static_cast<std::size_t>(t.question));
        for (const auto& ref : q.bullet_refs) {
            auto& ids = plans.at(static_cast<std::size_t>(ref.plan))
                            .sub_plans.at(static_cast<std::size_t>(ref.sub_plan))
                            .bullets.at(static_cast<std::size_t>(ref.bullet))
                            .turn_ids;
            for (int i = t.first_turn; i < t.end_turn; ++i) ids.push_back(i);
        }
    }
    for (auto& p : plans) {
        for (auto& sp : p.sub_plans) {
            for (auto& b : sp.bullets) {
                std::sort(b.turn_ids.begin(), b.turn_ids.end());
                b.turn_ids.erase(std::unique(b.turn_ids.begin(), b.turn_ids.end()), b.turn_ids.end());
            }
        }
    }
}

// ---- synthesizer ----------------------------------------------------------------------

class Synthesizer {
public:
    Synthesizer(std::shared_ptr<Gateway> gateway, SynthesisConfig cfg, SynthesisSettings settings = {},
                Tokenizer tok = default_tokenizer())
        : gateway_(std::move(gateway)), cfg_(cfg), settings_(std::move(settings)), tok_(std::move(tok)) {
        cfg_.validate();
    }

    const SynthesisConfig& config() const { return cfg_; }

    UserProfile sample_profile(Rng& rng) {
        UserProfile p;
        p.mbti_combination = sample_mbti(rng);
        p.name = sample_name(rng);
        p.age = rng.between(22, 60);
        p.gender = rng.pick(detail::kGenders);
        p.location = rng.pick(detail::kLocations);
        p.profession = rng.pick(detail::kProfessions);
        p.personality = std::string(trim(call(settings_.plan, prompts::personality(p.mbti_combination, p))));
        if (p.personality.empty()) throw Error(ErrorCode::Malformed, "empty personality description");
        return p;
    }

    RelationshipGraph sample_relationships(Rng& rng, const UserProfile& user) const {
        RelationshipGraph g;
        const int gap = cfg_.min_parent_gap;
        for (int i = 0; i < 2; ++i) g.persons.push_back({sample_name(rng), Relation::Parent, user.age + gap + rng.between(0, 15)});
        g.persons.push_back({sample_name(rng), Relation::Partner, std::max(18, user.age + rng.between(-5, 5))});
        if (user.age >= gap + 1) {
            const int children = rng.between(0, 2);
            for (int i = 0; i < children; ++i) {
                g.persons.push_back({sample_name(rng), Relation::Child, rng.between(1, user.age - gap)});
            }
        }
        for (int i = 0; i < 2; ++i) g.persons.push_back({sample_name(rng), Relation::Friend, std::max(18, user.age + rng.between(-8, 8))});
        for (int i = 0; i < 2; ++i) {
            g.persons.push_back({sample_name(rng), Relation::Acquaintance, std::max(18, user.age + rng.between(-15, 15))});
        }
        return g;
    }

    std::vector<std::string> generate_narratives(const Seed& seed) {
        std::vector<std::string> out;
        for (int attempt = 0; attempt < 2; ++attempt) {
            out = parse_narratives(call(settings_.plan, prompts::narratives(seed, cfg_.min_narratives, cfg_.max_narratives)));
            const int n = static_cast<int>(out.size());
            if (n >= cfg_.min_narratives && n <= cfg_.max_narratives) return out;
            log_warn("narrative count " + std::to_string(n) + " out of range");
        }
        throw Error(ErrorCode::CountOutOfRange, "model produced " + std::to_string(out.size()) + " narratives, expected " +
                                                    std::to_string(cfg_.min_narratives) + "-" +
                                                    std::to_string(cfg_.max_narratives));
    }

    Plan generate_plan(const Seed& seed, const UserProfile& profile, const RelationshipGraph& rel,
                       const std::vector<std::string>& narratives) {
        if (cfg_.plan_mode != PlanMode::Single) throw Error(ErrorCode::Config, "single plans need plan mode single");
        const auto prompt = prompts::plan_single(seed, profile, rel, narratives, cfg_.sub_plans, cfg_.bullets, cfg_.category);
        return detail::with_retries(kRetries, "plan generation", [&] {
            return parse_plan(call(settings_.plan, prompt), cfg_.sub_plans, cfg_.bullets, seed.timeline);
        });
    }

    // Exactly plan_count_10m seeds whose timelines tile the main timeline
    // without gaps or overlap.
    std::vector<Seed> derive_seeds(const Seed& main, const UserProfile& profile) {
        if (cfg_.target_length != TargetLength::L10M) throw Error(ErrorCode::Config, "seed derivation is for 10m only");
        const bool hierarchical = cfg_.plan_mode == PlanMode::HierarchicalDecomposition;
        const auto prompt = prompts::seeds_10m(main, profile, hierarchical, cfg_.plan_count_10m);
        return detail::with_retries(kRetries, "seed derivation", [&] {
            const auto arr = extract_json(call(settings_.plan, prompt), '[');
            if (static_cast<int>(arr.size()) != cfg_.plan_count_10m) {
                throw Error(ErrorCode::CountOutOfRange, "model produced " + std::to_string(arr.size()) + " seeds, expected " +
                                                            std::to_string(cfg_.plan_count_10m));
            }
            std::vector<Seed> seeds;
            for (const auto& sj : arr) {
                Seed s;
                try {
                    s = sj.get<Seed>();
                } catch (const json::exception& e) {
                    throw Error(ErrorCode::Malformed, std::string("seed: ") + e.what());
                }
                if (s.domain.empty()) s.domain = main.domain;
                if (s.subtopics.empty()) s.subtopics = main.subtopics;
                seeds.push_back(std::move(s));
            }
            check_slices(main.timeline, seeds);
            return seeds;
        });
    }

    std::vector<Plan> generate_plans_10m(const Seed& main, const std::vector<Seed>& seeds, const UserProfile& profile,
                                         const RelationshipGraph& rel) {
        if (static_cast<int>(seeds.size()) != cfg_.plan_count_10m) {
            throw Error(ErrorCode::CountOutOfRange, "expected " + std::to_string(cfg_.plan_count_10m) + " seeds");
        }
        std::vector<Plan> plans;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const auto narratives = generate_narratives(seeds[i]);
            prompts::PlanContext10m ctx;
            ctx.main_seed = &main;
            ctx.all_seeds = &seeds;
            ctx.index = static_cast<int>(i);
            ctx.first = i == 0;
            ctx.previous_plan = i > 0 ? &plans.back() : nullptr;
            ctx.hierarchical = cfg_.plan_mode == PlanMode::HierarchicalDecomposition;
            for (const auto& p : plans) ctx.previous_summaries.push_back(plan_summary(p));
            const auto prompt = prompts::plan_10m(ctx, profile, rel, narratives, cfg_.sub_plans, cfg_.bullets, cfg_.category);
            auto plan = detail::with_retries(kRetries, "plan " + std::to_string(i) + " generation", [&] {
                return parse_plan(call(settings_.plan, prompt), cfg_.sub_plans, cfg_.bullets, seeds[i].timeline);
            });
            plan.seed_ref = static_cast<int>(i);
            plans.push_back(std::move(plan));
        }
        return plans;
    }

    // Adds one contradiction, one update and one instruction bullet to every
    // sub-plan, after the base bullets.
    Plan augment_plan(const Plan& plan) {
        for (const auto& sp : plan.sub_plans) {
            for (const auto& b : sp.bullets) {
                if (b.kind != BulletKind::Normal) throw Error(ErrorCode::InvalidArgument, "plan is already augmented");
            }
        }
        const auto prompt = prompts::augment(plan);
        return detail::with_retries(kRetries, "plan augmentation", [&] {
            const auto j = extract_json(call(settings_.plan, prompt), '{');
            const auto it = j.find("sub_plans");
            if (it == j.end() || !it->is_array() || it->size() != plan.sub_plans.size()) {
                throw Error(ErrorCode::Malformed, "augmentation must have one entry per sub-plan");
            }
            Plan out = plan;
            for (std::size_t i = 0; i < it->size(); ++i) {
                const auto& bullets = (*it)[i].is_array() ? (*it)[i] : (*it)[i].value("bullets", json::array());
                std::set<BulletKind> kinds;
                std::vector<BulletPoint> added;
                for (const auto& b : bullets) {
                    BulletPoint bp;
                    const auto kind = parse_bullet_kind(detail::text_field(b, {"kind", "type"}));
                    if (!kind || *kind == BulletKind::Normal) throw Error(ErrorCode::Malformed, "augmentation bullet kind");
                    bp.kind = *kind;
                    bp.narrative_label = detail::text_field(b, {"narrative", "narrative_label", "label"});
                    bp.description = detail::text_field(b, {"description", "text", "bullet"});
                    if (trim(bp.description).empty()) throw Error(ErrorCode::Malformed, "augmentation bullet is empty");
                    kinds.insert(bp.kind);
                    added.push_back(std::move(bp));
                }
                if (added.size() != 3 || kinds.size() != 3) {
                    throw Error(ErrorCode::Malformed, "sub-plan " + std::to_string(i) +
                                                          " needs one contradiction, update and instruction bullet");
                }
                auto& target = out.sub_plans[i].bullets;
                target.insert(target.end(), added.begin(), added.end());
            }
            return out;
        });
    }

    // Base bullets split into K contiguous runs; the special bullets join the
    // last run of their sub-plan.
    std::vector<std::vector<int>> batch_partition(const SubPlan& sp) const {
        std::vector<int> base, special;
        for (int i = 0; i < static_cast<int>(sp.bullets.size()); ++i) {
            (sp.bullets[static_cast<std::size_t>(i)].kind == BulletKind::Normal ? base : special).push_back(i);
        }
        if (static_cast<int>(base.size()) % cfg_.batches != 0) {
            throw Error(ErrorCode::InvalidArgument, "base bullet count " + std::to_string(base.size()) +
                                                        " is not divisible by K=" + std::to_string(cfg_.batches));
        }
        const std::size_t size = base.size() / static_cast<std::size_t>(cfg_.batches);
        std::vector<std::vector<int>> out;
        for (int k = 0; k < cfg_.batches; ++k) {
            out.emplace_back(base.begin() + static_cast<std::ptrdiff_t>(k * size),
                             base.begin() + static_cast<std::ptrdiff_t>((k + 1) * size));
        }
        out.back().insert(out.back().end(), special.begin(), special.end());
        return out;
    }

    std::vector<ScriptedQuestion> generate_user_questions(const Seed& seed, const Plan& plan, int plan_index) {
        std::vector<ScriptedQuestion> out;
        for (int s = 0; s < static_cast<int>(plan.sub_plans.size()); ++s) {
            const auto& sp = plan.sub_plans[static_cast<std::size_t>(s)];
            const std::vector<SubPlan> prior(plan.sub_plans.begin(), plan.sub_plans.begin() + s);
            const auto batches = batch_partition(sp);
            std::vector<BulletPoint> earlier;
            for (int k = 0; k < static_cast<int>(batches.size()); ++k) {
                std::vector<BulletPoint> current;
                for (int b : batches[static_cast<std::size_t>(k)]) current.push_back(sp.bullets[static_cast<std::size_t>(b)]);
                const auto prompt = prompts::questions(cfg_.category, seed, current, earlier, prior, sp.time_anchor,
                                                       cfg_.questions_per_batch);
                try {
                    const auto texts = detail::with_retries(kRetries, "question generation", [&] {
                        auto qs = parse_questions(call(settings_.questions, prompt));
                        if (static_cast<int>(qs.size()) != cfg_.questions_per_batch) {
                            throw Error(ErrorCode::Malformed, "got " + std::to_string(qs.size()) + " questions, expected " +
                                                                  std::to_string(cfg_.questions_per_batch));
                        }
                        return qs;
                    });
                    for (int i = 0; i < static_cast<int>(texts.size()); ++i) {
                        ScriptedQuestion q;
                        q.plan = plan_index;
                        q.sub_plan = s;
                        q.batch = k;
                        q.ordinal = i;
                        for (int b : batches[static_cast<std::size_t>(k)]) q.bullet_refs.push_back({plan_index, s, b});
                        q.text = texts[static_cast<std::size_t>(i)];
                        out.push_back(std::move(q));
                    }
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::Malformed) throw;
                    log_warn("skipping batch " + std::to_string(k) + " of sub-plan " + std::to_string(s) + ": " + e.what());
                }
                earlier.insert(earlier.end(), current.begin(), current.end());
            }
        }
        return out;
    }

    // Detectors fail closed: an unparseable answer counts as "no".
    bool detect_question(std::string_view assistant_text, const prompts::DialogueContext& ctx) {
        return decide(prompts::detect_question(assistant_text, ctx));
    }

    bool detect_followup(std::string_view assistant_text, const prompts::DialogueContext& ctx) {
        return decide(prompts::detect_followup(assistant_text, ctx));
    }

    using CheckpointFn = std::function<void(const DialogueState&)>;

    // Runs the scripted questions from state.next_question on. `seeds` is
    // indexed by Plan::seed_ref. on_question runs after every question; with
    // stop_after set, at most that many questions are processed in this call.
    void generate_dialogue(const std::vector<ScriptedQuestion>& questions, const std::vector<Plan>& plans,
                           const std::vector<Seed>& seeds, DialogueState& state, const CheckpointFn& on_question = {},
                           std::optional<int> stop_after = std::nullopt) {
        int processed = 0;
        while (state.next_question < static_cast<int>(questions.size())) {
            if (stop_after && processed >= *stop_after) return;
            const int qi = state.next_question;
            const auto& q = questions[static_cast<std::size_t>(qi)];
            refresh_summary(state);
            std::vector<Turn> thread;
            QuestionThread record;
            record.question = qi;
            record.first_turn = static_cast<int>(state.conversation.turns.size());
            try {
                run_thread(q, plans, seeds, state, thread, record);
            } catch (const Error& e) {
                record.aborted = true;
                thread.resize(thread.size() - thread.size() % 2);
                log_warn("question " + std::to_string(qi) + " thread aborted after " + std::to_string(thread.size()) +
                         " turns: " + e.what());
            }
            for (auto& t : thread) state.conversation.turns.push_back(std::move(t));
            record.end_turn = static_cast<int>(state.conversation.turns.size());
            state.threads.push_back(record);
            state.next_question = qi + 1;
            ++processed;
            if (on_question) on_question(state);
        }
    }

private:
    static constexpr int kRetries = 2;

    std::string call(const CallSettings& s, const std::string& prompt) {
        return gateway_->generate(make_request(s, "", prompt)).text;
    }

    bool decide(const std::string& prompt) {
        try {
            return gateway_->generate_decision(make_request(settings_.detect, "", prompt)) == Decision::Yes;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Unparseable) throw;
            return false;
        }
    }

    static std::string plan_summary(const Plan& p) {
        if (!trim(p.summary).empty()) return p.summary;
        std::string out;
        for (const auto& sp : p.sub_plans) {
            if (!sp.bullets.empty()) out += sp.time_anchor + ": " + sp.bullets.front().description + " ";
        }
        return std::string(trim(out));
    }

    static void check_slices(const Timeline& main, const std::vector<Seed>& seeds) {
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const auto& t = seeds[i].timeline;
            if (t.end < t.start) throw Error(ErrorCode::Malformed, "seed " + std::to_string(i) + " ends before it starts");
            const Date expected = i == 0 ? main.start : seeds[i - 1].timeline.end.plus_days(1);
            if (!(t.start == expected)) {
                throw Error(ErrorCode::Malformed, "seed " + std::to_string(i) + " starts " + t.start.iso() + ", expected " +
                                                      expected.iso());
            }
        }
        if (!seeds.empty() && !(seeds.back().timeline.end == main.end)) {
            throw Error(ErrorCode::Malformed, "seed slices do not end on the main timeline's end date");
        }
    }

    // Folds pairs that left the recent window into the running summary, at
    // most one call per scripted question.
    void refresh_summary(DialogueState& state) {
        const int pairs = static_cast<int>(state.conversation.turns.size() / 2);
        const int old_pairs = pairs - cfg_.summary_window;
        if (old_pairs <= state.summarized_pairs) return;
        const auto& turns = state.conversation.turns;
        const std::vector<Turn> fresh(turns.begin() + 2 * state.summarized_pairs, turns.begin() + 2 * old_pairs);
        try {
            auto summary = std::string(trim(call(settings_.dialogue, prompts::history_summary(state.older_summary,
                                                                                              prompts::render_turns(fresh)))));
            if (summary.empty()) throw Error(ErrorCode::Malformed, "empty history summary");
            state.older_summary = std::move(summary);
            state.summarized_pairs = old_pairs;
        } catch (const Error& e) {
            log_warn(std::string("history summary not updated: ") + e.what());
        }
    }

    prompts::DialogueContext context(const ScriptedQuestion& q, const std::vector<Plan>& plans,
                                     const std::vector<Seed>& seeds, const DialogueState& state,
                                     const std::vector<Turn>& thread) const {
        const auto& plan = plans.at(static_cast<std::size_t>(q.plan));
        prompts::DialogueContext ctx;
        ctx.seed = &seeds.at(static_cast<std::size_t>(plan.seed_ref));
        for (int s = 0; s < q.sub_plan; ++s) {
            ctx.prior_sub_plans += prompts::render_sub_plan(plan.sub_plans[static_cast<std::size_t>(s)], static_cast<std::size_t>(s));
        }
        ctx.current_sub_plan = prompts::render_sub_plan(plan.sub_plans.at(static_cast<std::size_t>(q.sub_plan)),
                                                        static_cast<std::size_t>(q.sub_plan));
        std::vector<Turn> all = state.conversation.turns;
        all.insert(all.end(), thread.begin(), thread.end());
        const std::size_t window = 2 * static_cast<std::size_t>(cfg_.summary_window);
        const std::vector<Turn> recent(all.end() - static_cast<std::ptrdiff_t>(std::min(window, all.size())), all.end());
        ctx.recent_turns = recent.empty() ? "(none)" : prompts::render_turns(recent);
        ctx.older_summary = state.older_summary;
        for (int p = 0; p < q.plan; ++p) {
            ctx.prior_plan_summaries += "Plan " + std::to_string(p + 1) + ": " + plan_summary(plans[static_cast<std::size_t>(p)]) + "\n";
        }
        return ctx;
    }

    void push(std::vector<Turn>& thread, const DialogueState& state, Role role, std::string content) {
        auto text = std::string(trim(content));
        if (text.empty()) throw Error(ErrorCode::Malformed, "empty generated turn");
        Turn t;
        t.index = static_cast<int>(state.conversation.turns.size() + thread.size());
        t.role = role;
        t.token_count = tok_(text);
        t.content = std::move(text);
        thread.push_back(std::move(t));
    }

    void run_thread(const ScriptedQuestion& q, const std::vector<Plan>& plans, const std::vector<Seed>& seeds,
                    const DialogueState& state, std::vector<Turn>& thread, QuestionThread& record) {
        auto assistant = [&] {
            const auto ctx = context(q, plans, seeds, state, std::vector<Turn>(thread.begin(), thread.end() - 1));
            push(thread, state, Role::Assistant, call(settings_.dialogue, prompts::assistant_reply(ctx, thread.back().content)));
        };
        push(thread, state, Role::User, q.text);
        assistant();
        while (record.counter_cycles < cfg_.delta1 &&
               detect_question(thread.back().content, context(q, plans, seeds, state, thread))) {
            const auto ctx = context(q, plans, seeds, state, thread);
            push(thread, state, Role::User, call(settings_.dialogue, prompts::user_answer(ctx, thread.back().content)));
            assistant();
            ++record.counter_cycles;
        }
        while (record.followup_cycles < cfg_.delta2 &&
               detect_followup(thread.back().content, context(q, plans, seeds, state, thread))) {
            const auto ctx = context(q, plans, seeds, state, thread);
            push(thread, state, Role::User, call(settings_.dialogue, prompts::user_followup(ctx, thread.back().content)));
            assistant();
            ++record.followup_cycles;
        }
    }

    std::shared_ptr<Gateway> gateway_;
    SynthesisConfig cfg_;
    SynthesisSettings settings_;
    Tokenizer tok_;
};

}  // namespace memlab
