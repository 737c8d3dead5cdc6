#include "memlab/synthesizer.hpp"
#include "mini_run.hpp"

#include <gtest/gtest.h>

using namespace memlab;

namespace {

struct PresetRow {
    TargetLength length;
    Category category;
    int n, k, i;
};

// Batching configuration per size and category, as published.
const std::vector<PresetRow> kPublished = {
    {TargetLength::L128K, Category::General, 5, 10, 2}, {TargetLength::L128K, Category::Coding, 3, 23, 1},
    {TargetLength::L128K, Category::Math, 3, 25, 1},    {TargetLength::L500K, Category::General, 10, 10, 4},
    {TargetLength::L500K, Category::Coding, 10, 10, 3}, {TargetLength::L500K, Category::Math, 10, 10, 4},
    {TargetLength::L1M, Category::General, 10, 10, 9},  {TargetLength::L1M, Category::Coding, 10, 10, 6},
    {TargetLength::L1M, Category::Math, 10, 10, 6},     {TargetLength::L10M, Category::General, 10, 10, 9},
    {TargetLength::L10M, Category::Coding, 10, 10, 6},  {TargetLength::L10M, Category::Math, 10, 10, 6},
};

std::vector<QuestionThread> threads_of(const std::filesystem::path& dir) {
    return checkpoint_from_json(read_json(dir / "checkpoint.json")).threads;
}

}  // namespace

TEST(SynthesisConfig, PresetsMatchPublishedTable) {
    for (const auto& row : kPublished) {
        const auto c = SynthesisConfig::preset(row.length, row.category);
        EXPECT_EQ(c.sub_plans, row.n);
        EXPECT_EQ(c.batches, row.k);
        EXPECT_EQ(c.questions_per_batch, row.i);
        EXPECT_EQ(c.bullets % c.batches, 0);
        EXPECT_GE(c.bullets, 20);
        EXPECT_LT(c.bullets - c.batches, 20);  // smallest such multiple
        EXPECT_EQ(c.delta1, 2);
        EXPECT_EQ(c.delta2, 2);
        EXPECT_EQ(c.plan_mode == PlanMode::SequentialExpansion, row.length == TargetLength::L10M);
        EXPECT_NO_THROW(c.validate());
    }
    EXPECT_EQ(SynthesisConfig::preset(TargetLength::L128K, Category::Coding).bullets, 23);
    EXPECT_EQ(SynthesisConfig::preset(TargetLength::L128K, Category::General).bullets, 20);
}

TEST(SynthesisConfig, ValidationRejectsInconsistentSettings) {
    auto c = SynthesisConfig::mini();
    c.bullets = 5;
    EXPECT_THROW(c.validate(), Error);
    c = SynthesisConfig::mini();
    c.plan_mode = PlanMode::HierarchicalDecomposition;
    EXPECT_THROW(c.validate(), Error);
    c = SynthesisConfig::preset(TargetLength::L10M, Category::Math);
    c.plan_mode = PlanMode::HierarchicalDecomposition;
    EXPECT_NO_THROW(c.validate());
    c.delta1 = -1;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Sampling, SixOfSixteenCombinationsAreEnumerable) {
    EXPECT_EQ(binomial(16, 6), 8008u);
    std::set<std::vector<int>> seen;
    for (std::uint64_t r = 0; r < 8008; ++r) {
        const auto c = unrank_combination(r, 16, 6);
        ASSERT_EQ(c.size(), 6u);
        EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
        EXPECT_LT(c.back(), 16);
        seen.insert(c);
    }
    EXPECT_EQ(seen.size(), 8008u);
    EXPECT_EQ(unrank_combination(0, 16, 6), (std::vector<int>{0, 1, 2, 3, 4, 5}));
    EXPECT_EQ(unrank_combination(8007, 16, 6), (std::vector<int>{10, 11, 12, 13, 14, 15}));
    EXPECT_THROW(unrank_combination(8008, 16, 6), Error);

    Rng a(42), b(42);
    const auto x = sample_mbti(a);
    EXPECT_EQ(x, sample_mbti(b));
    EXPECT_EQ(std::set<std::string>(x.begin(), x.end()).size(), 6u);
}

TEST(Parsing, QuestionsAreSplitOnMarkers) {
    const auto qs = parse_questions("Here you go:\nQUESTION: first line\ncontinued\n- **QUESTION:** second\n");
    ASSERT_EQ(qs.size(), 2u);
    EXPECT_EQ(qs[0], "first line\ncontinued");
    EXPECT_EQ(qs[1], "second");
}

TEST(Synthesis, MiniRunIsWellFormed) {
    const auto dir = mini::scratch_dir("synth_mini");
    Workspace ws(mini::config());
    const auto out = ws.synthesize(dir);
    ASSERT_TRUE(out.complete);
    EXPECT_EQ(out.questions, 4u);
    EXPECT_EQ(out.turns, 40u);
    const auto conv = load_conversation(out.dir / "conversation.jsonl");
    const auto tok = default_tokenizer();
    EXPECT_TRUE(validate_conversation(conv, &tok).empty());

    const auto plan = plan_file_from_json(read_json(out.dir / "plan.json"));
    ASSERT_EQ(plan.plans.size(), 1u);
    ASSERT_EQ(plan.plans[0].sub_plans.size(), 2u);
    for (const auto& sp : plan.plans[0].sub_plans) {
        ASSERT_EQ(sp.bullets.size(), 7u);  // 4 base + 3 special
        for (const auto& b : sp.bullets) EXPECT_FALSE(b.turn_ids.empty()) << b.description;
    }
    std::filesystem::remove_all(dir);
}

TEST(Synthesis, LoopBoundsWithAlwaysYesDetectors) {
    const auto dir = mini::scratch_dir("synth_twenty");
    auto cfg = mini::config();
    cfg.synthesis.questions_per_batch = 5;  // 2 sub-plans x 2 batches x 5 = 20 questions
    Workspace ws(cfg, mini::provider_factory({5, "Yes", nullptr}));
    const auto out = ws.synthesize(dir);
    ASSERT_TRUE(out.complete);
    EXPECT_EQ(out.questions, 20u);
    const auto threads = threads_of(out.dir);
    ASSERT_EQ(threads.size(), 20u);
    for (const auto& t : threads) {
        EXPECT_EQ(t.counter_cycles, 2);
        EXPECT_EQ(t.followup_cycles, 2);
        EXPECT_EQ(t.end_turn - t.first_turn, 10);
        EXPECT_FALSE(t.aborted);
    }
    EXPECT_EQ(out.turns, 200u);
    std::filesystem::remove_all(dir);
}

TEST(Synthesis, NoDetectedQuestionsMeansSinglePairs) {
    const auto dir = mini::scratch_dir("synth_no");
    Workspace ws(mini::config(), mini::provider_factory({0, "No", nullptr}));
    const auto out = ws.synthesize(dir);
    ASSERT_TRUE(out.complete);
    EXPECT_EQ(out.turns, 8u);
    for (const auto& t : threads_of(out.dir)) {
        EXPECT_EQ(t.counter_cycles, 0);
        EXPECT_EQ(t.followup_cycles, 0);
    }
    std::filesystem::remove_all(dir);
}

TEST(Synthesis, ResumeAfterStopMatchesUninterruptedRun) {
    const auto a = mini::scratch_dir("synth_resume_a");
    const auto b = mini::scratch_dir("synth_resume_b");
    {
        Workspace ws(mini::config());
        ws.synthesize(a);
    }
    {
        Workspace ws(mini::config());
        const auto first = ws.synthesize(b, 1);
        EXPECT_FALSE(first.complete);
        EXPECT_EQ(first.turns, 10u);
        EXPECT_FALSE(std::filesystem::exists(first.dir / "conversation.jsonl"));
    }
    {
        Workspace ws(mini::config());
        EXPECT_TRUE(ws.synthesize(b).complete);
    }
    for (const auto* name : {"conversation.jsonl", "plan.json", "questions.json", "profile.json", "checkpoint.json"}) {
        EXPECT_EQ(read_file(a / "mini-general" / name), read_file(b / "mini-general" / name)) << name;
    }
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST(Synthesis, MissingSeedIsConfigError) {
    auto cfg = mini::config();
    cfg.seed.reset();
    Workspace ws(cfg);
    try {
        ws.synthesize(mini::scratch_dir("synth_noseed"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Config);
    }
}
