#include "memlab/probes.hpp"
#include "mini_run.hpp"

#include <gtest/gtest.h>

using namespace memlab;

namespace {

class MiniProbes : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root_ = mini::scratch_dir("probes_suite");
        Workspace ws(mini::config());
        dir_ = ws.synthesize(root_).dir;
    }
    static void TearDownTestSuite() { std::filesystem::remove_all(root_); }

    static std::vector<Plan> plans() { return plan_file_from_json(read_json(dir_ / "plan.json")).plans; }

    static inline std::filesystem::path root_;
    static inline std::filesystem::path dir_;
};

}  // namespace

TEST_F(MiniProbes, TwoPerAbilityGivesTwenty) {
    Workspace ws(mini::config());
    const auto out = root_ / "probes";
    const auto probes = ws.probe(dir_ / "conversation.jsonl", dir_ / "plan.json",
                                 {kAllAbilities.begin(), kAllAbilities.end()}, 2, out);
    ASSERT_EQ(probes.size(), 20u);
    std::map<MemoryAbility, int> per;
    for (const auto& p : probes) ++per[p.ability];
    EXPECT_EQ(per.size(), 10u);
    for (const auto& [a, n] : per) EXPECT_EQ(n, 2) << to_string(a);

    const auto reloaded = load_probes(out);
    EXPECT_EQ(reloaded.size(), 20u);
    for (auto a : kAllAbilities) EXPECT_TRUE(std::filesystem::exists(out / (std::string(to_string(a)) + ".json")));

    const auto conv = load_conversation(dir_ / "conversation.jsonl");
    for (const auto& p : reloaded) {
        EXPECT_TRUE(validate_probe(p, conv.turns.size()).empty()) << p.id;
        EXPECT_EQ(p.review_status, ReviewStatus::Unreviewed);
        if (auto names = source_group_names(p.ability)) {
            ASSERT_TRUE(p.source_turn_ids.grouped) << p.id;
            ASSERT_EQ(p.source_turn_ids.groups.size(), 2u);
            EXPECT_EQ(p.source_turn_ids.groups[0].first, names->first);
            EXPECT_EQ(p.source_turn_ids.groups[1].first, names->second);
        }
        EXPECT_EQ(p.source_turn_ids.all().empty(), p.ability == MemoryAbility::Abstention) << p.id;
    }
}

TEST_F(MiniProbes, CapLimitsPerAbility) {
    Workspace ws(mini::config());
    const auto probes = ws.probe(dir_ / "conversation.jsonl", dir_ / "plan.json",
                                 {kAllAbilities.begin(), kAllAbilities.end()}, 1, root_ / "probes_cap1");
    EXPECT_EQ(probes.size(), 10u);
    const auto some = ws.probe(dir_ / "conversation.jsonl", dir_ / "plan.json",
                               {MemoryAbility::KnowledgeUpdate, MemoryAbility::Summarization}, 2, root_ / "probes_two");
    EXPECT_EQ(some.size(), 4u);
}

TEST_F(MiniProbes, CandidatesFollowAbilityRules) {
    const auto p = plans();
    for (auto a : kAllAbilities) {
        const auto cands = select_probe_candidates(p, a);
        ASSERT_FALSE(cands.empty()) << to_string(a);
        for (const auto& c : cands) {
            EXPECT_EQ(c.ability, a);
            for (const auto& r : c.bullet_refs) {
                const auto& b = resolve(p, r);
                if (a == MemoryAbility::KnowledgeUpdate && &r == &c.bullet_refs.back()) {
                    EXPECT_EQ(b.kind, BulletKind::Update);
                }
                if (a == MemoryAbility::InstructionFollowing) {
                    EXPECT_EQ(b.kind, BulletKind::Instruction);
                }
            }
        }
    }
    EXPECT_TRUE(select_probe_candidates(p, MemoryAbility::Abstention)[0].bullet_refs.empty());
}

TEST_F(MiniProbes, AbilityWithoutAlignedTurnsIsSkipped) {
    auto p = plans();
    for (auto& sp : p[0].sub_plans) {
        for (auto& b : sp.bullets) b.turn_ids.clear();
    }
    try {
        select_probe_candidates(p, MemoryAbility::InformationExtraction);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyCandidates);
    }
    Workspace ws(mini::config());
    ProbeGenerator gen(ws.gateway("probe"));
    const auto conv = load_conversation(dir_ / "conversation.jsonl");
    const auto probes =
        gen.generate_probes(conv, p, {MemoryAbility::InformationExtraction, MemoryAbility::Abstention}, 2);
    ASSERT_EQ(probes.size(), 2u);
    EXPECT_EQ(probes[0].ability, MemoryAbility::Abstention);
}

TEST(ProbeParsing, RejectsIncompleteProbes) {
    EXPECT_THROW(parse_probe(R"({"question": "", "rubric": ["x"]})", MemoryAbility::Summarization), Error);
    EXPECT_THROW(parse_probe(R"({"question": "q", "rubric": []})", MemoryAbility::Summarization), Error);
    EXPECT_THROW(parse_probe(R"({"question": "q", "ordered_events": ["a"]})", MemoryAbility::EventOrdering), Error);
    const auto p = parse_probe(R"(Here: {"question": "q", "ideal_answer": "a", "rubric": ["LLM response should state: a"],
                                       "review_status": "accepted"})",
                               MemoryAbility::InformationExtraction);
    EXPECT_EQ(p.rubric.size(), 1u);
    EXPECT_EQ(p.ability, MemoryAbility::InformationExtraction);
}

TEST(ProbeSelection, SkipsRejectedAndCaps) {
    std::vector<ProbeQuestion> probes(5);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        probes[i].id = "p" + std::to_string(i);
        probes[i].ability = MemoryAbility::Summarization;
    }
    probes[0].review_status = ReviewStatus::Rejected;
    const auto kept = select_for_evaluation(probes, 2);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].id, "p1");
    EXPECT_EQ(kept[1].id, "p2");
}
