#include "memlab/orchestrator.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace memlab;

namespace {

const std::vector<std::string> kUserLines = {
    "My budget for the flat is $60,000.",   "I like gardens with old trees.",
    "My sister Ana lives in Porto.",        "The viewing is on 2024-03-25.",
    "Please keep answers short.",           "I cycle to work every day.",
    "The bank offered a 4% mortgage rate.", "We adopted a cat named Miso.",
};

std::string user_line(const std::string& prompt, const std::string& header) {
    return oracle::between(prompt, header + "\nUser: ", "\n");
}

std::shared_ptr<Gateway> scripted_gateway() {
    auto provider = std::make_shared<FunctionProvider>([](const GenerationRequest& req) -> std::string {
        const auto p = rendered_prompt(req);
        if (p.find("[[task: kv_extraction]]") != std::string::npos) {
            const auto u = user_line(p, "### Exchange");
            if (u.find("cat named") != std::string::npos) return "nothing to index";
            return "fact: " + u + "\nSUMMARY: " + u;
        }
        if (p.find("[[task: scratchpad_notes]]") != std::string::npos) {
            return "NOTES: " + user_line(p, "### Current exchange");
        }
        if (p.find("[[task: noise_filter]]") != std::string::npos) {
            return oracle::between(p, "### Chunk\n", "\n\n").find("budget") != std::string::npos ? "yes" : "no";
        }
        return "You set aside $60,000.";
    });
    return std::make_shared<Gateway>(provider, RetryPolicy{0, {}}, 4);
}

Conversation conversation() {
    Conversation c;
    c.id = "orch";
    for (const auto& line : kUserLines) {
        c.append(Role::User, line);
        c.append(Role::Assistant, "Thanks, noted.");
    }
    return c;
}

OrchestratorSettings settings(std::size_t z) {
    OrchestratorSettings s;
    s.z = z;
    return s;
}

std::map<std::string, std::string> by_title(const std::vector<PromptSection>& sections) {
    std::map<std::string, std::string> out;
    for (const auto& s : sections) out[s.title] = s.body;
    return out;
}

std::set<std::string> changed_sections(const std::vector<PromptSection>& a, const std::vector<PromptSection>& b) {
    const auto x = by_title(a), y = by_title(b);
    std::set<std::string> out;
    for (const auto& [t, body] : x) {
        if (!y.count(t) || y.at(t) != body) out.insert(t);
    }
    for (const auto& [t, _] : y) {
        if (!x.count(t)) out.insert(t);
    }
    return out;
}

}  // namespace

TEST(Orchestrator, IngestBuildsAllThreeMemories) {
    MemoryOrchestrator orch(scripted_gateway(), std::make_shared<HashEmbedder>(64), settings(3));
    orch.ingest_conversation(conversation());
    EXPECT_EQ(orch.last_pair_index(), 7);
    EXPECT_EQ(orch.partial_ingests(), 1);  // the cat exchange has no extractable keys
    EXPECT_EQ(orch.episodic().index().size(), 14u);
    const auto window = orch.working_window();
    ASSERT_EQ(window.size(), 3u);
    EXPECT_EQ(window.front().pair_index(), 5);
    EXPECT_NE(orch.scratchpad().notes.find("[exchange 7]\nWe adopted a cat named Miso."), std::string::npos);

    const auto pairs = group_exchanges(conversation());
    try {
        orch.ingest(pairs[7]);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonMonotonicIngest);
    }
    EXPECT_THROW(MemoryOrchestrator(scripted_gateway(), std::make_shared<HashEmbedder>(8), settings(0)), Error);
}

TEST(Orchestrator, PromptSectionsInFixedOrder) {
    MemoryOrchestrator orch(scripted_gateway(), std::make_shared<HashEmbedder>(64), settings(3));
    orch.ingest_conversation(conversation());
    const auto req = orch.answer_request(orch.compose("What is my budget?", 2, {}));
    const auto prompt = rendered_prompt(req);
    const auto a = prompt.find("### Scratchpad notes"), b = prompt.find("### Retrieved conversation segments"),
               c = prompt.find("### Most recent conversation"), d = prompt.find("### Question\nWhat is my budget?");
    ASSERT_NE(d, std::string::npos);
    EXPECT_LT(a, b);
    EXPECT_LT(b, c);
    EXPECT_LT(c, d);
    EXPECT_NE(prompt.find("[segment 1, exchange 0]"), std::string::npos);
    EXPECT_EQ(orch.answer("What is my budget?", 2, {}), "You set aside $60,000.");
}

TEST(Orchestrator, EachAblationChangesExactlyOneSection) {
    MemoryOrchestrator orch(scripted_gateway(), std::make_shared<HashEmbedder>(64), settings(3));
    orch.ingest_conversation(conversation());
    const std::string q = "What is my budget?";
    const auto base = answer_sections(orch.compose(q, 5, {}));
    ASSERT_EQ(base.size(), 4u);

    const std::vector<std::pair<AblationConfig, std::string_view>> cases = {
        {{false, true, true, true}, kEpisodicSection},
        {{true, false, true, true}, kScratchSection},
        {{true, true, false, true}, kWorkingSection},
        {{true, true, true, false}, kScratchSection},
    };
    for (const auto& [ab, expected] : cases) {
        const auto changed = changed_sections(base, answer_sections(orch.compose(q, 5, ab)));
        EXPECT_EQ(changed, (std::set<std::string>{std::string(expected)}));
    }
    const auto unfiltered = by_title(answer_sections(orch.compose(q, 5, {true, true, true, false})));
    EXPECT_EQ(unfiltered.at(std::string(kScratchSection)), orch.scratchpad().notes);
}

TEST(Orchestrator, SaveAndLoadReproduceContext) {
    const auto dir = std::filesystem::temp_directory_path() / "memlab_orch_test";
    std::filesystem::remove_all(dir);
    auto gw = scripted_gateway();
    auto emb = std::make_shared<HashEmbedder>(64);
    MemoryOrchestrator orch(gw, emb, settings(3));
    orch.ingest_conversation(conversation());
    orch.save(dir);

    const auto back = MemoryOrchestrator::load(dir, gw, emb, settings(3));
    EXPECT_EQ(back.last_pair_index(), 7);
    EXPECT_EQ(back.partial_ingests(), 1);
    const auto q = "Where does my sister live?";
    const auto a = answer_sections(orch.compose(q, 4, {})), b = answer_sections(back.compose(q, 4, {}));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].title, b[i].title);
        EXPECT_EQ(a[i].body, b[i].body);
    }

    // A smaller window on load keeps only the most recent pairs.
    const auto narrow = MemoryOrchestrator::load(dir, gw, emb, settings(1));
    ASSERT_EQ(narrow.working_window().size(), 1u);
    EXPECT_EQ(narrow.working_window()[0].pair_index(), 7);
    std::filesystem::remove_all(dir);
}
