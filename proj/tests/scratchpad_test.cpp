#include "memlab/scratchpad.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace memlab;

namespace {

// Embeds a sentence as the basis vector of its first word, so sentences on
// the same topic coincide and topic changes are at distance 1.
class TopicEmbedder final : public EmbeddingProvider {
public:
    std::size_t dimension() const override { return 8; }
    Embedding embed(std::string_view text) override {
        const auto word = to_lower(text.substr(0, text.find(' ')));
        auto [it, _] = slots_.try_emplace(word, slots_.size() % 8);
        Embedding v(8, 0.0f);
        v[it->second] = 1.0f;
        return v;
    }

private:
    std::map<std::string, std::size_t> slots_;
};

std::shared_ptr<Gateway> gateway_of(FunctionProvider::Fn fn) {
    return std::make_shared<Gateway>(std::make_shared<FunctionProvider>(std::move(fn)), RetryPolicy{0, {}}, 4);
}

Scratchpad pad_of_tokens(std::size_t tokens) {
    Scratchpad pad;
    pad.notes = std::string(tokens * 4, 'x');
    pad.token_count = approx_token_count(pad.notes);
    return pad;
}

const std::string kTopics = "Alpha one. Alpha two. Alpha three. Beta one. Beta two. Beta three.";

}  // namespace

TEST(Scratchpad, ParseNotesAndMerge) {
    EXPECT_EQ(parse_notes("NOTES: likes tea"), "likes tea");
    EXPECT_EQ(parse_notes("Notes: (none)"), "");
    EXPECT_EQ(parse_notes("  none "), "");
    auto pad = merge({}, "first", "exchange 0");
    pad = merge(pad, "  ", "exchange 1");
    pad = merge(pad, "second", "exchange 2");
    EXPECT_EQ(pad.notes, "[exchange 0]\nfirst\n\n[exchange 2]\nsecond");
    EXPECT_EQ(pad.token_count, approx_token_count(pad.notes));
}

TEST(Scratchpad, CompressesOnlyAboveThreshold) {
    int calls = 0;
    ScratchpadMemory mem(gateway_of([&](const GenerationRequest&) {
                             ++calls;
                             return std::string(80'000, 'y');  // 20,000 tokens, over target
                         }),
                         std::make_shared<HashEmbedder>(16));
    const auto same = mem.maybe_compress(pad_of_tokens(30'000));
    EXPECT_EQ(calls, 0);
    EXPECT_EQ(same.compressions_performed, 0);

    const auto out = mem.maybe_compress(pad_of_tokens(30'001));
    EXPECT_EQ(calls, 1);
    EXPECT_EQ(out.compressions_performed, 1);
    EXPECT_LE(out.token_count, 15'000u);
    EXPECT_EQ(out.token_count, approx_token_count(out.notes));
    EXPECT_FALSE(out.degraded);
}

TEST(Scratchpad, FailedCompressionKeepsRecentTail) {
    ScratchpadMemory mem(gateway_of([](const GenerationRequest&) -> std::string {
                             throw Error(ErrorCode::Malformed, "bad");
                         }),
                         std::make_shared<HashEmbedder>(16));
    auto pad = pad_of_tokens(31'000);
    pad.notes += "END";
    pad.token_count = approx_token_count(pad.notes);
    const auto out = mem.maybe_compress(pad);
    EXPECT_TRUE(out.degraded);
    EXPECT_LE(out.token_count, 15'000u);
    EXPECT_GE(out.token_count, 14'999u);
    EXPECT_EQ(out.notes.substr(out.notes.size() - 3), "END");
}

TEST(Scratchpad, SentencesConcatenateToInput) {
    EXPECT_EQ(split_sentences(kTopics).size(), 6u);
    const auto s = split_sentences("Really?! Yes... ok\nnext line\n\nend");
    ASSERT_EQ(s.size(), 5u);
    EXPECT_EQ(s[0], "Really?! ");
    EXPECT_EQ(s[1], "Yes... ");
    EXPECT_EQ(s[2], "ok\n");
    EXPECT_EQ(s[3], "next line\n\n");

    std::mt19937_64 rng(21);
    const std::vector<std::string> parts = {"word", " ", ".", "!", "?", "\n", "  ", "3.5", "e.g."};
    for (int t = 0; t < 300; ++t) {
        std::string text;
        for (int i = 0; i < 30; ++i) text += parts[rng() % parts.size()];
        std::string joined;
        for (auto p : split_sentences(text)) {
            EXPECT_FALSE(p.empty());
            joined += p;
        }
        EXPECT_EQ(joined, text);
    }
}

TEST(Scratchpad, PercentileIsLinear) {
    EXPECT_DOUBLE_EQ(percentile({0, 0, 1, 0, 0}, 95), 0.8);
    EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
    EXPECT_DOUBLE_EQ(percentile({}, 95), 0.0);
}

TEST(Scratchpad, ChunksBreakAtTopicChanges) {
    TopicEmbedder emb;
    const auto chunks = semantic_chunk(kTopics, emb);
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0].text, "Alpha one. Alpha two. Alpha three. ");
    EXPECT_EQ(chunks[1].text, "Beta one. Beta two. Beta three.");
    EXPECT_EQ(chunks[1].start_sentence, 3u);
    EXPECT_EQ(chunks[1].start_offset, chunks[0].end_offset);
}

TEST(Scratchpad, ChunksRespectSizeLimitsAndCoverText) {
    TopicEmbedder emb;
    ScratchpadConfig cfg;
    cfg.max_chunk_tokens = 5;
    const std::string text = kTopics + " Gamma " + std::string(60, 'z') + ". Delta end.";
    const auto chunks = semantic_chunk(text, emb, cfg);
    std::string joined;
    for (const auto& c : chunks) {
        EXPECT_LE(approx_token_count(c.text), 5u) << c.text;
        EXPECT_EQ(text.substr(c.start_offset, c.end_offset - c.start_offset), c.text);
        joined += c.text;
    }
    EXPECT_EQ(joined, text);

    // Single-sentence topics merge forward to reach two sentences.
    const auto merged = semantic_chunk("Alpha a. Beta b. Gamma c. Delta d.", emb);
    for (const auto& c : merged) EXPECT_GE(c.end_sentence - c.start_sentence, 2u);
}

TEST(Scratchpad, FilterKeepsRelevantAndUnparseableChunks) {
    auto gw = gateway_of([](const GenerationRequest& req) -> std::string {
        const auto chunk = oracle::between(rendered_prompt(req), "### Chunk\n", "\n\n");
        if (chunk.find("Alpha") != std::string::npos) return "Yes";
        if (chunk.find("Beta") != std::string::npos) return "No";
        return "perhaps";
    });
    ScratchpadConfig cfg;
    cfg.breakpoint_percentile = 80.0;  // two topic changes among few sentences
    ScratchpadMemory mem(gw, std::make_shared<TopicEmbedder>(), {}, cfg);
    Scratchpad pad;
    pad.notes = kTopics;
    auto r = mem.filter_for_query(pad, "What about alpha?");
    EXPECT_EQ(r.retained, "Alpha one. Alpha two. Alpha three. ");
    EXPECT_EQ(r.kept, (std::vector<std::size_t>{0}));
    EXPECT_EQ(r.unparseable, 0u);

    pad.notes = kTopics + " Gamma one. Gamma two. Gamma three.";
    r = mem.filter_for_query(pad, "q");
    EXPECT_EQ(r.kept, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(r.unparseable, 1u);
}

TEST(Scratchpad, SaveAndLoad) {
    const auto dir = std::filesystem::temp_directory_path() / "memlab_scratch_test";
    std::filesystem::remove_all(dir);
    Scratchpad pad = merge({}, "likes tea");
    pad.compressions_performed = 2;
    pad.degraded = true;
    save_scratchpad(dir, pad);
    const auto back = load_scratchpad(dir);
    EXPECT_EQ(back.notes, pad.notes);
    EXPECT_EQ(back.token_count, pad.token_count);
    EXPECT_EQ(back.compressions_performed, 2);
    EXPECT_TRUE(back.degraded);
    std::filesystem::remove_all(dir);
}
