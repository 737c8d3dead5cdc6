#include "memlab/io.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace memlab;

namespace {

std::size_t code_points(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

Conversation make_conversation(int pairs) {
    Conversation c;
    c.id = "c";
    for (int i = 0; i < pairs; ++i) {
        c.append(Role::User, "question " + std::to_string(i));
        c.append(Role::Assistant, "answer " + std::to_string(i));
    }
    return c;
}

}  // namespace

TEST(Tokenizer, CeilOfCodePointsOverFour) {
    EXPECT_EQ(approx_token_count(""), 0u);
    EXPECT_EQ(approx_token_count("abcd"), 1u);
    EXPECT_EQ(approx_token_count("abcde"), 2u);
    EXPECT_EQ(approx_token_count("\xC3\xA9\xC3\xA9\xC3\xA9\xC3\xA9"), 1u);  // four 2-byte code points

    std::mt19937_64 rng(11);
    const std::vector<std::string> alphabet = {"a", " ", "\xC3\xBC", "\xE2\x82\xAC", "\xF0\x9F\x99\x82", "z"};
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        const auto len = rng() % 40;
        for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
        EXPECT_EQ(approx_token_count(s), (code_points(s) + 3) / 4) << s;
    }
}

TEST(Tokenizer, PrefixNeverCountsMore) {
    const std::string s = "The quick brown fox jumps over the lazy dog";
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_LE(approx_token_count(s.substr(0, i)), approx_token_count(s));
}

TEST(Conversation, AppendFillsIndexAndTokens) {
    auto c = make_conversation(3);
    ASSERT_EQ(c.turns.size(), 6u);
    for (std::size_t i = 0; i < c.turns.size(); ++i) {
        EXPECT_EQ(c.turns[i].index, static_cast<int>(i));
        EXPECT_EQ(c.turns[i].token_count, approx_token_count(c.turns[i].content));
    }
    const auto tok = default_tokenizer();
    EXPECT_TRUE(validate_conversation(c, &tok).empty());
}

TEST(Conversation, ValidationReportsEachProblem) {
    auto c = make_conversation(2);
    c.turns[2].role = Role::Assistant;
    c.turns[3].index = 9;
    c.turns[1].content = "   ";
    const auto v = validate_conversation(c);
    std::set<std::string> messages;
    for (const auto& x : v) messages.insert(x.message);
    EXPECT_TRUE(messages.count("roles must alternate"));
    EXPECT_TRUE(messages.count("content must be non-empty"));
    EXPECT_TRUE(messages.count("index 9 does not match position 3"));

    Conversation starts_wrong;
    starts_wrong.append(Role::Assistant, "hello");
    ASSERT_FALSE(validate_conversation(starts_wrong).empty());
    EXPECT_EQ(validate_conversation(starts_wrong).front().message, "must begin with User");
}

TEST(Conversation, TokenCountMismatchIsReportedWhenTokenizerGiven) {
    auto c = make_conversation(1);
    c.turns[0].token_count = 99;
    const auto tok = default_tokenizer();
    EXPECT_TRUE(validate_conversation(c).empty());
    EXPECT_EQ(validate_conversation(c, &tok).size(), 1u);
}

TEST(Conversation, GroupExchangesRequiresEvenTurns) {
    auto c = make_conversation(3);
    const auto pairs = group_exchanges(c);
    ASSERT_EQ(pairs.size(), 3u);
    EXPECT_EQ(pairs[2].pair_index(), 2);
    EXPECT_EQ(pairs[1].segment(), "User: question 1\nAssistant: answer 1");
    EXPECT_EQ(flatten(pairs).size(), 6u);

    c.append(Role::User, "dangling");
    try {
        group_exchanges(c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OddTurnCount);
    }
}

TEST(Conversation, JsonlRoundTrip) {
    auto c = make_conversation(4);
    c.turns[3].content = "line one\nline \"two\" \xE2\x82\xAC";
    c.turns[3].token_count = approx_token_count(c.turns[3].content);
    const auto text = conversation_to_jsonl(c);
    const auto back = conversation_from_jsonl(text, "c");
    ASSERT_EQ(back.turns.size(), c.turns.size());
    for (std::size_t i = 0; i < c.turns.size(); ++i) {
        EXPECT_EQ(back.turns[i].content, c.turns[i].content);
        EXPECT_EQ(back.turns[i].role, c.turns[i].role);
        EXPECT_EQ(back.turns[i].index, c.turns[i].index);
    }
    EXPECT_EQ(conversation_to_jsonl(back), text);
}

TEST(Conversation, MalformedLineIsReported) {
    try {
        conversation_from_jsonl("{\"idx\":0,\"role\":\"user\",\"content\":\"hi\"}\nnot json\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Malformed);
    }
}

TEST(Dates, IsoAndFreeText) {
    ASSERT_TRUE(Date::parse_iso("2024-03-25"));
    EXPECT_FALSE(Date::parse_iso("2024-02-30"));
    EXPECT_FALSE(Date::parse_iso("25/03/2024"));
    EXPECT_EQ(find_date("viewing on March 25, 2024 at noon")->iso(), "2024-03-25");
    EXPECT_EQ(find_date("from 27 March 2024 on")->iso(), "2024-03-27");
    EXPECT_EQ(find_date("sometime in June 2024")->iso(), "2024-06-01");
    EXPECT_EQ(find_date("logged 2024-01-09, then March 3, 2024")->iso(), "2024-01-09");
    EXPECT_FALSE(find_date("no dates here"));
    const auto d = *Date::parse_iso("2024-02-28");
    EXPECT_EQ(d.plus_days(1).iso(), "2024-02-29");
    EXPECT_EQ(d.plus_days(2).iso(), "2024-03-01");
}

TEST(Seeds, ValidationAndJson) {
    Seed s;
    s.title = "t";
    s.timeline = {*Date::parse_iso("2024-05-01"), *Date::parse_iso("2024-01-01")};
    EXPECT_EQ(validate_seed(s).size(), 2u);
    s.subtopics = {"a"};
    std::swap(s.timeline.start, s.timeline.end);
    EXPECT_TRUE(validate_seed(s).empty());
    const json j = s;
    EXPECT_EQ(j.at("timeline").at("start"), "2024-01-01");
    const auto back = j.get<Seed>();
    EXPECT_EQ(back.timeline.end.iso(), "2024-05-01");
    const auto flat = json::parse(R"({"title":"x","subtopics":["a"],"start":"2024-01-01","end":"2024-02-01"})").get<Seed>();
    EXPECT_EQ(flat.timeline.end.iso(), "2024-02-01");
}

TEST(Abilities, NamesRoundTrip) {
    std::set<std::string> names;
    for (auto a : kAllAbilities) {
        names.insert(std::string(to_string(a)));
        EXPECT_EQ(parse_ability(to_string(a)), a);
    }
    EXPECT_EQ(names.size(), 10u);
    EXPECT_FALSE(parse_ability("recall"));
}

TEST(Probes, ReferenceShapesLoad) {
    const auto probes = load_probes(std::filesystem::path(MEMLAB_FIXTURES) / "probes");
    ASSERT_EQ(probes.size(), 10u);
    std::map<MemoryAbility, ProbeQuestion> by;
    for (const auto& p : probes) by[p.ability] = p;
    ASSERT_EQ(by.size(), 10u);

    const auto& abst = by.at(MemoryAbility::Abstention);
    EXPECT_EQ(abst.ideal_answer,
              "Based on the provided chat, there is no information related to the specific advice Manuel gave about "
              "property management companies.");
    EXPECT_TRUE(abst.source_turn_ids.all().empty());

    const auto& ku = by.at(MemoryAbility::KnowledgeUpdate);
    EXPECT_EQ(ku.ideal_answer, "$60,000");
    ASSERT_EQ(ku.rubric.size(), 1u);
    EXPECT_EQ(ku.rubric[0].text, "LLM response should state: $60,000");
    ASSERT_TRUE(ku.source_turn_ids.grouped);
    EXPECT_EQ(ku.source_turn_ids.groups[0].first, "original_info");
    EXPECT_EQ(ku.source_turn_ids.groups[1].first, "updated_info");

    const auto& mh = by.at(MemoryAbility::MultiHopReasoning);
    EXPECT_EQ(mh.ideal_answer, "Two banks: Halkbank and Ziraat Bank.");
    EXPECT_EQ(mh.rubric.size(), 3u);

    const auto& tr = by.at(MemoryAbility::TemporalReasoning);
    EXPECT_EQ(tr.rubric[0].text, "LLM response should state: 2 days");
    EXPECT_EQ(tr.source_turn_ids.groups[0].first, "first_event");

    const auto& eo = by.at(MemoryAbility::EventOrdering);
    EXPECT_EQ(eo.ordered_events.size(), 10u);
    EXPECT_EQ(eo.ordered_events[0], "1st: Agent interaction and viewing preparation");

    const auto& sum = by.at(MemoryAbility::Summarization);
    EXPECT_EQ(sum.ideal_answer.rfind("Your journey toward investing", 0), 0u);
    EXPECT_EQ(by.at(MemoryAbility::ContradictionResolution).source_turn_ids.groups[1].first, "second_statement");
}

TEST(Probes, JsonRoundTripKeepsGroups) {
    ProbeQuestion p;
    p.id = "knowledge_update_1";
    p.ability = MemoryAbility::KnowledgeUpdate;
    p.question = "q";
    p.ideal_answer = "a";
    p.rubric = {{"LLM response should state: a"}};
    p.source_turn_ids.grouped = true;
    p.source_turn_ids.groups = {{"original_info", {1, 2}}, {"updated_info", {7}}};
    p.review_status = ReviewStatus::Accepted;
    const auto back = probe_from_json(probe_to_json(p));
    EXPECT_EQ(back.id, p.id);
    EXPECT_EQ(back.ability, p.ability);
    EXPECT_EQ(back.rubric, p.rubric);
    EXPECT_EQ(back.source_turn_ids.groups, p.source_turn_ids.groups);
    EXPECT_EQ(back.review_status, ReviewStatus::Accepted);
    EXPECT_TRUE(validate_probe(back, 8).empty());
    EXPECT_EQ(validate_probe(back, 7).size(), 1u);
}

TEST(Probes, AbilityRequiredWithoutFileName) {
    try {
        probe_from_json(json::parse(R"({"question":"q","rubric":["x"]})"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Malformed);
    }
}

TEST(Io, WriteFileIsAtomicAndCreatesDirectories) {
    const auto dir = std::filesystem::temp_directory_path() / "memlab_io_test";
    std::filesystem::remove_all(dir);
    write_file(dir / "a" / "b.txt", "hello");
    EXPECT_EQ(read_file(dir / "a" / "b.txt"), "hello");
    EXPECT_FALSE(std::filesystem::exists(dir / "a" / "b.txt.tmp"));
    try {
        read_file(dir / "missing");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Io);
    }
    std::filesystem::remove_all(dir);
}

TEST(Io, ExtractJsonSkipsProse) {
    const auto j = extract_json("Sure! Here it is: {\"a\": \"}{\", \"b\": [1, 2]} trailing", '{');
    EXPECT_EQ(j.at("a"), "}{");
    const auto arr = extract_json("text [not json] then [1, 2, 3]", '[');
    EXPECT_EQ(arr.size(), 3u);
    try {
        extract_json("nothing here", '{');
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Malformed);
    }
}
