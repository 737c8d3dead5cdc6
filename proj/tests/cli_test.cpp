#include "mini_run.hpp"

#include <gtest/gtest.h>

using namespace memlab;

namespace {

std::filesystem::path config_path(const std::string& name = "config.json") { return mini::fixtures() / "mini" / name; }

}  // namespace

TEST(Cli, FullPipelineSucceedsAndIsDeterministic) {
    const auto a = mini::scratch_dir("cli_run_a");
    const auto b = mini::scratch_dir("cli_run_b");
    const auto ra = mini::run_pipeline(a);
    ASSERT_TRUE(ra.ok()) << read_file(a / "logs" / "synthesize.log");
    const auto rb = mini::run_pipeline(b);
    ASSERT_TRUE(rb.ok());

    const auto ta = mini::snapshot_tree(ra.workspace), tb = mini::snapshot_tree(rb.workspace);
    EXPECT_EQ(ta.size(), tb.size());
    for (const auto& [path, content] : ta) {
        ASSERT_TRUE(tb.count(path)) << path;
        EXPECT_EQ(content, tb.at(path)) << path;
    }
    ASSERT_TRUE(ta.count("report.md"));
    ASSERT_TRUE(ta.count("mini-general/scores.jsonl"));
    EXPECT_EQ(read_jsonl(ra.workspace / "mini-general" / "scores.jsonl").size(), 20u);
    EXPECT_NE(read_file(a / "logs" / "report.log").find("| **Average** |"), std::string::npos);
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST(Cli, SingleQuestionAndAblationFlags) {
    const auto root = mini::scratch_dir("cli_question");
    const auto r = mini::run_pipeline(root);
    ASSERT_TRUE(r.ok());
    const auto store = r.workspace / "mini-general" / "store";
    const auto log = root / "q.log";
    EXPECT_EQ(mini::run_cli("answer --config " + mini::quoted(config_path()) + " --store " + mini::quoted(store) +
                                " --question \"What is my budget?\" --k 5 --z 2 --no-filter",
                            log),
              0);
    EXPECT_FALSE(trim(read_file(log)).empty());

    const auto out = root / "ablated.jsonl";
    EXPECT_EQ(mini::run_cli("answer --config " + mini::quoted(config_path()) + " --store " + mini::quoted(store) +
                                " --probes " + mini::quoted(r.workspace / "mini-general" / "probes") +
                                " --no-scratchpad --out " + mini::quoted(out),
                            log),
              0);
    const auto rows = read_jsonl(out);
    ASSERT_EQ(rows.size(), 20u);
    EXPECT_EQ(rows[0].at("method"), "light-no_scratchpad");
    std::filesystem::remove_all(root);
}

TEST(Cli, ConfigurationErrorsExitTwo) {
    const auto root = mini::scratch_dir("cli_config");
    const auto log = root / "out.log";
    ::unsetenv("MEMLAB_TEST_MISSING_KEY");
    EXPECT_EQ(mini::run_cli("synthesize --config " + mini::quoted(config_path("config_openai.json")) + " --out " +
                                mini::quoted(root),
                            log),
              2);
    EXPECT_NE(read_file(log).find("MEMLAB_TEST_MISSING_KEY"), std::string::npos);
    EXPECT_EQ(mini::run_cli("synthesize --config " + mini::quoted(root / "missing.json"), log), 2);
    EXPECT_EQ(mini::run_cli("", log), 2);
    EXPECT_EQ(mini::run_cli("synthesize --bogus", log), 2);
    EXPECT_EQ(mini::run_cli("synthesize --config " + mini::quoted(config_path()) + " --length 2m", log), 2);
    EXPECT_EQ(mini::run_cli("answer --config " + mini::quoted(config_path()) + " --store " + mini::quoted(root), log), 2);

    write_json(root / "bad.json", json{{"conversation_id", "x"}, {"unknown_key", 1}});
    EXPECT_EQ(mini::run_cli("synthesize --config " + mini::quoted(root / "bad.json"), log), 2);
    EXPECT_NE(read_file(log).find("unknown_key"), std::string::npos);
    std::filesystem::remove_all(root);
}

TEST(Cli, RuntimeFailuresExitThree) {
    const auto root = mini::scratch_dir("cli_runtime");
    const auto log = root / "out.log";
    write_file(root / "broken.jsonl", "{\"index\": 0, \"role\": \"user\", \"content\": \"hi\"}\nnot json\n");
    EXPECT_EQ(mini::run_cli("ingest --config " + mini::quoted(config_path()) + " --conversation " +
                                mini::quoted(root / "broken.jsonl") + " --store " + mini::quoted(root / "store"),
                            log),
              3);
    EXPECT_EQ(mini::run_cli("report --in " + mini::quoted(root), log), 3);  // no scores anywhere
    std::filesystem::remove_all(root);
}
