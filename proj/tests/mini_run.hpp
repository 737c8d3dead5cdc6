#pragma once

// Helpers for driving the mini fixture through the workspace offline.

#include "memlab/workspace.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sys/wait.h>

namespace mini {

using namespace memlab;

inline std::filesystem::path fixtures() { return std::filesystem::path(MEMLAB_FIXTURES); }

inline RunConfig config() { return load_run_config(fixtures() / "mini" / "config.json"); }

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("memlab_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct Overrides {
    int questions_per_call = 0;     // 0 keeps the script's question reply
    std::string detector_reply;     // empty keeps the script's yes
    std::shared_ptr<Provider> wrap;  // if set, receives every call instead of the script
};

// The mock script provider, with question generation and the two dialogue
// detectors optionally replaced.
inline ProviderFactory provider_factory(Overrides o) {
    return [o](const ProviderSpec& spec) -> std::shared_ptr<Provider> {
        std::shared_ptr<Provider> base = o.wrap ? o.wrap : make_offline_provider(spec);
        return std::make_shared<FunctionProvider>([base, o](const GenerationRequest& req) -> std::string {
            const auto prompt = rendered_prompt(req);
            if (o.questions_per_call > 0 && prompt.rfind("[[task: question_generation_", 0) == 0) {
                std::string out;
                for (int i = 0; i < o.questions_per_call; ++i) {
                    out += "QUESTION:\nCould you help me with step " + std::to_string(i + 1) +
                           " of my rental purchase plan?\n";
                }
                return out;
            }
            if (!o.detector_reply.empty() && (prompt.rfind("[[task: detect_question]]", 0) == 0 ||
                                              prompt.rfind("[[task: detect_followup]]", 0) == 0)) {
                return o.detector_reply;
            }
            return base->complete(req).text;
        });
    };
}

// Runs the CLI with the given arguments, stdout and stderr going to `log`.
// Returns the process exit code.
inline int run_cli(const std::string& args, const std::filesystem::path& log) {
    const std::string cmd = std::string("\"") + MEMLAB_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string quoted(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

struct PipelineResult {
    std::vector<int> exit_codes;  // synthesize, probe, ingest, answer, evaluate, report
    std::filesystem::path workspace;

    bool ok() const {
        return exit_codes.size() == 6 && std::all_of(exit_codes.begin(), exit_codes.end(), [](int c) { return c == 0; });
    }
};

// synthesize -> probe -> ingest -> answer -> evaluate -> report, all under
// root/ws. Logs go to root/logs so the workspace holds only outputs.
inline PipelineResult run_pipeline(const std::filesystem::path& root,
                                   const std::filesystem::path& cfg = fixtures() / "mini" / "config.json") {
    PipelineResult r;
    r.workspace = root / "ws";
    const auto logs = root / "logs";
    std::filesystem::create_directories(logs);
    const auto conv_dir = r.workspace / "mini-general";
    const auto c = " --config " + quoted(cfg);
    const std::vector<std::pair<std::string, std::string>> steps = {
        {"synthesize", "synthesize" + c + " --out " + quoted(r.workspace)},
        {"probe", "probe" + c + " --conversation " + quoted(conv_dir / "conversation.jsonl") + " --plan " +
                      quoted(conv_dir / "plan.json")},
        {"ingest", "ingest" + c + " --conversation " + quoted(conv_dir / "conversation.jsonl") + " --store " +
                       quoted(conv_dir / "store")},
        {"answer", "answer" + c + " --probes " + quoted(conv_dir / "probes") + " --store " + quoted(conv_dir / "store")},
        {"evaluate", "evaluate" + c + " --probes " + quoted(conv_dir / "probes") + " --answers " +
                         quoted(conv_dir / "answers.jsonl")},
        {"report", "report --in " + quoted(r.workspace) + " --format md"},
    };
    for (const auto& [name, args] : steps) {
        r.exit_codes.push_back(run_cli(args, logs / (name + ".log")));
        if (r.exit_codes.back() != 0) break;
    }
    return r;
}

// Relative path -> file contents for every regular file under dir.
inline std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).generic_string()] = read_file(e.path());
    }
    return out;
}

}  // namespace mini
