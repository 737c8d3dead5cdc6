#pragma once

// Composes episodic retrieval, the working-memory window and the filtered
// scratchpad into the final answer call.

#include "memlab/episodic.hpp"
#include "memlab/scratchpad.hpp"

#include <deque>

namespace memlab {

struct AblationConfig {
    bool use_retrieval = true;
    bool use_scratchpad = true;
    bool use_working = true;
    bool use_noise_filter = true;
};

struct OrchestratorSettings {
    CallSettings extract;
    CallSettings notes;
    CallSettings summary;
    CallSettings filter;
    CallSettings answer;
    ScratchpadConfig scratchpad;
    std::size_t z = 5;  // working-memory window, in exchange pairs
};

struct ComposedContext {
    std::optional<std::vector<RetrievedSegment>> episodic;
    std::optional<std::vector<ExchangePair>> working;
    std::optional<std::string> scratch;
    std::string question;
};

struct PromptSection {
    std::string title;
    std::string body;
};

inline constexpr std::string_view kScratchSection = "Scratchpad notes";
inline constexpr std::string_view kEpisodicSection = "Retrieved conversation segments";
inline constexpr std::string_view kWorkingSection = "Most recent conversation";
inline constexpr std::string_view kQuestionSection = "Question";

inline constexpr std::string_view kAnswerSystemPrompt =
    "You are an assistant with memory of a long conversation with this user. Answer the question using the "
    "memory sections provided. If they contain no information about what is asked, say so instead of guessing. "
    "When the user stated conflicting facts, point out the contradiction. Follow any standing instructions and "
    "preferences the user gave.";

// Fixed order: scratchpad, episodic segments, working window, question. Absent
// sections are omitted entirely.
inline std::vector<PromptSection> answer_sections(const ComposedContext& ctx) {
    std::vector<PromptSection> out;
    if (ctx.scratch) out.push_back({std::string(kScratchSection), ctx.scratch->empty() ? "(empty)" : *ctx.scratch});
    if (ctx.episodic) {
        std::string body;
        for (std::size_t i = 0; i < ctx.episodic->size(); ++i) {
            const auto& seg = (*ctx.episodic)[i];
            if (i) body += "\n\n";
            body += "[segment " + std::to_string(i + 1) + ", exchange " + std::to_string(seg.pair_index) + "]\n" +
                    seg.text;
        }
        out.push_back({std::string(kEpisodicSection), body.empty() ? "(none retrieved)" : body});
    }
    if (ctx.working) {
        std::string body;
        for (std::size_t i = 0; i < ctx.working->size(); ++i) {
            if (i) body += "\n\n";
            body += (*ctx.working)[i].segment();
        }
        out.push_back({std::string(kWorkingSection), body.empty() ? "(none)" : body});
    }
    out.push_back({std::string(kQuestionSection), ctx.question});
    return out;
}

inline std::string render_answer_prompt(const ComposedContext& ctx) {
    std::string out = prompts::task_tag("answer");
    for (const auto& s : answer_sections(ctx)) out += prompts::section(s.title, s.body);
    return out;
}

class MemoryOrchestrator {
public:
    MemoryOrchestrator(std::shared_ptr<Gateway> gateway, std::shared_ptr<EmbeddingProvider> embedder,
                       OrchestratorSettings settings = {}, Tokenizer tok = default_tokenizer())
        : gateway_(gateway),
          settings_(std::move(settings)),
          episodic_(gateway, embedder, settings_.extract),
          scratchpad_(gateway, embedder, {settings_.notes, settings_.summary, settings_.filter}, settings_.scratchpad,
                      tok) {
        if (settings_.z == 0) throw Error(ErrorCode::Config, "working-memory window z must be positive");
    }

    void ingest(const ExchangePair& pair) {
        if (pair.assistant_turn.index != pair.user_turn.index + 1) {
            throw Error(ErrorCode::InvalidArgument, "exchange pair turns are not adjacent");
        }
        if (pair.pair_index() <= last_pair_index_) {
            throw Error(ErrorCode::NonMonotonicIngest, "pair " + std::to_string(pair.pair_index()) +
                                                           " after pair " + std::to_string(last_pair_index_));
        }
        try {
            episodic_.index_pair(pair);
        } catch (const Error& e) {
            ++partial_ingests_;
            log_warn("partial ingest of exchange " + std::to_string(pair.pair_index()) +
                     ": episodic indexing failed: " + e.what());
        }
        const ExchangePair* previous = window_.empty() ? nullptr : &window_.back();
        pad_ = scratchpad_.ingest(pad_, pair, previous);
        window_.push_back(pair);
        while (window_.size() > settings_.z) window_.pop_front();
        last_pair_index_ = pair.pair_index();
    }

    void ingest_conversation(const Conversation& conv) {
        for (const auto& pair : group_exchanges(conv)) ingest(pair);
    }

    ComposedContext compose(std::string_view question, std::size_t k, const AblationConfig& ab) const {
        ComposedContext ctx;
        ctx.question = std::string(question);
        if (ab.use_retrieval) ctx.episodic = episodic_.retrieve(question, k);
        if (ab.use_working) ctx.working = std::vector<ExchangePair>(window_.begin(), window_.end());
        if (ab.use_scratchpad) {
            ctx.scratch = ab.use_noise_filter ? scratchpad_.filter_for_query(pad_, question).retained : pad_.notes;
        }
        return ctx;
    }

    GenerationRequest answer_request(const ComposedContext& ctx) const {
        return make_request(settings_.answer, std::string(kAnswerSystemPrompt), render_answer_prompt(ctx));
    }

    std::string answer(std::string_view question, std::size_t k, const AblationConfig& ab) const {
        return gateway_->generate(answer_request(compose(question, k, ab))).text;
    }

    // Long-context pass-through: the whole conversation followed by the question.
    std::string answer_full_context(const Conversation& conv, std::string_view question) const {
        std::string prompt = prompts::task_tag("answer_full_context") +
                             prompts::section("Conversation", prompts::render_turns(conv.turns)) +
                             prompts::section(kQuestionSection, question);
        return gateway_->generate(make_request(settings_.answer, std::string(kAnswerSystemPrompt), prompt)).text;
    }

    const Scratchpad& scratchpad() const { return pad_; }
    const ScratchpadMemory& scratchpad_memory() const { return scratchpad_; }
    const EpisodicMemory& episodic() const { return episodic_; }
    std::vector<ExchangePair> working_window() const { return {window_.begin(), window_.end()}; }
    int last_pair_index() const { return last_pair_index_; }
    int partial_ingests() const { return partial_ingests_; }
    const OrchestratorSettings& settings() const { return settings_; }

    // Layout: index.jsonl, scratchpad.txt, scratchpad.json, working.jsonl, state.json.
    void save(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        write_file(dir / "index.jsonl", episodic_.index().snapshot());
        save_scratchpad(dir, pad_);
        Conversation window;
        for (const auto& p : window_) {
            window.turns.push_back(p.user_turn);
            window.turns.push_back(p.assistant_turn);
        }
        write_file(dir / "working.jsonl", conversation_to_jsonl(window));
        write_json(dir / "state.json", json{{"last_pair_index", last_pair_index_},
                                            {"z", settings_.z},
                                            {"partial_ingests", partial_ingests_}});
    }

    static MemoryOrchestrator load(const std::filesystem::path& dir, std::shared_ptr<Gateway> gateway,
                                   std::shared_ptr<EmbeddingProvider> embedder, OrchestratorSettings settings = {},
                                   Tokenizer tok = default_tokenizer()) {
        MemoryOrchestrator orch(gateway, embedder, settings, tok);
        orch.episodic_ = EpisodicMemory(gateway, embedder, settings.extract,
                                        VectorIndex::from_snapshot(read_file(dir / "index.jsonl")));
        orch.pad_ = load_scratchpad(dir, tok);
        const auto state = read_json(dir / "state.json");
        orch.last_pair_index_ = state.value("last_pair_index", -1);
        orch.partial_ingests_ = state.value("partial_ingests", 0);
        auto window = conversation_from_jsonl(read_file(dir / "working.jsonl"), {}, tok);
        for (auto& p : group_exchanges(window)) orch.window_.push_back(std::move(p));
        while (orch.window_.size() > orch.settings_.z) orch.window_.pop_front();
        return orch;
    }

private:
    std::shared_ptr<Gateway> gateway_;
    OrchestratorSettings settings_;
    EpisodicMemory episodic_;
    ScratchpadMemory scratchpad_;
    Scratchpad pad_;
    std::deque<ExchangePair> window_;
    int last_pair_index_ = -1;
    int partial_ingests_ = 0;
};

}  // namespace memlab
