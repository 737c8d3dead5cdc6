#pragma once

// Offline providers: a scripted mock driven by prompt matchers, a function
// adapter for tests, and a recorder that captures wire-format requests.

#include "memlab/gateway.hpp"
#include "memlab/io.hpp"

#include <mutex>
#include <regex>

namespace memlab {

// One script line: when the matcher hits the rendered prompt, emit the next
// response in `responses` (the last one repeats). Special responses:
//   "!rate_limited", "!transport", "!malformed"  -> fail the attempt
//   "{{prompt}}" anywhere in the text           -> replaced by the rendered prompt
struct ScriptEntry {
    std::string match;               // substring; "*" matches everything
    std::optional<std::string> regex;  // ECMAScript, searched anywhere in the prompt
    std::vector<std::string> responses;
};

class ScriptedProvider final : public Provider {
public:
    explicit ScriptedProvider(std::vector<ScriptEntry> entries) : entries_(std::move(entries)) {
        bool has_catch_all = false;
        for (const auto& e : entries_) {
            if (e.responses.empty()) throw Error(ErrorCode::Config, "script entry without responses");
            if (e.match == "*" && !e.regex) has_catch_all = true;
            compiled_.push_back(e.regex ? std::optional<std::regex>(std::regex(*e.regex)) : std::nullopt);
        }
        if (!has_catch_all) throw Error(ErrorCode::Config, "mock script needs a catch-all \"*\" entry");
        cursors_.assign(entries_.size(), 0);
    }

    static std::vector<ScriptEntry> parse_entries(const json& j) {
        const json& list = j.is_object() ? j.at("entries") : j;
        std::vector<ScriptEntry> entries;
        for (const auto& item : list) {
            ScriptEntry e;
            e.match = item.value("match", item.contains("regex") ? "" : "*");
            if (item.contains("regex")) e.regex = item.at("regex").get<std::string>();
            if (item.contains("responses")) {
                e.responses = item.at("responses").get<std::vector<std::string>>();
            } else {
                e.responses.push_back(item.at("response").get<std::string>());
            }
            entries.push_back(std::move(e));
        }
        return entries;
    }

    static ScriptedProvider from_json(const json& j) { return ScriptedProvider(parse_entries(j)); }

    static std::shared_ptr<ScriptedProvider> from_file(const std::filesystem::path& path) {
        return std::make_shared<ScriptedProvider>(parse_entries(read_json(path)));
    }

    GenerationResponse complete(const GenerationRequest& req) override {
        const auto prompt = rendered_prompt(req);
        std::string chosen;
        {
            std::lock_guard lock(mutex_);
            for (std::size_t i = 0; i < entries_.size(); ++i) {
                if (!matches(i, prompt)) continue;
                auto& cursor = cursors_[i];
                const auto& responses = entries_[i].responses;
                chosen = responses[std::min(cursor, responses.size() - 1)];
                if (cursor < responses.size()) ++cursor;
                break;
            }
        }
        if (chosen == "!rate_limited") throw Error(ErrorCode::RateLimited, "scripted rate limit");
        if (chosen == "!transport") throw Error(ErrorCode::Transport, "scripted transport failure");
        if (chosen == "!malformed") throw Error(ErrorCode::Malformed, "scripted malformed response");
        for (auto pos = chosen.find("{{prompt}}"); pos != std::string::npos; pos = chosen.find("{{prompt}}", pos)) {
            chosen.replace(pos, 10, prompt);
            pos += prompt.size();
        }
        GenerationResponse resp;
        resp.prompt_tokens = static_cast<long>(approx_token_count(prompt));
        resp.completion_tokens = static_cast<long>(approx_token_count(chosen));
        resp.text = std::move(chosen);
        return resp;
    }

private:
    bool matches(std::size_t i, const std::string& prompt) const {
        if (compiled_[i]) return std::regex_search(prompt, *compiled_[i]);
        const auto& m = entries_[i].match;
        return m == "*" || prompt.find(m) != std::string::npos;
    }

    std::vector<ScriptEntry> entries_;
    std::vector<std::optional<std::regex>> compiled_;
    std::vector<std::size_t> cursors_;
    std::mutex mutex_;
};

class FunctionProvider final : public Provider {
public:
    using Fn = std::function<std::string(const GenerationRequest&)>;
    explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}

    GenerationResponse complete(const GenerationRequest& req) override {
        GenerationResponse r;
        r.text = fn_(req);
        r.prompt_tokens = static_cast<long>(approx_token_count(rendered_prompt(req)));
        r.completion_tokens = static_cast<long>(approx_token_count(r.text));
        return r;
    }

private:
    Fn fn_;
};

// Serializes every attempted request to its wire body before delegating.
class RecordingProvider final : public Provider {
public:
    explicit RecordingProvider(std::shared_ptr<Provider> inner) : inner_(std::move(inner)) {}

    GenerationResponse complete(const GenerationRequest& req) override {
        {
            std::lock_guard lock(mutex_);
            bodies_.push_back(to_wire_json(req));
        }
        return inner_->complete(req);
    }

    std::vector<json> bodies() const {
        std::lock_guard lock(mutex_);
        return bodies_;
    }

private:
    std::shared_ptr<Provider> inner_;
    mutable std::mutex mutex_;
    std::vector<json> bodies_;
};

}  // namespace memlab
