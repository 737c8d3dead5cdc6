#pragma once

// Every model call goes through Gateway: request validation, retries with
// exponential backoff, a bound on in-flight requests, and call metrics.

#include "memlab/error.hpp"
#include "memlab/text.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

namespace memlab {

enum class MessageRole { System, User, Assistant };

inline std::string_view to_string(MessageRole r) {
    switch (r) {
        case MessageRole::System: return "system";
        case MessageRole::User: return "user";
        case MessageRole::Assistant: return "assistant";
    }
    return "";
}

struct ChatMessage {
    MessageRole role = MessageRole::User;
    std::string content;
};

struct GenerationRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::optional<int> max_output_tokens;
};

struct GenerationResponse {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct ProviderConfig {
    std::string base_url = "https://api.openai.com";
    std::string api_key_env = "MEMLAB_API_KEY";
    std::string model = "gpt-4.1-mini";
    std::chrono::milliseconds timeout{120'000};
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};
};

// Sampling temperatures per kind of call. Synthesis runs slightly warm for
// diversity; everything that answers, judges or extracts runs greedy.
struct Temperatures {
    double answer = 0.0;
    double judge = 0.0;
    double detect = 0.0;
    double extract = 0.0;
    double filter = 0.0;
    double synthesis = 0.1;
};

inline void validate_request(const GenerationRequest& req) {
    if (req.messages.empty()) throw Error(ErrorCode::InvalidArgument, "request has no messages");
    if (!(req.temperature >= 0.0 && req.temperature <= 2.0)) {
        throw Error(ErrorCode::InvalidArgument, "temperature must lie in [0, 2]");
    }
    if (req.max_output_tokens && *req.max_output_tokens <= 0) {
        throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be positive");
    }
    for (const auto& m : req.messages) {
        if (m.role != MessageRole::System && m.content.empty()) {
            throw Error(ErrorCode::InvalidArgument, "user/assistant message content must be non-empty");
        }
    }
}

// The text matchers and echo mocks see: message contents joined by blank lines.
inline std::string rendered_prompt(const GenerationRequest& req) {
    std::string out;
    for (std::size_t i = 0; i < req.messages.size(); ++i) {
        if (i) out += "\n\n";
        out += req.messages[i].content;
    }
    return out;
}

// ---- OpenAI-compatible wire format ----------------------------------------

inline nlohmann::json to_wire_json(const GenerationRequest& req) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) {
        messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    nlohmann::json body{{"model", req.model_id}, {"messages", messages}, {"temperature", req.temperature}};
    if (req.max_output_tokens) body["max_tokens"] = *req.max_output_tokens;
    return body;
}

inline GenerationResponse parse_wire_response(const nlohmann::json& body) {
    try {
        GenerationResponse r;
        const auto& content = body.at("choices").at(0).at("message").at("content");
        r.text = content.is_null() ? std::string{} : content.get<std::string>();
        if (body.contains("usage") && body["usage"].is_object()) {
            r.prompt_tokens = body["usage"].value("prompt_tokens", 0L);
            r.completion_tokens = body["usage"].value("completion_tokens", 0L);
        }
        if (r.prompt_tokens < 0 || r.completion_tokens < 0) {
            throw Error(ErrorCode::Malformed, "negative token usage");
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("chat completion response: ") + e.what());
    }
}

// ---- provider contract ------------------------------------------------------

// A provider performs exactly one attempt. Transient failures are reported as
// Error{Transport} or Error{RateLimited}; the gateway owns retrying.
class Provider {
public:
    virtual ~Provider() = default;
    virtual GenerationResponse complete(const GenerationRequest& req) = 0;
};

// ---- yes/no and 0/0.5/1 parsing -------------------------------------------

enum class Decision { Yes, No };

inline Decision parse_decision(std::string_view text) {
    auto first_line = trim(split_lines(trim(text)).front());
    std::vector<std::string> words;
    std::string word;
    for (char c : first_line) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!word.empty()) {
            words.push_back(std::move(word));
            word.clear();
        }
    }
    if (!word.empty()) words.push_back(std::move(word));
    for (const auto& w : words) {
        if (w == "yes") return Decision::Yes;
        if (w == "no") return Decision::No;
    }
    throw Error(ErrorCode::Unparseable, "expected yes/no, got: " + std::string(first_line.substr(0, 80)));
}

enum class Verdict { Unsatisfied, Partial, Satisfied };

inline double value(Verdict v) {
    switch (v) {
        case Verdict::Unsatisfied: return 0.0;
        case Verdict::Partial: return 0.5;
        case Verdict::Satisfied: return 1.0;
    }
    return 0.0;
}

// First standalone 0, 0.5 or 1 (trailing zeros allowed) wins.
inline Verdict parse_verdict(std::string_view text) {
    std::size_t i = 0;
    auto is_num = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.'; };
    while (i < text.size()) {
        if (!std::isdigit(static_cast<unsigned char>(text[i])) ||
            (i > 0 && (is_num(text[i - 1]) || std::isalpha(static_cast<unsigned char>(text[i - 1]))))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_num(text[j])) ++j;
        std::string token(text.substr(i, j - i));
        while (!token.empty() && token.back() == '.') token.pop_back();
        const bool glued = j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]));
        i = j;
        if (glued || token.empty() || std::count(token.begin(), token.end(), '.') > 1) continue;
        const double v = std::stod(token);
        if (v == 0.0) return Verdict::Unsatisfied;
        if (v == 0.5) return Verdict::Partial;
        if (v == 1.0) return Verdict::Satisfied;
    }
    throw Error(ErrorCode::Unparseable, "expected 0, 0.5 or 1, got: " + std::string(text.substr(0, 80)));
}

// ---- gateway -----------------------------------------------------------------

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};
};

struct GatewayMetrics {
    std::atomic<long> calls{0};
    std::atomic<long> attempts{0};
    std::atomic<long> retries{0};
    std::atomic<long> failures{0};
    std::atomic<long> prompt_tokens{0};
    std::atomic<long> completion_tokens{0};
};

class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit Gateway(std::shared_ptr<Provider> provider, RetryPolicy policy = {}, std::size_t parallelism = 4)
        : provider_(std::move(provider)),
          policy_(policy),
          parallelism_(std::max<std::size_t>(1, parallelism)),
          slots_(std::make_unique<std::counting_semaphore<1024>>(
              static_cast<std::ptrdiff_t>(std::min<std::size_t>(parallelism_, 1024)))),
          sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
        if (!provider_) throw Error(ErrorCode::Config, "gateway requires a provider");
        if (policy_.max_retries < 0) throw Error(ErrorCode::Config, "max_retries must be >= 0");
    }

    void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }
    std::size_t parallelism() const { return parallelism_; }
    const GatewayMetrics& metrics() const { return metrics_; }
    const RetryPolicy& policy() const { return policy_; }

    GenerationResponse generate(const GenerationRequest& req) {
        validate_request(req);
        ++metrics_.calls;
        for (int attempt = 0;; ++attempt) {
            ++metrics_.attempts;
            try {
                slots_->acquire();
                struct Release {
                    std::counting_semaphore<1024>* s;
                    ~Release() { s->release(); }
                } release{slots_.get()};
                auto resp = provider_->complete(req);
                metrics_.prompt_tokens += resp.prompt_tokens;
                metrics_.completion_tokens += resp.completion_tokens;
                return resp;
            } catch (const Error& e) {
                if (!e.transient() || attempt >= policy_.max_retries) {
                    ++metrics_.failures;
                    throw;
                }
            }
            ++metrics_.retries;
            sleeper_(policy_.backoff_base * (1L << std::min(attempt, 20)));
        }
    }

    Decision generate_decision(const GenerationRequest& req) { return parse_decision(generate(req).text); }

    Verdict generate_verdict(const GenerationRequest& req) { return parse_verdict(generate(req).text); }

private:
    std::shared_ptr<Provider> provider_;
    RetryPolicy policy_;
    std::size_t parallelism_;
    std::unique_ptr<std::counting_semaphore<1024>> slots_;
    Sleeper sleeper_;
    GatewayMetrics metrics_;
};

// Model id plus sampling settings for one family of calls.
struct CallSettings {
    std::string model = "default";
    double temperature = 0.0;
    std::optional<int> max_output_tokens;
};

inline GenerationRequest make_request(const CallSettings& s, std::string system, std::string user) {
    GenerationRequest req;
    req.model_id = s.model;
    req.temperature = s.temperature;
    req.max_output_tokens = s.max_output_tokens;
    if (!system.empty()) req.messages.push_back({MessageRole::System, std::move(system)});
    req.messages.push_back({MessageRole::User, std::move(user)});
    return req;
}

}  // namespace memlab
