#pragma once

// OpenAI-compatible HTTP backends (chat completions and embeddings) on top of
// cpp-httplib. Only this header pulls in the HTTP stack.

#include "memlab/embedding.hpp"
#include "memlab/gateway.hpp"

#include <httplib.h>

#include <cstdlib>

namespace memlab {

namespace detail {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path below the origin, without trailing slash
};

inline Endpoint split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::Config, "base_url needs a scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = base_url.substr(0, path_start);
    if (path_start != std::string::npos) ep.prefix = base_url.substr(path_start);
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
    return ep;
}

inline std::string read_api_key(const std::string& env_name) {
    const char* key = std::getenv(env_name.c_str());
    if (key == nullptr || *key == '\0') {
        throw Error(ErrorCode::Config, "environment variable " + env_name + " is not set");
    }
    return key;
}

inline nlohmann::json post_json(const ProviderConfig& cfg, const std::string& api_key, const std::string& path,
                                const nlohmann::json& body) {
    const auto ep = split_base_url(cfg.base_url);
    httplib::Client client(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout).count();
    client.set_connection_timeout(static_cast<time_t>(std::max<long long>(1, secs)), 0);
    client.set_read_timeout(static_cast<time_t>(std::max<long long>(1, secs)), 0);
    httplib::Headers headers{{"Authorization", "Bearer " + api_key}};
    auto res = client.Post(ep.prefix + path, headers, body.dump(), "application/json");
    if (!res) throw Error(ErrorCode::Transport, "request failed: " + httplib::to_string(res.error()));
    if (res->status == 429) throw Error(ErrorCode::RateLimited, "HTTP 429");
    if (res->status >= 500) throw Error(ErrorCode::Transport, "HTTP " + std::to_string(res->status));
    if (res->status != 200) {
        throw Error(ErrorCode::Malformed, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Malformed, e.what());
    }
}

}  // namespace detail

class OpenAIProvider final : public Provider {
public:
    // Resolves the API key eagerly so a missing secret fails at startup.
    explicit OpenAIProvider(ProviderConfig cfg) : cfg_(std::move(cfg)), api_key_(detail::read_api_key(cfg_.api_key_env)) {
        detail::split_base_url(cfg_.base_url);
    }

    GenerationResponse complete(const GenerationRequest& req) override {
        return parse_wire_response(detail::post_json(cfg_, api_key_, "/v1/chat/completions", to_wire_json(req)));
    }

private:
    ProviderConfig cfg_;
    std::string api_key_;
};

class OpenAIEmbeddingProvider final : public EmbeddingProvider {
public:
    OpenAIEmbeddingProvider(ProviderConfig cfg, std::size_t dimension)
        : cfg_(std::move(cfg)), api_key_(detail::read_api_key(cfg_.api_key_env)), dimension_(dimension) {}

    std::size_t dimension() const override { return dimension_; }

    Embedding embed(std::string_view text) override {
        nlohmann::json body{{"model", cfg_.model}, {"input", std::string(text)}};
        auto resp = detail::post_json(cfg_, api_key_, "/v1/embeddings", body);
        Embedding v;
        try {
            v = resp.at("data").at(0).at("embedding").get<Embedding>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Malformed, std::string("embedding response: ") + e.what());
        }
        if (v.size() != dimension_) {
            throw Error(ErrorCode::DimensionMismatch,
                        "embedding has " + std::to_string(v.size()) + " dims, expected " + std::to_string(dimension_));
        }
        normalize(v);
        return v;
    }

private:
    ProviderConfig cfg_;
    std::string api_key_;
    std::size_t dimension_;
};

}  // namespace memlab
