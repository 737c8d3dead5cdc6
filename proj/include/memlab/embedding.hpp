#pragma once

#include "memlab/error.hpp"
#include "memlab/text.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memlab {

using Embedding = std::vector<float>;

// Contract: deterministic for a fixed text, constant output dimension.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;
    virtual Embedding embed(std::string_view text) = 0;
};

inline double l2_norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

// Unit-normalizes in place. A zero vector becomes the first basis vector so
// every stored embedding stays on the unit sphere.
inline void normalize(Embedding& v) {
    const double n = l2_norm(v);
    if (v.empty()) return;
    if (n == 0.0 || !std::isfinite(n)) {
        std::fill(v.begin(), v.end(), 0.0f);
        v[0] = 1.0f;
        return;
    }
    for (auto& x : v) x = static_cast<float>(x / n);
}

inline double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

// Cosine of unit vectors is their dot product; clamped against rounding.
inline double cosine(std::span<const float> a, std::span<const float> b) {
    return std::clamp(dot(a, b), -1.0, 1.0);
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic test embedder: every lowercase word maps to a hash-seeded
// pseudo-random direction and a text embeds as the normalized sum of its
// words. Texts sharing vocabulary therefore land close together.
class HashEmbedder final : public EmbeddingProvider {
public:
    explicit HashEmbedder(std::size_t dimension = 256) : dimension_(dimension) {
        if (dimension_ == 0) throw Error(ErrorCode::Config, "embedding dimension must be positive");
    }

    std::size_t dimension() const override { return dimension_; }

    Embedding embed(std::string_view text) override {
        Embedding v(dimension_, 0.0f);
        std::string word;
        bool any = false;
        auto flush = [&] {
            if (word.empty()) return;
            add_word(v, word);
            any = true;
            word.clear();
        };
        for (char c : text) {
            const auto uc = static_cast<unsigned char>(c);
            if (std::isalnum(uc) || uc >= 0x80) word += static_cast<char>(std::tolower(uc));
            else flush();
        }
        flush();
        if (!any && !text.empty()) add_word(v, std::string(text));
        normalize(v);
        return v;
    }

    // Direction assigned to a single word (already lowercased).
    Embedding word_vector(std::string_view word) const {
        Embedding v(dimension_, 0.0f);
        add_word(v, word);
        normalize(v);
        return v;
    }

private:
    void add_word(Embedding& v, std::string_view word) const {
        std::uint64_t state = detail::fnv1a(word);
        for (std::size_t i = 0; i < dimension_; ++i) {
            const auto bits = detail::splitmix64(state) >> 11;  // 53 random bits
            v[i] += static_cast<float>(static_cast<double>(bits) / 9007199254740992.0 * 2.0 - 1.0);
        }
    }

    std::size_t dimension_;
};

}  // namespace memlab
