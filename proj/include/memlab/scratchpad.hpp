#pragma once

// Scratchpad memory: salient notes extracted per exchange, appended under a
// separator, compressed when they outgrow the budget, and filtered per query
// by chunk-level relevance judgments.

#include "memlab/concurrency.hpp"
#include "memlab/domain.hpp"
#include "memlab/embedding.hpp"
#include "memlab/gateway.hpp"
#include "memlab/io.hpp"
#include "memlab/log.hpp"
#include "memlab/prompts.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace memlab {

struct ScratchpadConfig {
    std::size_t compress_threshold = 30'000;  // tokens; above this the pad is compressed
    std::size_t compress_target = 15'000;     // tokens after compression
    double breakpoint_percentile = 95.0;
    std::size_t min_chunk_sentences = 2;
    std::size_t max_chunk_tokens = 2'000;
};

struct Scratchpad {
    std::string notes;
    std::size_t token_count = 0;
    int compressions_performed = 0;
    bool degraded = false;
};

struct ScratchChunk {
    std::string text;
    std::size_t start_sentence = 0;  // [start, end) in sentence units
    std::size_t end_sentence = 0;
    std::size_t start_offset = 0;  // [start, end) in bytes of the source text
    std::size_t end_offset = 0;
};

// "NOTES: ..." reply -> note text; "(none)" and friends mean nothing salient.
inline std::string parse_notes(std::string_view reply) {
    auto text = trim(reply);
    const auto lower = to_lower(text);
    if (auto at = lower.find("notes:"); at != std::string::npos) text = trim(text.substr(at + 6));
    const auto normalized = to_lower(text);
    if (normalized.empty() || normalized == "(none)" || normalized == "none" || normalized == "none." ||
        normalized == "n/a") {
        return {};
    }
    return std::string(text);
}

inline Scratchpad merge(const Scratchpad& pad, std::string_view note, std::string_view label = "note",
                        const Tokenizer& tok = default_tokenizer()) {
    if (trim(note).empty()) return pad;
    Scratchpad out = pad;
    if (!out.notes.empty()) out.notes += "\n\n";
    out.notes += "[" + std::string(label) + "]\n" + std::string(trim(note));
    out.token_count = tok(out.notes);
    return out;
}

// Splits into sentences that concatenate back to the input exactly. A sentence
// ends after terminal punctuation followed by whitespace, or at a newline; the
// trailing whitespace stays with the sentence.
inline std::vector<std::string_view> split_sentences(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0, i = 0;
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (i < text.size()) {
        const char c = text[i];
        bool boundary = false;
        if (c == '\n') {
            boundary = true;
        } else if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i;
            while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
            i = j - 1;
            boundary = j == text.size() || is_space(text[j]);
        }
        ++i;
        if (boundary) {
            while (i < text.size() && is_space(text[i])) ++i;
            out.push_back(text.substr(start, i - start));
            start = i;
        }
    }
    if (start < text.size()) out.push_back(text.substr(start));
    return out;
}

// Linear-interpolation percentile (the common "linear" definition).
inline double percentile(std::vector<double> values, double pct) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// Breakpoints where the cosine distance between adjacent sentences exceeds the
// configured percentile; then chunks shorter than min_chunk_sentences merge
// forward and chunks above max_chunk_tokens are split.
inline std::vector<ScratchChunk> semantic_chunk(std::string_view text, EmbeddingProvider& embedder,
                                                const ScratchpadConfig& cfg = {},
                                                const Tokenizer& tok = default_tokenizer()) {
    const auto sentences = split_sentences(text);
    std::vector<std::size_t> offsets{0};
    for (auto s : sentences) offsets.push_back(offsets.back() + s.size());

    std::vector<std::pair<std::size_t, std::size_t>> groups;  // sentence ranges
    if (sentences.size() <= 2) {
        if (!sentences.empty()) groups.emplace_back(0, sentences.size());
    } else {
        std::vector<Embedding> emb;
        emb.reserve(sentences.size());
        for (auto s : sentences) emb.push_back(embedder.embed(trim(s)));
        std::vector<double> dist;
        for (std::size_t i = 0; i + 1 < emb.size(); ++i) dist.push_back(1.0 - cosine(emb[i], emb[i + 1]));
        const double threshold = percentile(dist, cfg.breakpoint_percentile);
        std::size_t start = 0;
        for (std::size_t i = 0; i < dist.size(); ++i) {
            if (dist[i] > threshold) {
                groups.emplace_back(start, i + 1);
                start = i + 1;
            }
        }
        groups.emplace_back(start, sentences.size());

        std::vector<std::pair<std::size_t, std::size_t>> merged;
        std::size_t pending = std::string::npos;
        for (const auto& [s, e] : groups) {
            const std::size_t begin = pending == std::string::npos ? s : pending;
            if (e - begin < cfg.min_chunk_sentences) {
                pending = begin;
                continue;
            }
            merged.emplace_back(begin, e);
            pending = std::string::npos;
        }
        if (pending != std::string::npos) {
            if (merged.empty()) merged.emplace_back(pending, sentences.size());
            else merged.back().second = sentences.size();
        }
        groups = std::move(merged);
    }

    std::vector<ScratchChunk> chunks;
    auto emit = [&](std::size_t s, std::size_t e, std::size_t from, std::size_t to) {
        chunks.push_back({std::string(text.substr(from, to - from)), s, e, from, to});
    };
    for (const auto& [s, e] : groups) {
        const auto from = offsets[s], to = offsets[e];
        if (tok(text.substr(from, to - from)) <= cfg.max_chunk_tokens) {
            emit(s, e, from, to);
            continue;
        }
        std::size_t cs = s;
        for (std::size_t i = s; i < e; ++i) {
            const auto span_from = offsets[cs];
            if (i > cs && tok(text.substr(span_from, offsets[i + 1] - span_from)) > cfg.max_chunk_tokens) {
                emit(cs, i, span_from, offsets[i]);
                cs = i;
            }
            if (tok(sentences[i]) > cfg.max_chunk_tokens) {
                if (i > cs) emit(cs, i, offsets[cs], offsets[i]);
                // A single oversized sentence is cut by characters.
                std::size_t pos = offsets[i];
                while (pos < offsets[i + 1]) {
                    auto piece = truncate_to_tokens(text.substr(pos, offsets[i + 1] - pos), cfg.max_chunk_tokens, tok);
                    if (piece.empty()) piece = std::string(text.substr(pos, 1));
                    emit(i, i + 1, pos, pos + piece.size());
                    pos += piece.size();
                }
                cs = i + 1;
            }
        }
        if (cs < e) emit(cs, e, offsets[cs], offsets[e]);
    }
    return chunks;
}

struct FilterResult {
    std::string retained;
    std::vector<ScratchChunk> chunks;
    std::vector<std::size_t> kept;  // indices into chunks, ascending
    std::size_t unparseable = 0;
};

struct ScratchpadSettings {
    CallSettings notes;
    CallSettings summary;
    CallSettings filter;
};

class ScratchpadMemory {
public:
    ScratchpadMemory(std::shared_ptr<Gateway> gateway, std::shared_ptr<EmbeddingProvider> embedder,
                     ScratchpadSettings settings = {}, ScratchpadConfig cfg = {},
                     Tokenizer tok = default_tokenizer())
        : gateway_(std::move(gateway)),
          embedder_(std::move(embedder)),
          settings_(std::move(settings)),
          cfg_(cfg),
          tok_(std::move(tok)) {}

    const ScratchpadConfig& config() const { return cfg_; }
    const Tokenizer& tokenizer() const { return tok_; }

    std::string extract_notes(const ExchangePair& current, const ExchangePair* previous) {
        auto req = make_request(settings_.notes, "", prompts::scratchpad_notes(current, previous));
        return parse_notes(gateway_->generate(req).text);
    }

    Scratchpad maybe_compress(const Scratchpad& pad) {
        if (pad.token_count <= cfg_.compress_threshold) return pad;
        Scratchpad out = pad;
        ++out.compressions_performed;
        try {
            auto req = make_request(settings_.summary, "", prompts::scratchpad_summary(pad.notes, cfg_.compress_target));
            auto summary = std::string(trim(gateway_->generate(req).text));
            if (summary.empty()) throw Error(ErrorCode::Malformed, "empty scratchpad summary");
            out.notes = truncate_to_tokens(summary, cfg_.compress_target, tok_);
        } catch (const Error& e) {
            log_warn("scratchpad compression failed, keeping most recent notes (degraded): " + std::string(e.what()));
            out.notes = keep_last_tokens(pad.notes, cfg_.compress_target, tok_);
            out.degraded = true;
        }
        out.token_count = tok_(out.notes);
        return out;
    }

    Scratchpad ingest(const Scratchpad& pad, const ExchangePair& current, const ExchangePair* previous) {
        auto note = extract_notes(current, previous);
        return maybe_compress(merge(pad, note, "exchange " + std::to_string(current.pair_index()), tok_));
    }

    std::vector<ScratchChunk> chunk(std::string_view text) const {
        return semantic_chunk(text, *embedder_, cfg_, tok_);
    }

    // Unparseable verdicts keep their chunk: losing evidence hurts answering
    // more than passing a borderline chunk through.
    FilterResult filter_for_query(const Scratchpad& pad, std::string_view query) const {
        FilterResult result;
        result.chunks = chunk(pad.notes);
        std::vector<char> keep(result.chunks.size(), 0);
        std::vector<char> unparseable(result.chunks.size(), 0);
        parallel_for(result.chunks.size(), gateway_->parallelism(), [&](std::size_t i) {
            auto req = make_request(settings_.filter, "", prompts::noise_filter(result.chunks[i].text, query));
            try {
                keep[i] = gateway_->generate_decision(req) == Decision::Yes;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::Unparseable) throw;
                keep[i] = 1;
                unparseable[i] = 1;
            }
        });
        for (std::size_t i = 0; i < result.chunks.size(); ++i) {
            result.unparseable += static_cast<std::size_t>(unparseable[i]);
            if (!keep[i]) continue;
            result.kept.push_back(i);
            result.retained += result.chunks[i].text;
        }
        return result;
    }

private:
    std::shared_ptr<Gateway> gateway_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    ScratchpadSettings settings_;
    ScratchpadConfig cfg_;
    Tokenizer tok_;
};

inline json scratchpad_sidecar(const Scratchpad& pad) {
    return json{{"token_count", pad.token_count},
                {"compressions_performed", pad.compressions_performed},
                {"degraded", pad.degraded}};
}

inline void save_scratchpad(const std::filesystem::path& dir, const Scratchpad& pad) {
    write_file(dir / "scratchpad.txt", pad.notes);
    write_json(dir / "scratchpad.json", scratchpad_sidecar(pad));
}

inline Scratchpad load_scratchpad(const std::filesystem::path& dir, const Tokenizer& tok = default_tokenizer()) {
    Scratchpad pad;
    pad.notes = read_file(dir / "scratchpad.txt");
    const auto meta = read_json(dir / "scratchpad.json");
    pad.token_count = tok(pad.notes);
    pad.compressions_performed = meta.value("compressions_performed", 0);
    pad.degraded = meta.value("degraded", false);
    return pad;
}

}  // namespace memlab
