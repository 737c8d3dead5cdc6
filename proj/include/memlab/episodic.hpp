#pragma once

// Episodic memory: per-exchange key/value extraction, an exact cosine index
// over the extracted keys, and retrieval of the verbatim dialogue segments.

#include "memlab/domain.hpp"
#include "memlab/embedding.hpp"
#include "memlab/gateway.hpp"
#include "memlab/io.hpp"
#include "memlab/log.hpp"
#include "memlab/prompts.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <unordered_map>
#include <unordered_set>

namespace memlab {

using RecordId = std::uint64_t;

struct MemoryRecord {
    RecordId record_id = 0;
    int pair_index = 0;
    std::string key_text;
    std::string value_text;
    Embedding embedding;
};

struct RetrievedSegment {
    int pair_index = 0;
    RecordId record_id = 0;  // best-scoring record of the pair
    double score = 0.0;
    std::string text;
};

// Append-only exact-scan index. One writer, many readers; a reader sees a
// consistent prefix of the insertions.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dimension) : dimension_(dimension) {
        if (dimension_ == 0) throw Error(ErrorCode::Config, "index dimension must be positive");
    }

    VectorIndex(const VectorIndex& other) : dimension_(other.dimension_) {
        std::shared_lock lock(other.mutex_);
        records_ = other.records_;
        ids_ = other.ids_;
    }

    VectorIndex& operator=(const VectorIndex& other) {
        if (this == &other) return *this;
        std::shared_lock theirs(other.mutex_);
        std::unique_lock ours(mutex_);
        dimension_ = other.dimension_;
        records_ = other.records_;
        ids_ = other.ids_;
        return *this;
    }

    std::size_t dimension() const { return dimension_; }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return records_.size();
    }

    void add(MemoryRecord record) {
        if (record.embedding.size() != dimension_) {
            throw Error(ErrorCode::DimensionMismatch, "record embedding has " + std::to_string(record.embedding.size()) +
                                                          " dims, index has " + std::to_string(dimension_));
        }
        normalize(record.embedding);
        std::unique_lock lock(mutex_);
        if (!ids_.insert(record.record_id).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate record id " + std::to_string(record.record_id));
        }
        records_.push_back(std::move(record));
    }

    std::vector<MemoryRecord> records() const {
        std::shared_lock lock(mutex_);
        return records_;
    }

    RecordId next_id() const {
        std::shared_lock lock(mutex_);
        RecordId next = 0;
        for (const auto& r : records_) next = std::max(next, r.record_id + 1);
        return next;
    }

    // Exact kNN over all records, collapsed to at most k distinct pairs.
    // Order: score desc, pair_index asc, record_id asc.
    std::vector<RetrievedSegment> search(std::span<const float> query, std::size_t k) const {
        if (query.size() != dimension_) {
            throw Error(ErrorCode::DimensionMismatch, "query has " + std::to_string(query.size()) + " dims");
        }
        std::shared_lock lock(mutex_);
        std::unordered_map<int, std::size_t> best_by_pair;  // pair_index -> slot in hits
        std::vector<RetrievedSegment> hits;
        for (const auto& r : records_) {
            const double score = cosine(query, r.embedding);
            auto [it, inserted] = best_by_pair.try_emplace(r.pair_index, hits.size());
            if (inserted) {
                hits.push_back({r.pair_index, r.record_id, score, {}});
                continue;
            }
            auto& h = hits[it->second];
            if (score > h.score || (score == h.score && r.record_id < h.record_id)) {
                h.score = score;
                h.record_id = r.record_id;
            }
        }
        auto better = [](const RetrievedSegment& a, const RetrievedSegment& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.pair_index < b.pair_index;
        };
        const auto take = std::min(k, hits.size());
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(), better);
        hits.resize(take);
        std::unordered_map<RecordId, const MemoryRecord*> by_id;
        for (const auto& h : hits) by_id.emplace(h.record_id, nullptr);
        for (const auto& r : records_) {
            if (auto it = by_id.find(r.record_id); it != by_id.end()) it->second = &r;
        }
        for (auto& h : hits) h.text = by_id.at(h.record_id)->value_text;
        return hits;
    }

    // Header line {"dimension", "count"} followed by one JSON record per line.
    std::string snapshot() const {
        std::shared_lock lock(mutex_);
        std::string out = json{{"dimension", dimension_}, {"count", records_.size()}}.dump() + "\n";
        for (const auto& r : records_) {
            json emb = json::array();
            for (float x : r.embedding) emb.push_back(x);
            out += json{{"id", r.record_id},
                        {"pair_index", r.pair_index},
                        {"key", r.key_text},
                        {"value", r.value_text},
                        {"embedding", emb}}
                       .dump() +
                   "\n";
        }
        return out;
    }

    static VectorIndex from_snapshot(std::string_view text) {
        auto lines = split_lines(text);
        std::size_t i = 0;
        while (i < lines.size() && trim(lines[i]).empty()) ++i;
        if (i == lines.size()) throw Error(ErrorCode::Malformed, "index snapshot is empty");
        try {
            const auto header = json::parse(lines[i++]);
            VectorIndex index(header.at("dimension").get<std::size_t>());
            const auto count = header.at("count").get<std::size_t>();
            for (; i < lines.size(); ++i) {
                if (trim(lines[i]).empty()) continue;
                const auto j = json::parse(lines[i]);
                MemoryRecord r;
                r.record_id = j.at("id").get<RecordId>();
                r.pair_index = j.at("pair_index").get<int>();
                r.key_text = j.at("key").get<std::string>();
                r.value_text = j.at("value").get<std::string>();
                for (const auto& x : j.at("embedding")) r.embedding.push_back(x.get<float>());
                if (r.embedding.size() != index.dimension_) {
                    throw Error(ErrorCode::DimensionMismatch, "snapshot record " + std::to_string(r.record_id));
                }
                // Stored vectors are already unit norm; keep them bit-exact.
                index.ids_.insert(r.record_id);
                index.records_.push_back(std::move(r));
            }
            if (index.records_.size() != count) {
                throw Error(ErrorCode::Malformed, "snapshot header says " + std::to_string(count) + " records, found " +
                                                      std::to_string(index.records_.size()));
            }
            return index;
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Malformed, std::string("index snapshot: ") + e.what());
        }
    }

private:
    std::size_t dimension_;
    std::vector<MemoryRecord> records_;
    std::unordered_set<RecordId> ids_;
    mutable std::shared_mutex mutex_;
};

struct KeyValue {
    std::string key;
    std::string value;
};

struct KvExtraction {
    std::vector<KeyValue> pairs;
    std::string summary;
};

// Parses "key: value" lines plus one "SUMMARY: ..." line. Ill-formed lines are
// dropped; only a reply with neither pairs nor summary is an error.
inline KvExtraction parse_kv(std::string_view text) {
    constexpr std::size_t kMaxKeyLength = 80;
    KvExtraction out;
    std::unordered_set<std::string> seen;
    for (auto raw : split_lines(text)) {
        auto line = strip_list_marker(raw);
        if (line.empty()) continue;
        if (starts_with_icase(line, "summary:")) {
            out.summary = std::string(trim(line.substr(8)));
            continue;
        }
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        auto key = trim(line.substr(0, colon));
        auto value = trim(line.substr(colon + 1));
        while (!key.empty() && (key.front() == '*' || key.front() == '"')) key.remove_prefix(1);
        while (!key.empty() && (key.back() == '*' || key.back() == '"')) key.remove_suffix(1);
        key = trim(key);
        if (key.empty() || value.empty() || key.size() > kMaxKeyLength) continue;
        if (!seen.insert(to_lower(key)).second) continue;
        out.pairs.push_back({std::string(key), std::string(value)});
    }
    if (out.pairs.empty() && out.summary.empty()) {
        throw Error(ErrorCode::Malformed, "no key: value lines and no summary in extraction output");
    }
    return out;
}

class EpisodicMemory {
public:
    EpisodicMemory(std::shared_ptr<Gateway> gateway, std::shared_ptr<EmbeddingProvider> embedder,
                   CallSettings extract_settings = {})
        : gateway_(std::move(gateway)),
          embedder_(std::move(embedder)),
          settings_(std::move(extract_settings)),
          index_(embedder_->dimension()) {}

    EpisodicMemory(std::shared_ptr<Gateway> gateway, std::shared_ptr<EmbeddingProvider> embedder,
                   CallSettings extract_settings, VectorIndex index)
        : gateway_(std::move(gateway)),
          embedder_(std::move(embedder)),
          settings_(std::move(extract_settings)),
          index_(std::move(index)),
          next_id_(index_.next_id()) {
        if (index_.dimension() != embedder_->dimension()) {
            throw Error(ErrorCode::DimensionMismatch, "index and embedder dimensions differ");
        }
    }

    KvExtraction extract_kv(const ExchangePair& pair) {
        auto req = make_request(settings_, "", prompts::kv_extraction(pair));
        return parse_kv(gateway_->generate(req).text);
    }

    // One record per extracted key plus one for the summary, all pointing at
    // the pair's verbatim segment.
    std::vector<RecordId> index_pair(const ExchangePair& pair, const KvExtraction& extraction) {
        std::vector<std::string> keys;
        for (const auto& kv : extraction.pairs) keys.push_back(kv.key + ": " + kv.value);
        if (!extraction.summary.empty()) keys.push_back(extraction.summary);
        const auto segment = pair.segment();
        std::vector<RecordId> ids;
        for (auto& key : keys) {
            MemoryRecord r;
            r.record_id = next_id_++;
            r.pair_index = pair.pair_index();
            r.embedding = embedder_->embed(key);
            r.key_text = std::move(key);
            r.value_text = segment;
            ids.push_back(r.record_id);
            index_.add(std::move(r));
        }
        return ids;
    }

    std::vector<RecordId> index_pair(const ExchangePair& pair) { return index_pair(pair, extract_kv(pair)); }

    std::vector<RetrievedSegment> retrieve(std::string_view query, std::size_t k) const {
        if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
        if (index_.size() == 0) return {};
        return index_.search(embedder_->embed(query), k);
    }

    const VectorIndex& index() const { return index_; }

private:
    std::shared_ptr<Gateway> gateway_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    CallSettings settings_;
    VectorIndex index_;
    RecordId next_id_ = 0;
};

}  // namespace memlab
