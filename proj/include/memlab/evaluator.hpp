#pragma once

// Scoring: nugget rubrics judged 0 / 0.5 / 1 and averaged, event ordering by
// greedy equivalence alignment plus Kendall tau-b, and report aggregation.

#include "memlab/concurrency.hpp"
#include "memlab/domain.hpp"
#include "memlab/gateway.hpp"
#include "memlab/io.hpp"
#include "memlab/log.hpp"
#include "memlab/prompts.hpp"
#include "memlab/scratchpad.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <regex>

namespace memlab {

// ---- Kendall tau-b ---------------------------------------------------------------

namespace detail {

// Merge sort by value counting the swaps needed (pairs out of order).
inline std::int64_t sort_counting_swaps(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = sort_counting_swaps(v, buf, lo, mid) + sort_counting_swaps(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += static_cast<std::int64_t>(mid - i);
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

template <class Eq>
std::int64_t tied_pairs(std::size_t n, Eq&& equal) {
    std::int64_t total = 0, run = 1;
    for (std::size_t i = 1; i <= n; ++i) {
        if (i < n && equal(i - 1, i)) {
            ++run;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    return total;
}

}  // namespace detail

// O(n log n) tau-b (Knight's algorithm).
inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw Error(ErrorCode::LengthMismatch, "rank lists have lengths " + std::to_string(x.size()) + " and " +
                                                   std::to_string(y.size()));
    }
    const std::size_t n = x.size();
    if (n < 2) throw Error(ErrorCode::Degenerate, "tau-b needs at least two items");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
    });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
    }
    const std::int64_t ties_x = detail::tied_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b]; });
    const std::int64_t ties_xy =
        detail::tied_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b] && ys[a] == ys[b]; });
    std::vector<double> buf(n);
    const std::int64_t swaps = detail::sort_counting_swaps(ys, buf, 0, n);
    const std::int64_t ties_y = detail::tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
    const std::int64_t total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
    const std::int64_t denom_x = total - ties_x;  // pairs not tied in x
    const std::int64_t denom_y = total - ties_y;
    if (denom_x == 0 || denom_y == 0) throw Error(ErrorCode::Degenerate, "all ranks tied in one list");
    const std::int64_t numer = total - ties_x - ties_y + ties_xy - 2 * swaps;  // concordant - discordant
    return static_cast<double>(numer) / std::sqrt(static_cast<double>(denom_x) * static_cast<double>(denom_y));
}

// ---- event splitting and alignment ------------------------------------------------

namespace detail {

inline std::string_view strip_enumeration(std::string_view s) {
    s = trim(s);
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')' || s[i] == ':')) return trim(s.substr(i + 1));
    return strip_list_marker(s);
}

inline bool is_list_item(std::string_view line) {
    line = trim(line);
    if (line.empty()) return false;
    if (line[0] == '-' || line[0] == '*' || line.starts_with("\xE2\x80\xA2")) return true;
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    return i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')');
}

}  // namespace detail

// Candidate event snippets of a response: list items on their own lines, else
// inline "1) ... 2) ..." enumerations, else sentences.
inline std::vector<std::string> split_events(std::string_view response) {
    std::vector<std::string> out;
    for (auto line : split_lines(response)) {
        if (detail::is_list_item(line)) {
            auto item = detail::strip_enumeration(line);
            if (!item.empty()) out.emplace_back(item);
        }
    }
    if (out.size() >= 2) return out;

    out.clear();
    static const std::regex inline_item(R"((^|\s)\d{1,2}[\)\.]\s)");
    const std::string text(response);
    std::vector<std::pair<std::size_t, std::size_t>> marks;  // (marker start, content start)
    for (auto it = std::sregex_iterator(text.begin(), text.end(), inline_item); it != std::sregex_iterator(); ++it) {
        const auto pos = static_cast<std::size_t>(it->position(0)) + static_cast<std::size_t>(it->length(1));
        marks.emplace_back(pos, static_cast<std::size_t>(it->position(0) + it->length(0)));
    }
    if (marks.size() >= 2) {
        for (std::size_t i = 0; i < marks.size(); ++i) {
            const auto end = i + 1 < marks.size() ? marks[i + 1].first : text.size();
            auto item = std::string(trim(std::string_view(text).substr(marks[i].second, end - marks[i].second)));
            while (!item.empty() && (item.back() == ',' || item.back() == ';')) item.pop_back();
            if (!item.empty()) out.push_back(std::move(item));
        }
        return out;
    }

    out.clear();
    for (auto s : split_sentences(response)) {
        auto t = trim(s);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

// "3rd: Contractor management" -> "Contractor management"; rubric stems such as
// "LLM response should mention: X" -> "X".
inline std::string strip_event_label(std::string_view s) {
    static const std::regex ordinal(R"(^\s*\d+\s*(st|nd|rd|th)?\s*[:.)-]\s*)", std::regex::icase);
    static const std::regex stem(R"(^\s*LLM response should (mention|state|contain)\s*:\s*)", std::regex::icase);
    auto out = std::regex_replace(std::string(s), ordinal, "", std::regex_constants::format_first_only);
    out = std::regex_replace(out, stem, "", std::regex_constants::format_first_only);
    return std::string(trim(out));
}

struct EventAlignment {
    std::vector<std::pair<std::size_t, std::size_t>> matched;  // (reference index, response position)
    std::vector<std::size_t> unmatched;                        // reference indices
    std::vector<std::string> snippets;
};

using EquivalenceFn = std::function<bool(std::string_view reference, std::string_view snippet)>;

// Greedy in order: each reference takes the first unconsumed snippet judged
// equivalent.
inline EventAlignment align_events(std::string_view response, const std::vector<std::string>& references,
                                   const EquivalenceFn& equivalent) {
    EventAlignment a;
    a.snippets = split_events(response);
    std::vector<char> used(a.snippets.size(), 0);
    for (std::size_t r = 0; r < references.size(); ++r) {
        bool found = false;
        for (std::size_t s = 0; s < a.snippets.size() && !found; ++s) {
            if (used[s] || !equivalent(references[r], a.snippets[s])) continue;
            used[s] = 1;
            a.matched.emplace_back(r, s);
            found = true;
        }
        if (!found) a.unmatched.push_back(r);
    }
    return a;
}

// Unmatched references share one rank after the last matched position.
inline double event_ordering_score(const EventAlignment& a, std::size_t reference_count) {
    if (a.matched.empty() || reference_count == 0) return 0.0;
    if (reference_count == 1) return 1.0;
    std::vector<double> x(reference_count), y(reference_count);
    std::size_t last = 0;
    for (const auto& [r, pos] : a.matched) last = std::max(last, pos);
    for (std::size_t i = 0; i < reference_count; ++i) {
        x[i] = static_cast<double>(i + 1);
        y[i] = static_cast<double>(last + 1);
    }
    for (const auto& [r, pos] : a.matched) y[r] = static_cast<double>(pos);
    return kendall_tau_b(x, y);
}

// ---- nugget scoring --------------------------------------------------------------------

struct NuggetVerdict {
    std::size_t nugget_index = 0;
    double verdict = 0.0;
    bool unparseable = false;  // scored 0 because the judge reply was unreadable
};

struct ProbeScore {
    std::string probe_id;
    MemoryAbility ability = MemoryAbility::InformationExtraction;
    double score = 0.0;
    std::vector<NuggetVerdict> verdicts;
    std::optional<EventAlignment> alignment;
    std::string method;
};

inline double mean_verdict(const std::vector<NuggetVerdict>& verdicts) {
    if (verdicts.empty()) throw Error(ErrorCode::EmptyRubric, "no verdicts to average");
    double sum = 0.0;
    for (const auto& v : verdicts) sum += v.verdict;
    return sum / static_cast<double>(verdicts.size());
}

struct EvaluatorSettings {
    CallSettings judge{"default", 0.0, std::nullopt};
    CallSettings equivalence{"default", 0.0, std::nullopt};
};

class Evaluator {
public:
    explicit Evaluator(std::shared_ptr<Gateway> gateway, EvaluatorSettings settings = {})
        : gateway_(std::move(gateway)), settings_(std::move(settings)) {}

    NuggetVerdict judge_nugget(std::string_view question, std::string_view response, const Nugget& nugget,
                               std::size_t index = 0) const {
        NuggetVerdict v{index, 0.0, false};
        try {
            v.verdict = value(gateway_->generate_verdict(make_request(settings_.judge, "", prompts::judge(question, response, nugget.text))));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Unparseable) throw;
            v.unparseable = true;
            log_warn("judge reply unparseable, scoring nugget " + std::to_string(index) + " as 0");
        }
        return v;
    }

    ProbeScore score_response(std::string_view response, const ProbeQuestion& probe) const {
        if (probe.rubric.empty()) throw Error(ErrorCode::EmptyRubric, "probe " + probe.id + " has no rubric");
        ProbeScore s{probe.id, probe.ability, 0.0, std::vector<NuggetVerdict>(probe.rubric.size()), std::nullopt, {}};
        parallel_for(probe.rubric.size(), gateway_->parallelism(), [&](std::size_t i) {
            s.verdicts[i] = judge_nugget(probe.question, response, probe.rubric[i], i);
        });
        s.score = mean_verdict(s.verdicts);
        return s;
    }

    bool equivalent(std::string_view reference, std::string_view snippet) const {
        try {
            return gateway_->generate_decision(make_request(settings_.equivalence, "", prompts::equivalence(reference, snippet))) ==
                   Decision::Yes;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Unparseable) throw;
            return false;
        }
    }

    static std::vector<std::string> reference_events(const ProbeQuestion& probe) {
        std::vector<std::string> refs;
        if (!probe.ordered_events.empty()) {
            for (const auto& e : probe.ordered_events) refs.push_back(strip_event_label(e));
        } else {
            for (const auto& n : probe.rubric) {
                if (to_lower(n.text).find("should mention") != std::string::npos) refs.push_back(strip_event_label(n.text));
            }
        }
        return refs;
    }

    ProbeScore score_event_ordering(std::string_view response, const ProbeQuestion& probe) const {
        if (probe.ability != MemoryAbility::EventOrdering) {
            throw Error(ErrorCode::InvalidArgument, "probe " + probe.id + " is not an event ordering probe");
        }
        const auto refs = reference_events(probe);
        if (refs.empty()) throw Error(ErrorCode::EmptyRubric, "probe " + probe.id + " has no reference events");
        ProbeScore s{probe.id, probe.ability, 0.0, {}, std::nullopt, {}};
        s.alignment = align_events(response, refs, [&](std::string_view r, std::string_view c) { return equivalent(r, c); });
        s.score = event_ordering_score(*s.alignment, refs.size());
        return s;
    }

    ProbeScore score(std::string_view response, const ProbeQuestion& probe) const {
        return probe.ability == MemoryAbility::EventOrdering ? score_event_ordering(response, probe)
                                                             : score_response(response, probe);
    }

    // Probes without an answer are skipped with a warning.
    std::vector<ProbeScore> evaluate(const std::vector<ProbeQuestion>& probes,
                                     const std::map<std::string, std::string>& answers) const {
        std::vector<const ProbeQuestion*> todo;
        for (const auto& p : probes) {
            if (answers.count(p.id)) todo.push_back(&p);
            else log_warn("no answer for probe " + p.id + ", skipped");
        }
        std::vector<ProbeScore> out(todo.size());
        parallel_for(todo.size(), gateway_->parallelism(), [&](std::size_t i) {
            out[i] = score(answers.at(todo[i]->id), *todo[i]);
        });
        return out;
    }

private:
    std::shared_ptr<Gateway> gateway_;
    EvaluatorSettings settings_;
};

// ---- files ------------------------------------------------------------------------------

inline json score_to_json(const ProbeScore& s) {
    json verdicts;
    if (s.alignment) {
        json matched = json::array();
        for (const auto& [r, p] : s.alignment->matched) matched.push_back({r, p});
        verdicts = json{{"matched", matched}, {"unmatched", s.alignment->unmatched}};
    } else {
        verdicts = json::array();
        for (const auto& v : s.verdicts) {
            json item{{"nugget", v.nugget_index}, {"verdict", v.verdict}};
            if (v.unparseable) item["unparseable"] = true;
            verdicts.push_back(item);
        }
    }
    json j{{"probe_id", s.probe_id}, {"ability", s.ability}, {"score", s.score}, {"verdicts", verdicts}};
    if (!s.method.empty()) j["method"] = s.method;
    return j;
}

inline ProbeScore score_from_json(const json& j) {
    ProbeScore s;
    try {
        s.probe_id = j.at("probe_id").get<std::string>();
        s.ability = j.at("ability").get<MemoryAbility>();
        s.score = j.at("score").get<double>();
        s.method = j.value("method", "");
        const auto& v = j.value("verdicts", json::array());
        if (v.is_object()) {
            EventAlignment a;
            for (const auto& m : v.value("matched", json::array())) a.matched.emplace_back(m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>());
            a.unmatched = v.value("unmatched", std::vector<std::size_t>{});
            s.alignment = std::move(a);
        } else {
            for (const auto& item : v) {
                s.verdicts.push_back({item.at("nugget").get<std::size_t>(), item.at("verdict").get<double>(),
                                      item.value("unparseable", false)});
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("score row: ") + e.what());
    }
    return s;
}

// Answers JSONL rows {probe_id, response}.
inline std::map<std::string, std::string> load_answers(const std::filesystem::path& path) {
    std::map<std::string, std::string> out;
    for (const auto& row : read_jsonl(path)) {
        try {
            out[row.at("probe_id").get<std::string>()] = row.at("response").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Malformed, std::string("answer row: ") + e.what());
        }
    }
    return out;
}

// ---- report ----------------------------------------------------------------------------

struct ReportCell {
    double mean = 0.0;
    std::size_t count = 0;
};

struct Report {
    std::vector<std::string> methods;
    std::map<std::string, std::map<MemoryAbility, ReportCell>> cells;  // method -> ability -> cell

    std::optional<double> cell(const std::string& method, MemoryAbility a) const {
        auto m = cells.find(method);
        if (m == cells.end()) return std::nullopt;
        auto c = m->second.find(a);
        if (c == m->second.end()) return std::nullopt;
        return c->second.mean;
    }

    // Unweighted mean of the ability means present for the method.
    std::optional<double> average(const std::string& method) const {
        auto m = cells.find(method);
        if (m == cells.end() || m->second.empty()) return std::nullopt;
        double sum = 0.0;
        for (const auto& [_, c] : m->second) sum += c.mean;
        return sum / static_cast<double>(m->second.size());
    }

    bool partial(const std::string& method) const {
        auto m = cells.find(method);
        return m == cells.end() || m->second.size() < kAllAbilities.size();
    }
};

inline Report aggregate(const std::vector<ProbeScore>& scores, const std::string& default_method = "light") {
    Report r;
    std::map<std::string, std::map<MemoryAbility, std::pair<double, std::size_t>>> sums;
    for (const auto& s : scores) {
        const auto& method = s.method.empty() ? default_method : s.method;
        if (std::find(r.methods.begin(), r.methods.end(), method) == r.methods.end()) r.methods.push_back(method);
        auto& acc = sums[method][s.ability];
        acc.first += s.score;
        ++acc.second;
    }
    for (const auto& [method, by_ability] : sums) {
        for (const auto& [ability, acc] : by_ability) {
            r.cells[method][ability] = {acc.first / static_cast<double>(acc.second), acc.second};
        }
    }
    return r;
}

namespace detail {
inline std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}
}  // namespace detail

inline std::string render_csv(const Report& r) {
    std::string out = "ability";
    for (const auto& m : r.methods) out += "," + m;
    out += "\n";
    for (auto a : kAllAbilities) {
        out += std::string(display_name(a));
        for (const auto& m : r.methods) {
            out += ",";
            if (auto v = r.cell(m, a)) out += detail::fixed(*v, 4);
        }
        out += "\n";
    }
    out += "Average";
    for (const auto& m : r.methods) {
        out += ",";
        if (auto v = r.average(m)) out += detail::fixed(*v, 4);
    }
    out += "\n";
    return out;
}

inline std::string render_markdown(const Report& r) {
    std::string out = "| Ability |";
    for (const auto& m : r.methods) out += " " + m + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < r.methods.size(); ++i) out += "---:|";
    out += "\n";
    for (auto a : kAllAbilities) {
        out += "| " + std::string(display_name(a)) + " |";
        for (const auto& m : r.methods) {
            const auto v = r.cell(m, a);
            out += " " + (v ? detail::fixed(*v, 3) : std::string()) + " |";
        }
        out += "\n";
    }
    out += "| **Average** |";
    bool footnote = false;
    for (const auto& m : r.methods) {
        const auto v = r.average(m);
        std::string cell = v ? "**" + detail::fixed(*v, 3) + "**" : std::string();
        if (v && r.partial(m)) {
            cell += "*";
            footnote = true;
        }
        out += " " + cell + " |";
    }
    out += "\n";
    if (footnote) out += "\n\\* Averaged over the abilities with scores only.\n";
    return out;
}

}  // namespace memlab
