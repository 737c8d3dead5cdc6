#pragma once

// Probing questions: ability-specific candidate bullets from the plan(s), then
// question, ideal answer and rubric generated from the aligned dialogue turns.

#include "memlab/domain.hpp"
#include "memlab/gateway.hpp"
#include "memlab/io.hpp"
#include "memlab/log.hpp"
#include "memlab/prompts.hpp"
#include "memlab/synthesizer.hpp"

#include <map>
#include <set>

namespace memlab {

struct ProbeCandidate {
    MemoryAbility ability = MemoryAbility::InformationExtraction;
    std::vector<BulletRef> bullet_refs;
    std::vector<int> aligned_turn_ids;
    SourceTurnIds sources;
};

// Named source groups for abilities that contrast two statements.
inline std::optional<std::pair<std::string, std::string>> source_group_names(MemoryAbility a) {
    switch (a) {
        case MemoryAbility::ContradictionResolution: return std::pair{"first_statement", "second_statement"};
        case MemoryAbility::KnowledgeUpdate: return std::pair{"original_info", "updated_info"};
        case MemoryAbility::TemporalReasoning: return std::pair{"first_event", "second_event"};
        default: return std::nullopt;
    }
}

namespace detail {

struct WindowBullet {
    BulletRef ref;
    const BulletPoint* bullet;
};

inline bool same_label(const BulletPoint& a, const BulletPoint& b) {
    return !trim(a.narrative_label).empty() && to_lower(trim(a.narrative_label)) == to_lower(trim(b.narrative_label));
}

inline bool mentions_preference(std::string_view text) {
    const auto l = to_lower(text);
    for (const char* w : {"prefer", "favorite", "favourite", "would rather", "likes ", "enjoys", "love "}) {
        if (l.find(w) != std::string::npos) return true;
    }
    return false;
}

// Candidate bullet groups inside one window of plans, in plan order.
inline std::vector<std::vector<BulletRef>> window_candidates(const std::vector<Plan>& plans, int first, int last,
                                                             MemoryAbility ability) {
    std::vector<WindowBullet> all;
    std::vector<std::vector<WindowBullet>> by_sub_plan;  // normal bullets only
    for (int p = first; p < last; ++p) {
        const auto& plan = plans[static_cast<std::size_t>(p)];
        for (int s = 0; s < static_cast<int>(plan.sub_plans.size()); ++s) {
            by_sub_plan.emplace_back();
            const auto& sp = plan.sub_plans[static_cast<std::size_t>(s)];
            for (int b = 0; b < static_cast<int>(sp.bullets.size()); ++b) {
                WindowBullet wb{{p, s, b}, &sp.bullets[static_cast<std::size_t>(b)]};
                all.push_back(wb);
                if (wb.bullet->kind == BulletKind::Normal) by_sub_plan.back().push_back(wb);
            }
        }
    }
    std::vector<std::vector<BulletRef>> out;
    auto normals = [&] {
        std::vector<WindowBullet> v;
        for (const auto& wb : all) {
            if (wb.bullet->kind == BulletKind::Normal) v.push_back(wb);
        }
        return v;
    };
    // Pairs a special bullet with the statement it revises: the latest earlier
    // normal bullet of the same narrative, else the nearest earlier one.
    auto pair_with_earlier = [&](BulletKind kind) {
        for (std::size_t i = 0; i < all.size(); ++i) {
            if (all[i].bullet->kind != kind) continue;
            std::optional<BulletRef> match, nearest;
            for (std::size_t j = i; j-- > 0;) {
                if (all[j].bullet->kind != BulletKind::Normal) continue;
                if (!nearest) nearest = all[j].ref;
                if (same_label(*all[j].bullet, *all[i].bullet)) {
                    match = all[j].ref;
                    break;
                }
            }
            if (auto earlier = match ? match : nearest) out.push_back({*earlier, all[i].ref});
        }
    };
    switch (ability) {
        case MemoryAbility::Abstention: break;
        case MemoryAbility::InformationExtraction:
            for (const auto& wb : normals()) out.push_back({wb.ref});
            break;
        case MemoryAbility::InstructionFollowing:
            for (const auto& wb : all) {
                if (wb.bullet->kind == BulletKind::Instruction) out.push_back({wb.ref});
            }
            break;
        case MemoryAbility::KnowledgeUpdate: pair_with_earlier(BulletKind::Update); break;
        case MemoryAbility::ContradictionResolution: pair_with_earlier(BulletKind::Contradiction); break;
        case MemoryAbility::PreferenceFollowing: {
            // Bullets that state a preference rank first; the rest follow.
            const auto n = normals();
            for (const auto& wb : n) {
                if (mentions_preference(wb.bullet->description)) out.push_back({wb.ref});
            }
            for (const auto& wb : n) {
                if (!mentions_preference(wb.bullet->description)) out.push_back({wb.ref});
            }
            break;
        }
        case MemoryAbility::TemporalReasoning:
            // Same position in consecutive sub-plans: two dated events apart in time.
            for (std::size_t s = 0; s + 1 < by_sub_plan.size(); ++s) {
                const auto& a = by_sub_plan[s];
                const auto& b = by_sub_plan[s + 1];
                for (std::size_t j = 0; j < std::min(a.size(), b.size()); ++j) out.push_back({a[j].ref, b[j].ref});
            }
            break;
        case MemoryAbility::MultiHopReasoning: {
            for (std::size_t s = 0; s < by_sub_plan.size(); ++s) {
                for (const auto& a : by_sub_plan[s]) {
                    for (std::size_t t = s + 1; t < by_sub_plan.size(); ++t) {
                        for (const auto& b : by_sub_plan[t]) {
                            if (same_label(*a.bullet, *b.bullet)) out.push_back({a.ref, b.ref});
                        }
                    }
                }
            }
            if (out.empty() && by_sub_plan.size() >= 2) {
                const auto& a = by_sub_plan.front();
                const auto& b = by_sub_plan.back();
                for (std::size_t j = 0; j < std::min(a.size(), b.size()); ++j) out.push_back({a[j].ref, b[j].ref});
            }
            break;
        }
        case MemoryAbility::Summarization: {
            std::vector<BulletRef> whole;
            for (const auto& sp : by_sub_plan) {
                for (const auto& wb : sp) whole.push_back(wb.ref);
            }
            if (by_sub_plan.size() >= 2 && !whole.empty()) out.push_back(whole);
            for (const auto& sp : by_sub_plan) {
                if (sp.size() >= 2) {
                    std::vector<BulletRef> span;
                    for (const auto& wb : sp) span.push_back(wb.ref);
                    out.push_back(span);
                }
            }
            break;
        }
        case MemoryAbility::EventOrdering: {
            // Chains of one narrative across sub-plans first, then the j-th
            // bullet of every sub-plan.
            std::map<std::string, std::vector<BulletRef>> chains;
            std::vector<std::string> order;
            for (const auto& sp : by_sub_plan) {
                std::set<std::string> seen;
                for (const auto& wb : sp) {
                    const auto label = to_lower(trim(wb.bullet->narrative_label));
                    if (label.empty() || !seen.insert(label).second) continue;
                    auto [it, inserted] = chains.try_emplace(label);
                    if (inserted) order.push_back(label);
                    it->second.push_back(wb.ref);
                }
            }
            for (const auto& label : order) {
                if (chains[label].size() >= 3) out.push_back(chains[label]);
            }
            if (by_sub_plan.size() >= 2) {
                std::size_t width = by_sub_plan.front().size();
                for (const auto& sp : by_sub_plan) width = std::min(width, sp.size());
                for (std::size_t j = 0; j < width; ++j) {
                    std::vector<BulletRef> chain;
                    for (const auto& sp : by_sub_plan) chain.push_back(sp[j].ref);
                    out.push_back(chain);
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace detail

// Windows of `window` consecutive plans (a single window when there are no
// more plans than that); a candidate never spans two windows. Candidates whose
// bullets have no aligned turns are dropped. Abstention yields one empty
// candidate that routes to direct generation.
inline std::vector<ProbeCandidate> select_probe_candidates(const std::vector<Plan>& plans, MemoryAbility ability,
                                                           std::size_t window = 2) {
    if (ability == MemoryAbility::Abstention) {
        ProbeCandidate c;
        c.ability = ability;
        c.sources.grouped = true;
        return {c};
    }
    if (window == 0) throw Error(ErrorCode::InvalidArgument, "window must be positive");
    const int n = static_cast<int>(plans.size());
    const int w = static_cast<int>(std::min<std::size_t>(window, plans.size()));
    std::vector<ProbeCandidate> out;
    std::set<std::vector<BulletRef>> seen;
    for (int first = 0; first + w <= n && w > 0; ++first) {
        for (auto& refs : detail::window_candidates(plans, first, first + w, ability)) {
            if (!seen.insert(refs).second) continue;
            ProbeCandidate c;
            c.ability = ability;
            std::vector<std::vector<int>> per_ref;
            bool aligned = true;
            for (const auto& r : refs) {
                per_ref.push_back(resolve(plans, r).turn_ids);
                aligned = aligned && !per_ref.back().empty();
            }
            if (!aligned) continue;
            std::set<int> ids;
            for (const auto& v : per_ref) ids.insert(v.begin(), v.end());
            c.aligned_turn_ids.assign(ids.begin(), ids.end());
            if (auto names = source_group_names(ability); names && per_ref.size() == 2) {
                c.sources.grouped = true;
                c.sources.groups = {{names->first, per_ref[0]}, {names->second, per_ref[1]}};
            } else {
                c.sources = SourceTurnIds::flat(c.aligned_turn_ids);
            }
            c.bullet_refs = std::move(refs);
            out.push_back(std::move(c));
        }
    }
    if (out.empty()) {
        throw Error(ErrorCode::EmptyCandidates, "no candidates for " + std::string(to_string(ability)));
    }
    return out;
}

inline std::string render_snippets(const Conversation& conv, const std::vector<int>& turn_ids) {
    std::string out;
    for (int id : turn_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= conv.turns.size()) {
            throw Error(ErrorCode::InvalidArgument, "aligned turn " + std::to_string(id) + " does not exist");
        }
        const auto& t = conv.turns[static_cast<std::size_t>(id)];
        out += "[turn " + std::to_string(id) + "] " + (t.role == Role::User ? "User: " : "Assistant: ") + t.content + "\n";
    }
    return out;
}

// Parses one generated probe; the rubric may only be missing for event
// ordering probes that list their events.
inline ProbeQuestion parse_probe(std::string_view text, MemoryAbility ability) {
    auto j = extract_json(text, '{');
    j["ability"] = std::string(to_string(ability));
    j.erase("source_chat_ids");
    j.erase("review_status");
    auto p = probe_from_json(j);
    if (trim(p.question).empty()) throw Error(ErrorCode::Malformed, "probe has no question");
    if (ability == MemoryAbility::EventOrdering && p.ordered_events.size() < 2 && p.rubric.empty()) {
        throw Error(ErrorCode::Malformed, "event ordering probe needs an ordered event list");
    }
    if (ability != MemoryAbility::EventOrdering && p.rubric.empty()) {
        throw Error(ErrorCode::Malformed, "probe has no rubric");
    }
    for (const auto& n : p.rubric) {
        if (trim(n.text).empty()) throw Error(ErrorCode::Malformed, "empty rubric nugget");
    }
    return p;
}

struct ProbeSettings {
    CallSettings generate{"default", 0.0, std::nullopt};
    std::size_t window = 2;  // plans per sliding window
};

class ProbeGenerator {
public:
    explicit ProbeGenerator(std::shared_ptr<Gateway> gateway, ProbeSettings settings = {})
        : gateway_(std::move(gateway)), settings_(settings) {}

    ProbeQuestion generate_probe(const ProbeCandidate& candidate, const Conversation& conv,
                                 const std::vector<Plan>& plans, const std::vector<std::string>& avoid = {}) {
        std::string prompt;
        if (candidate.ability == MemoryAbility::Abstention) {
            prompt = prompts::abstention_probe(plans, avoid);
        } else {
            std::vector<BulletPoint> bullets;
            for (const auto& r : candidate.bullet_refs) bullets.push_back(resolve(plans, r));
            prompt = prompts::probe_generation(candidate.ability, bullets, render_snippets(conv, candidate.aligned_turn_ids));
        }
        auto probe = detail::with_retries(2, "probe generation", [&] {
            return parse_probe(gateway_->generate(make_request(settings_.generate, "", prompt)).text, candidate.ability);
        });
        probe.source_turn_ids = candidate.sources;
        probe.review_status = ReviewStatus::Unreviewed;
        return probe;
    }

    // Up to `cap` probes per ability, in ability order. Abilities without
    // candidates and candidates whose output stays malformed are skipped with
    // a warning.
    std::vector<ProbeQuestion> generate_probes(const Conversation& conv, const std::vector<Plan>& plans,
                                               const std::vector<MemoryAbility>& abilities, std::size_t cap) {
        std::vector<ProbeQuestion> out;
        for (auto ability : abilities) {
            const auto name = std::string(to_string(ability));
            std::vector<ProbeCandidate> candidates;
            try {
                candidates = select_probe_candidates(plans, ability, settings_.window);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptyCandidates) throw;
                log_warn(std::string(e.what()) + "; no probes for this ability");
                continue;
            }
            std::vector<ProbeQuestion> made;
            std::vector<std::string> asked;
            const std::size_t attempts = ability == MemoryAbility::Abstention ? cap : candidates.size();
            for (std::size_t i = 0; i < attempts && made.size() < cap; ++i) {
                const auto& c = candidates[std::min(i, candidates.size() - 1)];
                try {
                    auto p = generate_probe(c, conv, plans, asked);
                    p.id = name + "_" + std::to_string(made.size() + 1);
                    asked.push_back(p.question);
                    made.push_back(std::move(p));
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::Malformed) throw;
                    log_warn(name + " candidate " + std::to_string(i) + " skipped: " + e.what());
                }
            }
            if (made.size() < cap) {
                log_warn(name + ": " + std::to_string(made.size()) + " of " + std::to_string(cap) + " probes generated");
            }
            out.insert(out.end(), made.begin(), made.end());
        }
        return out;
    }

private:
    std::shared_ptr<Gateway> gateway_;
    ProbeSettings settings_;
};

// Keeps at most `cap` non-rejected probes per ability, preserving order.
inline std::vector<ProbeQuestion> select_for_evaluation(const std::vector<ProbeQuestion>& probes, std::size_t cap) {
    std::map<MemoryAbility, std::size_t> count;
    std::vector<ProbeQuestion> out;
    for (const auto& p : probes) {
        if (p.review_status == ReviewStatus::Rejected) continue;
        if (count[p.ability]++ < cap) out.push_back(p);
    }
    return out;
}

}  // namespace memlab
