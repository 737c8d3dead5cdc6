#pragma once

#include "memlab/error.hpp"
#include "memlab/text.hpp"

#include <array>
#include <cctype>
#include <compare>
#include <cstdio>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace memlab {

// ---------------------------------------------------------------------------
// Conversations
// ---------------------------------------------------------------------------

enum class Role { User, Assistant };

inline std::string_view to_string(Role r) { return r == Role::User ? "user" : "assistant"; }

struct Turn {
    int index = 0;
    Role role = Role::User;
    std::string content;
    std::size_t token_count = 0;
};

enum class TargetLength { L128K, L500K, L1M, L10M };
enum class Category { General, Coding, Math };

struct ConversationMetadata {
    TargetLength target_length = TargetLength::L128K;
    Category category = Category::General;
};

struct Conversation {
    std::string id;
    std::vector<Turn> turns;
    ConversationMetadata metadata;

    // Appends with index and token count filled in.
    Turn& append(Role role, std::string content, const Tokenizer& tok = default_tokenizer()) {
        Turn t;
        t.index = static_cast<int>(turns.size());
        t.role = role;
        t.token_count = tok(content);
        t.content = std::move(content);
        turns.push_back(std::move(t));
        return turns.back();
    }
};

struct ExchangePair {
    Turn user_turn;
    Turn assistant_turn;

    int pair_index() const { return user_turn.index / 2; }

    // Verbatim dialogue segment stored as the retrievable value.
    std::string segment() const {
        return "User: " + user_turn.content + "\nAssistant: " + assistant_turn.content;
    }
};

struct Violation {
    int turn_index = -1;  // -1 for conversation-level issues
    std::string message;
};

// Violations are data; an empty result means the conversation is well formed.
inline std::vector<Violation> validate_conversation(const Conversation& conv,
                                                    const Tokenizer* tok = nullptr) {
    std::vector<Violation> report;
    if (!conv.turns.empty() && conv.turns.front().role != Role::User) {
        report.push_back({0, "must begin with User"});
    }
    for (std::size_t i = 0; i < conv.turns.size(); ++i) {
        const auto& t = conv.turns[i];
        const int pos = static_cast<int>(i);
        if (t.index != pos) {
            report.push_back({pos, "index " + std::to_string(t.index) + " does not match position " +
                                       std::to_string(pos)});
        }
        if (trim(t.content).empty()) report.push_back({pos, "content must be non-empty"});
        if (i > 0 && t.role == conv.turns[i - 1].role) {
            report.push_back({pos, "roles must alternate"});
        }
        if (tok && (*tok)(t.content) != t.token_count) {
            report.push_back({pos, "token_count does not match content"});
        }
    }
    return report;
}

inline std::vector<ExchangePair> group_exchanges(const Conversation& conv) {
    if (conv.turns.size() % 2 != 0) {
        throw Error(ErrorCode::OddTurnCount,
                    "conversation has " + std::to_string(conv.turns.size()) + " turns");
    }
    std::vector<ExchangePair> pairs;
    pairs.reserve(conv.turns.size() / 2);
    for (std::size_t i = 0; i < conv.turns.size(); i += 2) {
        pairs.push_back({conv.turns[i], conv.turns[i + 1]});
    }
    return pairs;
}

inline std::vector<Turn> flatten(const std::vector<ExchangePair>& pairs) {
    std::vector<Turn> turns;
    turns.reserve(pairs.size() * 2);
    for (const auto& p : pairs) {
        turns.push_back(p.user_turn);
        turns.push_back(p.assistant_turn);
    }
    return turns;
}

// ---------------------------------------------------------------------------
// Memory abilities
// ---------------------------------------------------------------------------

enum class MemoryAbility {
    Abstention,
    ContradictionResolution,
    EventOrdering,
    InformationExtraction,
    InstructionFollowing,
    KnowledgeUpdate,
    MultiHopReasoning,
    PreferenceFollowing,
    Summarization,
    TemporalReasoning,
};

inline constexpr std::array<MemoryAbility, 10> kAllAbilities = {
    MemoryAbility::Abstention,           MemoryAbility::ContradictionResolution,
    MemoryAbility::EventOrdering,        MemoryAbility::InformationExtraction,
    MemoryAbility::InstructionFollowing, MemoryAbility::KnowledgeUpdate,
    MemoryAbility::MultiHopReasoning,    MemoryAbility::PreferenceFollowing,
    MemoryAbility::Summarization,        MemoryAbility::TemporalReasoning,
};

// Serialized names are part of every file format; never rename.
inline std::string_view to_string(MemoryAbility a) {
    switch (a) {
        case MemoryAbility::Abstention: return "abstention";
        case MemoryAbility::ContradictionResolution: return "contradiction_resolution";
        case MemoryAbility::EventOrdering: return "event_ordering";
        case MemoryAbility::InformationExtraction: return "information_extraction";
        case MemoryAbility::InstructionFollowing: return "instruction_following";
        case MemoryAbility::KnowledgeUpdate: return "knowledge_update";
        case MemoryAbility::MultiHopReasoning: return "multi_hop_reasoning";
        case MemoryAbility::PreferenceFollowing: return "preference_following";
        case MemoryAbility::Summarization: return "summarization";
        case MemoryAbility::TemporalReasoning: return "temporal_reasoning";
    }
    return "";
}

inline std::optional<MemoryAbility> parse_ability(std::string_view name) {
    for (auto a : kAllAbilities) {
        if (to_string(a) == name) return a;
    }
    return std::nullopt;
}

inline std::string_view display_name(MemoryAbility a) {
    switch (a) {
        case MemoryAbility::Abstention: return "Abstention";
        case MemoryAbility::ContradictionResolution: return "Contradiction Resolution";
        case MemoryAbility::EventOrdering: return "Event Ordering";
        case MemoryAbility::InformationExtraction: return "Information Extraction";
        case MemoryAbility::InstructionFollowing: return "Instruction Following";
        case MemoryAbility::KnowledgeUpdate: return "Knowledge Update";
        case MemoryAbility::MultiHopReasoning: return "Multi-hop Reasoning";
        case MemoryAbility::PreferenceFollowing: return "Preference Following";
        case MemoryAbility::Summarization: return "Summarization";
        case MemoryAbility::TemporalReasoning: return "Temporal Reasoning";
    }
    return "";
}

// ---------------------------------------------------------------------------
// Calendar dates used by seeds, timelines and time anchors
// ---------------------------------------------------------------------------

struct Date {
    std::chrono::year_month_day ymd{};

    static std::optional<Date> parse_iso(std::string_view s) {
        s = trim(s);
        if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        int y = 0;
        unsigned m = 0, d = 0;
        auto ok = [](auto r) { return r.ec == std::errc{}; };
        if (!ok(std::from_chars(s.data(), s.data() + 4, y)) ||
            !ok(std::from_chars(s.data() + 5, s.data() + 7, m)) ||
            !ok(std::from_chars(s.data() + 8, s.data() + 10, d))) {
            return std::nullopt;
        }
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok()) return std::nullopt;
        return Date{ymd};
    }

    std::chrono::sys_days days() const { return std::chrono::sys_days{ymd}; }

    Date plus_days(int n) const { return Date{std::chrono::year_month_day{days() + std::chrono::days{n}}}; }

    std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        return buf;
    }

    friend bool operator==(const Date& a, const Date& b) { return a.ymd == b.ymd; }
    friend auto operator<=>(const Date& a, const Date& b) { return a.days() <=> b.days(); }
};

// Finds the first recognizable date in free text: ISO "2024-03-25", "March 25, 2024",
// "25 March 2024" or "March 2024" (first of month).
inline std::optional<Date> find_date(std::string_view text) {
    for (std::size_t i = 0; i + 10 <= text.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(text[i]))) {
            if (auto d = Date::parse_iso(text.substr(i, 10))) return d;
        }
    }
    static constexpr std::array<std::string_view, 12> months = {
        "january", "february", "march",     "april",   "may",      "june",
        "july",    "august",   "september", "october", "november", "december"};
    const std::string lower = to_lower(text);
    auto read_int = [&](std::size_t& pos, int max_digits) -> std::optional<int> {
        while (pos < lower.size() && (lower[pos] == ' ' || lower[pos] == ',')) ++pos;
        int value = 0, digits = 0;
        while (pos < lower.size() && digits < max_digits && std::isdigit(static_cast<unsigned char>(lower[pos]))) {
            value = value * 10 + (lower[pos] - '0');
            ++pos;
            ++digits;
        }
        if (digits == 0) return std::nullopt;
        return value;
    };
    std::optional<Date> best;
    std::size_t best_pos = std::string::npos;
    for (unsigned mi = 0; mi < months.size(); ++mi) {
        for (std::size_t at = lower.find(months[mi]); at != std::string::npos;
             at = lower.find(months[mi], at + 1)) {
            if (at >= best_pos) break;
            std::size_t pos = at + months[mi].size();
            std::chrono::month month{mi + 1};
            std::optional<Date> found;
            if (at > 0) {
                // "25 March 2024"
                std::size_t back = at;
                while (back > 0 && lower[back - 1] == ' ') --back;
                std::size_t digits_end = back;
                while (back > 0 && std::isdigit(static_cast<unsigned char>(lower[back - 1]))) --back;
                if (back < digits_end && digits_end - back <= 2) {
                    unsigned day = static_cast<unsigned>(std::stoi(lower.substr(back, digits_end - back)));
                    std::size_t yp = pos;
                    if (auto year = read_int(yp, 4); year && *year >= 1000) {
                        found = Date{{std::chrono::year{*year}, month, std::chrono::day{day}}};
                    }
                }
            }
            std::size_t probe = pos;
            if (!found) {
                if (auto first = read_int(probe, 4)) {
                    if (*first >= 1000) {
                        found = Date{{std::chrono::year{*first}, month, std::chrono::day{1}}};
                    } else if (auto year = read_int(probe, 4); year && *year >= 1000) {
                        found = Date{{std::chrono::year{*year}, month, std::chrono::day{static_cast<unsigned>(*first)}}};
                    }
                }
            }
            if (found && found->ymd.ok()) {
                best = found;
                best_pos = at;
            }
        }
    }
    return best;
}

struct Timeline {
    Date start;
    Date end;
};

// ---------------------------------------------------------------------------
// Synthesis scaffold: seeds, profiles, plans
// ---------------------------------------------------------------------------

struct Seed {
    std::string domain;
    std::string title;
    std::string theme;
    std::vector<std::string> subtopics;
    Timeline timeline;
};

inline std::vector<std::string> validate_seed(const Seed& s) {
    std::vector<std::string> problems;
    if (s.timeline.end < s.timeline.start) problems.push_back("timeline start after end");
    if (s.subtopics.empty()) problems.push_back("subtopics must be non-empty");
    return problems;
}

inline constexpr std::array<std::string_view, 16> kMbtiTypes = {
    "ISTJ", "ISFJ", "INFJ", "INTJ", "ISTP", "ISFP", "INFP", "INTP",
    "ESTP", "ESFP", "ENFP", "ENTP", "ESTJ", "ESFJ", "ENFJ", "ENTJ"};

struct UserProfile {
    std::string name;
    int age = 30;
    std::string gender;
    std::string location;
    std::string profession;
    std::string personality;
    std::vector<std::string> mbti_combination;
};

enum class Relation { Parent, Partner, Child, Friend, Acquaintance };

inline std::string_view to_string(Relation r) {
    switch (r) {
        case Relation::Parent: return "parent";
        case Relation::Partner: return "partner";
        case Relation::Child: return "child";
        case Relation::Friend: return "friend";
        case Relation::Acquaintance: return "acquaintance";
    }
    return "";
}

struct Person {
    std::string name;
    Relation relation = Relation::Friend;
    int age = 0;
};

struct RelationshipGraph {
    std::vector<Person> persons;
};

inline std::vector<std::string> validate_relationships(const RelationshipGraph& g, const UserProfile& user,
                                                       int min_parent_gap = 15) {
    std::vector<std::string> problems;
    for (const auto& p : g.persons) {
        if (p.relation == Relation::Parent && p.age < user.age + min_parent_gap) {
            problems.push_back("parent " + p.name + " is implausibly young");
        }
        if (p.relation == Relation::Child && p.age + min_parent_gap > user.age) {
            problems.push_back("child " + p.name + " is implausibly old");
        }
    }
    return problems;
}

enum class BulletKind { Normal, Contradiction, Update, Instruction };

inline std::string_view to_string(BulletKind k) {
    switch (k) {
        case BulletKind::Normal: return "normal";
        case BulletKind::Contradiction: return "contradiction";
        case BulletKind::Update: return "update";
        case BulletKind::Instruction: return "instruction";
    }
    return "";
}

inline std::optional<BulletKind> parse_bullet_kind(std::string_view s) {
    const auto lower = to_lower(trim(s));
    for (auto k : {BulletKind::Normal, BulletKind::Contradiction, BulletKind::Update, BulletKind::Instruction}) {
        if (lower == to_string(k)) return k;
    }
    if (lower == "knowledge_update" || lower == "information_update") return BulletKind::Update;
    if (lower == "instruction_following") return BulletKind::Instruction;
    if (lower == "contradiction_resolution") return BulletKind::Contradiction;
    return std::nullopt;
}

struct BulletPoint {
    std::string narrative_label;
    std::string description;
    BulletKind kind = BulletKind::Normal;
    // Turns synthesized from this bullet, recorded while the dialogue is generated.
    std::vector<int> turn_ids;
};

struct SubPlan {
    std::string time_anchor;
    std::vector<BulletPoint> bullets;
};

struct Plan {
    int seed_ref = 0;
    std::vector<SubPlan> sub_plans;
    std::string summary;
};

struct BulletRef {
    int plan = 0;
    int sub_plan = 0;
    int bullet = 0;

    friend bool operator==(const BulletRef&, const BulletRef&) = default;
    friend auto operator<=>(const BulletRef&, const BulletRef&) = default;
};

inline const BulletPoint& resolve(const std::vector<Plan>& plans, const BulletRef& ref) {
    return plans.at(static_cast<std::size_t>(ref.plan))
        .sub_plans.at(static_cast<std::size_t>(ref.sub_plan))
        .bullets.at(static_cast<std::size_t>(ref.bullet));
}

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

struct Nugget {
    std::string text;
    friend bool operator==(const Nugget&, const Nugget&) = default;
};

enum class ReviewStatus { Unreviewed, Accepted, Rejected };

inline std::string_view to_string(ReviewStatus s) {
    switch (s) {
        case ReviewStatus::Unreviewed: return "unreviewed";
        case ReviewStatus::Accepted: return "accepted";
        case ReviewStatus::Rejected: return "rejected";
    }
    return "";
}

inline std::optional<ReviewStatus> parse_review_status(std::string_view s) {
    for (auto v : {ReviewStatus::Unreviewed, ReviewStatus::Accepted, ReviewStatus::Rejected}) {
        if (to_lower(s) == to_string(v)) return v;
    }
    return std::nullopt;
}

// Source turn ids are either a flat list or named groups such as
// first_statement/second_statement.
struct SourceTurnIds {
    bool grouped = false;
    std::vector<std::pair<std::string, std::vector<int>>> groups;

    static SourceTurnIds flat(std::vector<int> ids) {
        SourceTurnIds s;
        s.groups.emplace_back("", std::move(ids));
        return s;
    }

    std::vector<int> all() const {
        std::vector<int> out;
        for (const auto& [_, ids] : groups) out.insert(out.end(), ids.begin(), ids.end());
        return out;
    }
};

struct ProbeQuestion {
    std::string id;
    MemoryAbility ability = MemoryAbility::InformationExtraction;
    std::string question;
    std::string ideal_answer;
    std::vector<Nugget> rubric;
    std::vector<std::string> ordered_events;
    SourceTurnIds source_turn_ids;
    ReviewStatus review_status = ReviewStatus::Unreviewed;
};

inline std::vector<std::string> validate_probe(const ProbeQuestion& p, std::size_t turn_count) {
    std::vector<std::string> problems;
    if (p.rubric.empty() && !(p.ability == MemoryAbility::EventOrdering && !p.ordered_events.empty())) {
        problems.push_back("rubric must be non-empty");
    }
    for (int id : p.source_turn_ids.all()) {
        if (id < 0 || static_cast<std::size_t>(id) >= turn_count) {
            problems.push_back("source turn " + std::to_string(id) + " does not exist");
        }
    }
    return problems;
}

}  // namespace memlab
