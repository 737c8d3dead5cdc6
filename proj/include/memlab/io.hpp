#pragma once

// JSON and JSONL encodings of the domain types.

#include "memlab/domain.hpp"
#include "memlab/error.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace memlab {

using json = nlohmann::json;

// ---- files ----------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes through a temporary and renames so readers never see half a file.
inline void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
        out << content;
        if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

inline json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Malformed, path.string() + ": " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::vector<json> rows;
    const auto text = read_file(path);
    int line_no = 0;
    for (auto line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::Malformed, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

inline std::string to_jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

// First balanced JSON object or array embedded in model output (code fences
// and surrounding prose are ignored). Throws Malformed when none parses.
inline json extract_json(std::string_view text, char open = '{') {
    const char close = open == '{' ? '}' : ']';
    for (auto start = text.find(open); start != std::string_view::npos; start = text.find(open, start + 1)) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{' || c == '[') ++depth;
            else if (c == '}' || c == ']') {
                if (--depth == 0) {
                    if (c != close) break;
                    try {
                        return json::parse(text.substr(start, i - start + 1));
                    } catch (const json::parse_error&) {
                        break;
                    }
                }
            }
        }
    }
    throw Error(ErrorCode::Malformed, std::string("no JSON ") + (open == '{' ? "object" : "array") + " in model output");
}

// ---- enums ----------------------------------------------------------------

inline std::string_view to_string(TargetLength l) {
    switch (l) {
        case TargetLength::L128K: return "128k";
        case TargetLength::L500K: return "500k";
        case TargetLength::L1M: return "1m";
        case TargetLength::L10M: return "10m";
    }
    return "";
}

inline std::optional<TargetLength> parse_target_length(std::string_view s) {
    const auto lower = to_lower(s);
    for (auto l : {TargetLength::L128K, TargetLength::L500K, TargetLength::L1M, TargetLength::L10M}) {
        if (lower == to_string(l)) return l;
    }
    return std::nullopt;
}

inline std::string_view to_string(Category c) {
    switch (c) {
        case Category::General: return "general";
        case Category::Coding: return "coding";
        case Category::Math: return "math";
    }
    return "";
}

inline std::optional<Category> parse_category(std::string_view s) {
    const auto lower = to_lower(s);
    for (auto c : {Category::General, Category::Coding, Category::Math}) {
        if (lower == to_string(c)) return c;
    }
    return std::nullopt;
}

inline void to_json(json& j, MemoryAbility a) { j = std::string(to_string(a)); }
inline void from_json(const json& j, MemoryAbility& a) {
    auto parsed = parse_ability(j.get<std::string>());
    if (!parsed) throw Error(ErrorCode::Malformed, "unknown ability " + j.dump());
    a = *parsed;
}

// ---- conversation ---------------------------------------------------------

inline json turn_to_json(const Turn& t) {
    return json{{"idx", t.index}, {"role", std::string(to_string(t.role))}, {"content", t.content}};
}

inline std::string conversation_to_jsonl(const Conversation& conv) {
    std::string out;
    for (const auto& t : conv.turns) {
        out += turn_to_json(t).dump();
        out += '\n';
    }
    return out;
}

inline Conversation conversation_from_jsonl(std::string_view text, std::string id = {},
                                            const Tokenizer& tok = default_tokenizer()) {
    Conversation conv;
    conv.id = std::move(id);
    int line_no = 0;
    for (auto line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = json::parse(line);
            Turn t;
            t.index = j.at("idx").get<int>();
            const auto role = j.at("role").get<std::string>();
            if (role == "user") t.role = Role::User;
            else if (role == "assistant") t.role = Role::Assistant;
            else throw Error(ErrorCode::Malformed, "line " + std::to_string(line_no) + ": bad role " + role);
            t.content = j.at("content").get<std::string>();
            t.token_count = tok(t.content);
            conv.turns.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Malformed, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return conv;
}

inline Conversation load_conversation(const std::filesystem::path& path) {
    return conversation_from_jsonl(read_file(path), path.parent_path().filename().string());
}

// ---- seeds, profiles, plans -------------------------------------------------

inline void to_json(json& j, const Date& d) { j = d.iso(); }
inline void from_json(const json& j, Date& d) {
    auto parsed = Date::parse_iso(j.get<std::string>());
    if (!parsed) throw Error(ErrorCode::Malformed, "bad date " + j.dump());
    d = *parsed;
}

inline void to_json(json& j, const Timeline& t) { j = json{{"start", t.start}, {"end", t.end}}; }
inline void from_json(const json& j, Timeline& t) {
    j.at("start").get_to(t.start);
    j.at("end").get_to(t.end);
}

inline void to_json(json& j, const Seed& s) {
    j = json{{"domain", s.domain},       {"title", s.title},       {"theme", s.theme},
             {"subtopics", s.subtopics}, {"timeline", s.timeline}};
}
inline void from_json(const json& j, Seed& s) {
    s.domain = j.value("domain", "");
    s.title = j.value("title", "");
    s.theme = j.value("theme", "");
    s.subtopics = j.value("subtopics", std::vector<std::string>{});
    if (j.contains("timeline")) {
        j.at("timeline").get_to(s.timeline);
    } else {
        j.at("start").get_to(s.timeline.start);
        j.at("end").get_to(s.timeline.end);
    }
}

inline void to_json(json& j, const UserProfile& p) {
    j = json{{"name", p.name},         {"age", p.age},
             {"gender", p.gender},     {"location", p.location},
             {"profession", p.profession}, {"personality", p.personality},
             {"mbti_combination", p.mbti_combination}};
}
inline void from_json(const json& j, UserProfile& p) {
    p.name = j.value("name", "");
    p.age = j.value("age", 30);
    p.gender = j.value("gender", "");
    p.location = j.value("location", "");
    p.profession = j.value("profession", "");
    p.personality = j.value("personality", "");
    p.mbti_combination = j.value("mbti_combination", std::vector<std::string>{});
}

inline void to_json(json& j, const Person& p) {
    j = json{{"name", p.name}, {"relation", std::string(to_string(p.relation))}, {"age", p.age}};
}
inline void from_json(const json& j, Person& p) {
    p.name = j.at("name").get<std::string>();
    const auto rel = j.at("relation").get<std::string>();
    bool found = false;
    for (auto r : {Relation::Parent, Relation::Partner, Relation::Child, Relation::Friend, Relation::Acquaintance}) {
        if (rel == to_string(r)) {
            p.relation = r;
            found = true;
        }
    }
    if (!found) throw Error(ErrorCode::Malformed, "unknown relation " + rel);
    p.age = j.value("age", 0);
}

inline void to_json(json& j, const RelationshipGraph& g) { j = g.persons; }
inline void from_json(const json& j, RelationshipGraph& g) { g.persons = j.get<std::vector<Person>>(); }

inline void to_json(json& j, const BulletPoint& b) {
    j = json{{"narrative", b.narrative_label}, {"description", b.description},
             {"kind", std::string(to_string(b.kind))}, {"turn_ids", b.turn_ids}};
}
inline void from_json(const json& j, BulletPoint& b) {
    b.narrative_label = j.value("narrative", "");
    b.description = j.at("description").get<std::string>();
    auto kind = parse_bullet_kind(j.value("kind", "normal"));
    if (!kind) throw Error(ErrorCode::Malformed, "unknown bullet kind " + j.value("kind", ""));
    b.kind = *kind;
    b.turn_ids = j.value("turn_ids", std::vector<int>{});
}

inline void to_json(json& j, const SubPlan& s) { j = json{{"time_anchor", s.time_anchor}, {"bullets", s.bullets}}; }
inline void from_json(const json& j, SubPlan& s) {
    s.time_anchor = j.value("time_anchor", "");
    j.at("bullets").get_to(s.bullets);
}

inline void to_json(json& j, const Plan& p) {
    j = json{{"seed_ref", p.seed_ref}, {"summary", p.summary}, {"sub_plans", p.sub_plans}};
}
inline void from_json(const json& j, Plan& p) {
    p.seed_ref = j.value("seed_ref", 0);
    p.summary = j.value("summary", "");
    j.at("sub_plans").get_to(p.sub_plans);
}

inline void to_json(json& j, const BulletRef& r) { j = json::array({r.plan, r.sub_plan, r.bullet}); }
inline void from_json(const json& j, BulletRef& r) {
    r.plan = j.at(0).get<int>();
    r.sub_plan = j.at(1).get<int>();
    r.bullet = j.at(2).get<int>();
}

// ---- probes -----------------------------------------------------------------

inline json source_ids_to_json(const SourceTurnIds& s) {
    if (!s.grouped) return s.groups.empty() ? json::array() : json(s.groups.front().second);
    json obj = json::object();
    for (const auto& [name, ids] : s.groups) obj[name] = ids;
    return obj;
}

inline SourceTurnIds source_ids_from_json(const json& j) {
    SourceTurnIds s;
    auto ids_of = [](const json& arr) {
        std::vector<int> ids;
        for (const auto& v : arr) {
            if (v.is_number_integer()) ids.push_back(v.get<int>());
        }
        return ids;
    };
    if (j.is_object()) {
        s.grouped = true;
        for (const auto& [name, arr] : j.items()) s.groups.emplace_back(name, ids_of(arr));
    } else if (j.is_array()) {
        s.groups.emplace_back("", ids_of(j));
    }
    return s;
}

inline json probe_to_json(const ProbeQuestion& p) {
    json j{{"id", p.id},
           {"ability", p.ability},
           {"question", p.question},
           {"ideal_answer", p.ideal_answer}};
    json rubric = json::array();
    for (const auto& n : p.rubric) rubric.push_back(n.text);
    j["rubric"] = rubric;
    if (!p.ordered_events.empty()) j["ordering_tested"] = p.ordered_events;
    j["source_chat_ids"] = source_ids_to_json(p.source_turn_ids);
    j["review_status"] = std::string(to_string(p.review_status));
    return j;
}

// Accepts every answer-field spelling used by the reference probe shapes.
inline ProbeQuestion probe_from_json(const json& j, std::optional<MemoryAbility> ability = std::nullopt) {
    ProbeQuestion p;
    try {
        p.id = j.value("id", "");
        if (j.contains("ability")) p.ability = j.at("ability").get<MemoryAbility>();
        else if (ability) p.ability = *ability;
        else throw Error(ErrorCode::Malformed, "probe has no ability");
        p.question = j.at("question").get<std::string>();
        for (const char* key : {"ideal_answer", "answer", "ideal_response", "ideal_summary"}) {
            if (j.contains(key) && j[key].is_string()) {
                p.ideal_answer = j[key].get<std::string>();
                break;
            }
        }
        for (const auto& n : j.value("rubric", json::array())) p.rubric.push_back({n.get<std::string>()});
        for (const char* key : {"ordering_tested", "events", "ordered_events"}) {
            if (j.contains(key) && j[key].is_array()) {
                p.ordered_events = j[key].get<std::vector<std::string>>();
                break;
            }
        }
        p.source_turn_ids = source_ids_from_json(j.value("source_chat_ids", json::array()));
        auto status = parse_review_status(j.value("review_status", "unreviewed"));
        if (!status) throw Error(ErrorCode::Malformed, "bad review_status");
        p.review_status = *status;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("probe: ") + e.what());
    }
    return p;
}

// Probe files hold either one probe object or an array of them. A probe
// without an "ability" field takes it from the file name (knowledge_update.json).
inline std::vector<ProbeQuestion> load_probes(const std::filesystem::path& path) {
    std::vector<ProbeQuestion> out;
    auto load_one = [&](const std::filesystem::path& file) {
        auto j = read_json(file);
        const auto from_name = parse_ability(file.stem().string());
        if (j.is_array()) {
            for (const auto& item : j) out.push_back(probe_from_json(item, from_name));
        } else {
            out.push_back(probe_from_json(j, from_name));
        }
    };
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(path)) {
            if (e.path().extension() == ".json") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) load_one(f);
    } else {
        load_one(path);
    }
    return out;
}

}  // namespace memlab
