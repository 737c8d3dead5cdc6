#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace memlab {

// UTF-8 helpers. Token budgets are counted in code points, never splitting one.

inline bool is_utf8_continuation(char c) {
    return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

inline std::size_t utf8_length(std::string_view text) {
    std::size_t n = 0;
    for (char c : text) {
        if (!is_utf8_continuation(c)) ++n;
    }
    return n;
}

// Byte offset of the code point with the given index (text.size() when past the end).
inline std::size_t utf8_offset(std::string_view text, std::size_t code_points) {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (is_utf8_continuation(text[i])) continue;
        if (seen == code_points) return i;
        ++seen;
    }
    return text.size();
}

inline std::string_view trim(std::string_view s) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    return to_lower(s.substr(0, prefix.size())) == to_lower(prefix);
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Strips "1.", "2)", "-", "*" or a bullet glyph from the start of a list item.
inline std::string_view strip_list_marker(std::string_view line) {
    line = trim(line);
    if (line.starts_with("\xE2\x80\xA2")) return trim(line.substr(3));
    if (!line.empty() && (line.front() == '-' || line.front() == '*')) return trim(line.substr(1));
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) return trim(line.substr(i + 1));
    return line;
}

// Tokenizer contract: a deterministic, monotone (prefix never longer) counter.
using Tokenizer = std::function<std::size_t(std::string_view)>;

// Default approximation: ceil(code points / 4).
inline std::size_t approx_token_count(std::string_view text) {
    return (utf8_length(text) + 3) / 4;
}

inline Tokenizer default_tokenizer() { return approx_token_count; }

// Longest prefix whose token count fits the budget.
inline std::string truncate_to_tokens(std::string_view text, std::size_t budget, const Tokenizer& tok) {
    if (tok(text) <= budget) return std::string(text);
    std::size_t lo = 0, hi = utf8_length(text);
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo + 1) / 2;
        if (tok(text.substr(0, utf8_offset(text, mid))) <= budget) lo = mid;
        else hi = mid - 1;
    }
    return std::string(text.substr(0, utf8_offset(text, lo)));
}

// Longest suffix whose token count fits the budget (recency truncation).
inline std::string keep_last_tokens(std::string_view text, std::size_t budget, const Tokenizer& tok) {
    if (tok(text) <= budget) return std::string(text);
    std::size_t total = utf8_length(text);
    std::size_t lo = 0, hi = total;
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo + 1) / 2;
        if (tok(text.substr(utf8_offset(text, total - mid))) <= budget) lo = mid;
        else hi = mid - 1;
    }
    return std::string(text.substr(utf8_offset(text, total - lo)));
}

}  // namespace memlab
