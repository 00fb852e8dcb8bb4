// SPDX-License-Identifier: Apache-2.0
#pragma once

// Rule-based temporal cue extraction: lexicon lookup of temporal markers,
// reference-event extraction and implicit positional cues.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lgttp/error.hpp"

namespace lgttp {

enum class Category { Precedence, Subsequence, Cooccurrence };
enum class CueSource { Explicit, Implicit };

inline constexpr std::string_view to_string(Category c) {
    switch (c) {
        case Category::Precedence: return "precedence";
        case Category::Subsequence: return "subsequence";
        case Category::Cooccurrence: return "cooccurrence";
    }
    return "unknown";
}

inline constexpr std::string_view to_string(CueSource s) {
    return s == CueSource::Explicit ? "explicit" : "implicit";
}

inline std::optional<Category> parse_category(std::string_view name) {
    if (name == "precedence") return Category::Precedence;
    if (name == "subsequence") return Category::Subsequence;
    if (name == "cooccurrence") return Category::Cooccurrence;
    return std::nullopt;
}

/// Half-open byte range [begin, end) into a query string.
struct ByteSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool operator==(const ByteSpan&) const = default;
};

struct Query {
    std::string id;
    std::string text;
};

struct TemporalCue {
    Category category = Category::Precedence;
    std::string marker;
    ByteSpan marker_span;
    std::optional<std::string> reference_event;
    CueSource source = CueSource::Explicit;

    bool operator==(const TemporalCue&) const = default;
};

namespace detail {

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
    return out;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Bytes >= 0x80 count as word characters so UTF-8 words stay whole.
inline bool is_word_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u == '\'' || u >= 0x80;
}

inline bool is_clause_boundary(char c) {
    return c == ',' || c == ';' || c == '.' || c == '!' || c == '?' || c == ':' || c == '\n';
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

/// Lowercases and collapses internal whitespace runs to one space.
inline std::string normalize_phrase(std::string_view phrase) {
    std::string out;
    bool pending_space = false;
    for (char c : trim(phrase)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(ascii_lower(c));
    }
    return out;
}

struct Word {
    std::size_t begin;
    std::size_t end;
    std::string lower;
};

inline std::vector<Word> tokenize_words(std::string_view text) {
    std::vector<Word> words;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_word_char(text[i])) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < text.size() && is_word_char(text[i])) ++i;
        words.push_back({start, i, lowercase(text.substr(start, i - start))});
    }
    return words;
}

inline bool only_space_between(std::string_view text, std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to; ++i) {
        if (!is_space(text[i])) return false;
    }
    return true;
}

inline std::size_t phrase_word_count(std::string_view phrase) {
    return static_cast<std::size_t>(std::count(phrase.begin(), phrase.end(), ' ')) + 1;
}

}  // namespace detail

class MarkerLexicon {
public:
    using Map = std::map<std::string, Category, std::less<>>;

    void add_explicit(std::string_view phrase, Category c) { insert(m_explicit, m_implicit, phrase, c); }
    void add_implicit(std::string_view phrase, Category c) { insert(m_implicit, m_explicit, phrase, c); }

    std::optional<Category> lookup(std::string_view phrase) const { return find(m_explicit, phrase); }
    std::optional<Category> lookup_implicit(std::string_view phrase) const { return find(m_implicit, phrase); }

    const Map& explicit_entries() const { return m_explicit; }
    const Map& implicit_entries() const { return m_implicit; }

    std::size_t max_explicit_words() const { return max_words(m_explicit); }
    std::size_t max_implicit_words() const { return max_words(m_implicit); }

private:
    static void insert(Map& into, const Map& other, std::string_view phrase, Category c) {
        std::string key = detail::normalize_phrase(phrase);
        require(!key.empty(), "lexicon phrase must be non-empty");
        require(other.find(key) == other.end(), "lexicon phrase '" + key + "' appears in both explicit and implicit maps");
        into[std::move(key)] = c;
    }

    static std::optional<Category> find(const Map& m, std::string_view phrase) {
        const auto it = m.find(detail::normalize_phrase(phrase));
        if (it == m.end()) return std::nullopt;
        return it->second;
    }

    static std::size_t max_words(const Map& m) {
        std::size_t n = 0;
        for (const auto& [phrase, cat] : m) n = std::max(n, detail::phrase_word_count(phrase));
        return n;
    }

    Map m_explicit;
    Map m_implicit;
};

inline MarkerLexicon make_default_lexicon() {
    MarkerLexicon lex;
    for (const char* p : {"before", "prior to", "until", "till", "by the time", "earlier than", "ahead of"}) {
        lex.add_explicit(p, Category::Precedence);
    }
    for (const char* p : {"after", "following", "once", "then", "subsequently", "afterwards", "afterward", "later than"}) {
        lex.add_explicit(p, Category::Subsequence);
    }
    for (const char* p : {"during", "while", "when", "as", "throughout", "meanwhile", "at the same time as"}) {
        lex.add_explicit(p, Category::Cooccurrence);
    }
    for (const char* p : {"beginning", "start", "opening", "first part"}) {
        lex.add_implicit(p, Category::Precedence);
    }
    for (const char* p : {"end", "ending", "finally", "last part"}) {
        lex.add_implicit(p, Category::Subsequence);
    }
    for (const char* p : {"middle", "midway", "halfway"}) {
        lex.add_implicit(p, Category::Cooccurrence);
    }
    return lex;
}

inline const MarkerLexicon& default_lexicon() {
    static const MarkerLexicon lex = make_default_lexicon();
    return lex;
}

/// Builds a lexicon from {"explicit": {phrase: category}, "implicit": {...}}.
inline MarkerLexicon lexicon_from_json(const nlohmann::json& doc) {
    require(doc.is_object(), "lexicon document must be a JSON object");
    MarkerLexicon lex;
    auto load = [&](const char* key, bool is_explicit) {
        if (!doc.contains(key)) return;
        const auto& section = doc.at(key);
        require(section.is_object(), std::string("lexicon section '") + key + "' must be an object");
        for (const auto& [phrase, value] : section.items()) {
            require(value.is_string(), "lexicon category for '" + phrase + "' must be a string");
            const auto cat = parse_category(value.get<std::string>());
            require(cat.has_value(), "unknown lexicon category '" + value.get<std::string>() + "'");
            if (is_explicit) {
                lex.add_explicit(phrase, *cat);
            } else {
                lex.add_implicit(phrase, *cat);
            }
        }
    };
    require(doc.contains("explicit") || doc.contains("implicit"), "lexicon needs an 'explicit' or 'implicit' section");
    load("explicit", true);
    load("implicit", false);
    return lex;
}

inline nlohmann::json lexicon_to_json(const MarkerLexicon& lex) {
    nlohmann::json doc = {{"explicit", nlohmann::json::object()}, {"implicit", nlohmann::json::object()}};
    for (const auto& [phrase, c] : lex.explicit_entries()) doc["explicit"][phrase] = std::string(to_string(c));
    for (const auto& [phrase, c] : lex.implicit_entries()) doc["implicit"][phrase] = std::string(to_string(c));
    return doc;
}

inline MarkerLexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open lexicon file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidInput, "lexicon file '" + path + "' is not valid JSON: " + e.what());
    }
    return lexicon_from_json(doc);
}

inline void validate(const Query& q) {
    require(!detail::trim(q.text).empty(), "query text is empty");
}

namespace detail {

struct RawMatch {
    Category category;
    ByteSpan span;
};

// "when" and "as" double as non-temporal words; they only count when at least
// two more words follow before the clause ends.
inline bool ambiguous_marker_ok(std::string_view text, const std::vector<Word>& words, std::size_t next_word) {
    std::size_t count = 0;
    std::size_t pos = next_word;
    std::size_t prev_end = next_word > 0 ? words[next_word - 1].end : 0;
    while (pos < words.size() && count < 2) {
        for (std::size_t i = prev_end; i < words[pos].begin; ++i) {
            if (is_clause_boundary(text[i])) return false;
        }
        ++count;
        prev_end = words[pos].end;
        ++pos;
    }
    return count >= 2;
}

// Longest-match-first, left-to-right, non-overlapping scan over word tokens.
template <typename Lookup>
std::vector<RawMatch> scan(std::string_view text, std::size_t max_words, Lookup&& lookup, bool check_ambiguous) {
    std::vector<RawMatch> matches;
    const auto words = tokenize_words(text);
    std::size_t k = 0;
    while (k < words.size()) {
        bool matched = false;
        const std::size_t longest = std::min(max_words, words.size() - k);
        for (std::size_t len = longest; len >= 1; --len) {
            std::string phrase = words[k].lower;
            bool contiguous = true;
            for (std::size_t j = 1; j < len; ++j) {
                if (!only_space_between(text, words[k + j - 1].end, words[k + j].begin)) {
                    contiguous = false;
                    break;
                }
                phrase += ' ';
                phrase += words[k + j].lower;
            }
            if (!contiguous) continue;
            const std::optional<Category> cat = lookup(phrase);
            if (!cat) continue;
            if (check_ambiguous && (phrase == "when" || phrase == "as") && !ambiguous_marker_ok(text, words, k + len)) {
                continue;
            }
            matches.push_back({*cat, {words[k].begin, words[k + len - 1].end}});
            k += len;
            matched = true;
            break;
        }
        if (!matched) ++k;
    }
    return matches;
}

inline std::vector<RawMatch> scan_explicit(std::string_view text, const MarkerLexicon& lex) {
    return scan(text, lex.max_explicit_words(), [&](std::string_view p) { return lex.lookup(p); }, true);
}

inline std::optional<std::string> reference_after(std::string_view text, ByteSpan span, const std::vector<RawMatch>& markers) {
    std::size_t stop = text.size();
    for (const auto& m : markers) {
        if (m.span.begin >= span.end) {
            stop = std::min(stop, m.span.begin);
            break;
        }
    }
    for (std::size_t i = span.end; i < stop; ++i) {
        if (is_clause_boundary(text[i])) {
            stop = i;
            break;
        }
    }
    const std::string_view event = trim(text.substr(span.end, stop - span.end));
    if (event.empty()) return std::nullopt;
    return std::string(event);
}

}  // namespace detail

/// Text following the marker up to the first clause boundary or the next
/// explicit marker, trimmed; absent when nothing is left.
inline std::optional<std::string> extract_reference_event(const Query& q, ByteSpan cue_span,
                                                          const MarkerLexicon& lex = default_lexicon()) {
    require(cue_span.begin <= cue_span.end && cue_span.end <= q.text.size(), "cue span out of bounds");
    return detail::reference_after(q.text, cue_span, detail::scan_explicit(q.text, lex));
}

inline std::vector<TemporalCue> detect_markers(const Query& q, const MarkerLexicon& lex = default_lexicon()) {
    validate(q);
    const auto matches = detail::scan_explicit(q.text, lex);
    std::vector<TemporalCue> cues;
    cues.reserve(matches.size());
    for (const auto& m : matches) {
        cues.push_back({m.category, q.text.substr(m.span.begin, m.span.size()), m.span,
                        detail::reference_after(q.text, m.span, matches), CueSource::Explicit});
    }
    return cues;
}

inline std::vector<TemporalCue> resolve_implicit_cues(const Query& q, const MarkerLexicon& lex = default_lexicon()) {
    validate(q);
    const auto matches = detail::scan(
        q.text, lex.max_implicit_words(), [&](std::string_view p) { return lex.lookup_implicit(p); }, false);
    std::vector<TemporalCue> cues;
    cues.reserve(matches.size());
    for (const auto& m : matches) {
        cues.push_back({m.category, q.text.substr(m.span.begin, m.span.size()), m.span, std::nullopt, CueSource::Implicit});
    }
    return cues;
}

/// Explicit and implicit cues merged in span order.
inline std::vector<TemporalCue> extract_cues(const Query& q, const MarkerLexicon& lex = default_lexicon()) {
    auto cues = detect_markers(q, lex);
    auto implicit = resolve_implicit_cues(q, lex);
    cues.insert(cues.end(), implicit.begin(), implicit.end());
    std::stable_sort(cues.begin(), cues.end(), [](const TemporalCue& a, const TemporalCue& b) {
        return a.marker_span.begin < b.marker_span.begin;
    });
    return cues;
}

inline nlohmann::json to_json(const TemporalCue& cue) {
    nlohmann::json j = {
        {"category", std::string(to_string(cue.category))},
        {"marker", cue.marker},
        {"span", {cue.marker_span.begin, cue.marker_span.end}},
        {"source", std::string(to_string(cue.source))},
    };
    j["reference_event"] = cue.reference_event ? nlohmann::json(*cue.reference_event) : nlohmann::json(nullptr);
    return j;
}

}  // namespace lgttp
