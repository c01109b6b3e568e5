#pragma once

// Brute-force reference implementations used to cross-check the library.
// Written from the metric definitions, sharing no code with src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// Valid UTF-8 only.
inline std::u32string utf8_to_u32(const std::string& s) {
    std::u32string out;
    for (std::size_t i = 0; i < s.size();) {
        const auto c = static_cast<unsigned char>(s[i]);
        int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
        char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
        for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        out.push_back(cp);
        i += len;
    }
    return out;
}

// Full (n+1) x (m+1) Wagner-Fischer table.
inline std::size_t edit_distance(const std::u32string& a, const std::u32string& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return d[a.size()][b.size()];
}

inline double nls(const std::string& pred, const std::string& gold) {
    const auto a = utf8_to_u32(pred), b = utf8_to_u32(gold);
    const std::size_t m = std::max(a.size(), b.size());
    if (m == 0) return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(m);
}

// A token is (doc, index). Retrieved chunks contribute every token they
// cover, duplicates included.
using Token = std::pair<std::string, std::size_t>;

struct Range {
    std::string doc;
    std::size_t start, end;
};

// Byte-granular tokens.
inline std::vector<Token> byte_tokens(const Range& r) {
    std::vector<Token> out;
    for (std::size_t b = r.start; b < r.end; ++b) out.emplace_back(r.doc, b);
    return out;
}

// Word-granular tokens: index of every whitespace-delimited word touched by
// the range.
inline std::vector<Token> word_tokens(const Range& r, const std::map<std::string, std::string>& docs) {
    std::vector<Token> out;
    const auto it = docs.find(r.doc);
    if (it == docs.end()) return byte_tokens(r);
    const std::string& t = it->second;
    std::size_t word = 0;
    std::size_t i = 0;
    auto space = [](char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; };
    while (i < t.size()) {
        while (i < t.size() && space(t[i])) ++i;
        if (i >= t.size()) break;
        std::size_t j = i;
        while (j < t.size() && !space(t[j])) ++j;
        if (r.start < r.end && i < r.end && r.start < j) out.emplace_back(r.doc, word);
        ++word;
        i = j;
    }
    return out;
}

struct TokenScores {
    double iou, precision, recall;
    std::size_t inter, retrieved, gold;
};

// R is a multiset, G a set. |R ∪ G| counts every retrieved token plus the
// gold tokens never retrieved.
inline TokenScores token_scores(const std::vector<Token>& retrieved, const std::vector<Token>& gold) {
    const std::set<Token> g(gold.begin(), gold.end());
    const std::set<Token> rset(retrieved.begin(), retrieved.end());
    std::size_t inter = 0;
    for (const auto& t : rset) inter += g.count(t);
    std::size_t missed = 0;
    for (const auto& t : g) missed += rset.count(t) ? 0 : 1;
    const double r = static_cast<double>(retrieved.size());
    const double uni = r + static_cast<double>(missed);
    TokenScores s{};
    s.inter = inter;
    s.retrieved = retrieved.size();
    s.gold = g.size();
    s.precision = retrieved.empty() ? 0.0 : inter / r;
    s.recall = inter / static_cast<double>(g.size());
    s.iou = uni == 0 ? 0.0 : inter / uni;
    return s;
}

inline bool overlaps_gold(const std::vector<Token>& chunk, const std::vector<Token>& gold) {
    for (const auto& t : chunk)
        if (std::find(gold.begin(), gold.end(), t) != gold.end()) return true;
    return false;
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double mrr(const std::vector<std::size_t>& first_ranks, std::size_t n) {
    // 0 = no relevant chunk
    std::vector<double> rr;
    for (auto r : first_ranks) rr.push_back(r >= 1 && r <= n ? 1.0 / static_cast<double>(r) : 0.0);
    return mean(rr);
}

inline double rrr(const std::vector<std::size_t>& first_ranks, std::size_t n) {
    std::vector<double> hit;
    for (auto r : first_ranks) hit.push_back(r >= 1 && r <= n ? 1.0 : 0.0);
    return mean(hit);
}

struct Tally {
    std::size_t wins, ties, losses;
};

inline double win_rate(const std::vector<Tally>& t) {
    double s = 0;
    for (const auto& e : t) s += (e.wins + 0.5 * e.ties) / static_cast<double>(e.wins + e.ties + e.losses);
    return s / static_cast<double>(t.size());
}

inline double set_iou(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::vector<std::string> i, u;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(i));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
    return static_cast<double>(i.size()) / static_cast<double>(u.size());
}

inline double f1(const std::vector<bool>& pred, const std::vector<bool>& gold) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && gold[i]) ++tp;
        else if (pred[i]) ++fp;
        else if (gold[i]) ++fn;
    }
    const double p = tp + fp == 0 ? 0 : tp / (tp + fp);
    const double r = tp + fn == 0 ? 0 : tp / (tp + fn);
    return p + r == 0 ? 0 : 2 * p * r / (p + r);
}

// Lowercased word k-shingles as strings.
inline std::set<std::string> shingles(const std::string& text, std::size_t k) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (c == ' ' || c == '\n' || c == '\t') {
            if (!cur.empty()) words.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
        }
    }
    if (!cur.empty()) words.push_back(cur);
    std::set<std::string> out;
    if (words.empty()) return out;
    if (words.size() < k) {
        std::string s;
        for (const auto& w : words) s += w + " ";
        out.insert(s);
        return out;
    }
    for (std::size_t i = 0; i + k <= words.size(); ++i) {
        std::string s;
        for (std::size_t j = i; j < i + k; ++j) s += words[j] + " ";
        out.insert(s);
    }
    return out;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    long double d = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return static_cast<double>(d / (std::sqrt(na) * std::sqrt(nb)));
}

inline std::string collapse_ws(const std::string& s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
            pending = !out.empty();
        } else {
            if (pending) out.push_back(' ');
            pending = false;
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace oracle
