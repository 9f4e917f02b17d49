#pragma once

// Brute-force reference implementations used to check the library. They share no code with
// src/ and favour obviousness over speed.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace oracle {

// ---- BM25 ----

inline std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
        if (word) {
            cur += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct Passage {
    std::string doc_id;
    int page = 1;
    int ordinal = 0;
    std::string text;
};

struct Scored {
    std::string doc_id;
    int page = 1;
    int ordinal = 0;
    double score = 0.0;
};

inline std::vector<Scored> bm25_rank(const std::vector<Passage>& passages, const std::string& query, int k,
                                     double k1 = 1.2, double b = 0.75) {
    std::vector<std::vector<std::string>> docs;
    double total = 0;
    for (const auto& p : passages) {
        docs.push_back(words(p.text));
        total += static_cast<double>(docs.back().size());
    }
    const double n = static_cast<double>(passages.size());
    const double avg = total / n;
    std::set<std::string> terms;
    for (const auto& w : words(query)) terms.insert(w);

    std::vector<Scored> out;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        double score = 0;
        bool matched = false;
        for (const auto& t : terms) {
            double df = 0;
            for (const auto& d : docs) df += std::count(d.begin(), d.end(), t) > 0 ? 1 : 0;
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), t));
            if (tf == 0) continue;
            matched = true;
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double len = static_cast<double>(docs[i].size());
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * (len / avg)));
        }
        if (matched) out.push_back({passages[i].doc_id, passages[i].page, passages[i].ordinal, score});
    }
    std::sort(out.begin(), out.end(), [](const Scored& x, const Scored& y) {
        if (x.score != y.score) return x.score > y.score;
        return std::tie(x.doc_id, x.page, x.ordinal) < std::tie(y.doc_id, y.page, y.ordinal);
    });
    if (static_cast<int>(out.size()) > k) out.resize(static_cast<std::size_t>(k));
    return out;
}

// ---- classification metrics straight from (gold, pred) pairs ----

struct Metrics {
    double precision = 0, recall = 0, f1 = 0, accuracy = 0;  // percentages
    std::size_t classes = 0;
};

inline Metrics macro_metrics(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::set<std::string> classes;
    for (const auto& [g, p] : pairs) {
        classes.insert(g);
        classes.insert(p);
    }
    Metrics m;
    m.classes = classes.size();
    for (const auto& c : classes) {
        double tp = 0, gold = 0, pred = 0;
        for (const auto& [g, p] : pairs) {
            if (g == c && p == c) tp += 1;
            if (g == c) gold += 1;
            if (p == c) pred += 1;
        }
        const double prec = pred > 0 ? tp / pred : 0.0;
        const double rec = gold > 0 ? tp / gold : 0.0;
        m.precision += prec;
        m.recall += rec;
        m.f1 += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    }
    double hits = 0;
    for (const auto& [g, p] : pairs) hits += g == p ? 1 : 0;
    const double k = static_cast<double>(classes.size());
    m.precision = 100.0 * m.precision / k;
    m.recall = 100.0 * m.recall / k;
    m.f1 = 100.0 * m.f1 / k;
    m.accuracy = 100.0 * hits / static_cast<double>(pairs.size());
    return m;
}

// ---- majority vote over binary polarities ----

// Each entry is "correct", "incorrect" or "nei"; abstentions are ignored.
inline std::string binary_majority(const std::vector<std::string>& votes) {
    int yes = 0, no = 0;
    for (const auto& v : votes) {
        if (v == "correct") ++yes;
        if (v == "incorrect") ++no;
    }
    if (yes > no) return "correct";
    if (no > yes) return "incorrect";
    return "nei";
}

}  // namespace oracle
