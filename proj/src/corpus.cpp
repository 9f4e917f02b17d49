#include "factdebate/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace factdebate::corpus {

namespace {

bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::vector<std::string_view> whitespace_split(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const auto start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) out.push_back(text.substr(start, i - start));
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw std::runtime_error("read failure on " + path.string());
    return buf.str();
}

auto chunk_key(const Chunk& c) { return std::tie(c.doc_id, c.page, c.ordinal); }

}  // namespace

void ChunkingParams::validate() const {
    if (window < 1) throw ConfigError("chunk window must be at least 1 token");
    if (overlap < 0 || overlap >= window) {
        throw ConfigError("chunk overlap must satisfy 0 <= overlap < window (overlap=" +
                          std::to_string(overlap) + ", window=" + std::to_string(window) + ")");
    }
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::vector<Chunk> chunk_page(const std::string& doc_id, int page, std::string_view text,
                              const ChunkingParams& params) {
    params.validate();
    const auto tokens = whitespace_split(text);
    std::vector<Chunk> chunks;
    const auto window = static_cast<std::size_t>(params.window);
    const auto step = static_cast<std::size_t>(params.window - params.overlap);
    for (std::size_t start = 0; start < tokens.size(); start += step) {
        const auto end = std::min(tokens.size(), start + window);
        Chunk chunk;
        chunk.doc_id = doc_id;
        chunk.page = page;
        chunk.ordinal = static_cast<int>(chunks.size());
        for (auto i = start; i < end; ++i) {
            if (i > start) chunk.text.push_back(' ');
            chunk.text.append(tokens[i]);
        }
        chunk.token_count = static_cast<int>(end - start);
        chunks.push_back(std::move(chunk));
        if (end == tokens.size()) break;
    }
    return chunks;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot read manifest " + manifest_path.string());
    const auto base = manifest_path.parent_path();
    std::vector<ManifestEntry> entries;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw ConfigError("manifest line " + std::to_string(line_no) + " is not valid JSON");
        }
        ManifestEntry entry;
        auto& doc = entry.document;
        doc.doc_id = row.value("doc_id", std::string());
        doc.title = row.value("title", std::string());
        doc.organization = row.value("organization", std::string());
        doc.url = row.value("url", std::string());
        const auto text_path = row.value("text_path", std::string());
        if (doc.doc_id.empty() || text_path.empty()) {
            throw ConfigError("manifest line " + std::to_string(line_no) +
                              " needs doc_id and text_path");
        }
        if (doc.title.empty()) {
            throw ConfigError("manifest line " + std::to_string(line_no) + " has an empty title");
        }
        if (!seen.insert(doc.doc_id).second) {
            throw ConfigError("duplicate doc_id '" + doc.doc_id + "' in manifest");
        }
        entry.text_path = std::filesystem::path(text_path);
        if (entry.text_path.is_relative()) entry.text_path = base / entry.text_path;
        entries.push_back(std::move(entry));
    }
    return entries;
}

CorpusIndex CorpusIndex::build(std::vector<Document> documents, std::vector<Chunk> chunks,
                               ChunkingParams chunking, Bm25Params bm25) {
    if (documents.empty() || chunks.empty()) throw EmptyCorpus();
    CorpusIndex index;
    index.chunking_ = chunking;
    index.bm25_ = bm25;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        if (documents[i].title.empty()) throw ConfigError("document '" + documents[i].doc_id + "' has an empty title");
        if (!index.doc_slot_.emplace(documents[i].doc_id, i).second) {
            throw ConfigError("duplicate doc_id '" + documents[i].doc_id + "'");
        }
    }
    std::sort(chunks.begin(), chunks.end(),
              [](const Chunk& a, const Chunk& b) { return chunk_key(a) < chunk_key(b); });
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (!index.doc_slot_.count(chunks[i].doc_id)) {
            throw ConfigError("chunk refers to unknown doc_id '" + chunks[i].doc_id + "'");
        }
        if (i > 0 && chunk_key(chunks[i - 1]) == chunk_key(chunks[i])) {
            throw ConfigError("duplicate chunk key in document '" + chunks[i].doc_id + "'");
        }
    }
    index.documents_ = std::move(documents);
    index.chunks_ = std::move(chunks);

    index.chunk_length_.reserve(index.chunks_.size());
    double total = 0.0;
    for (std::uint32_t c = 0; c < index.chunks_.size(); ++c) {
        std::map<std::string, std::uint32_t> tf;
        const auto terms = tokenize(index.chunks_[c].text);
        for (const auto& t : terms) ++tf[t];
        for (auto& [term, count] : tf) index.postings_[term].push_back({c, count});
        index.chunk_length_.push_back(static_cast<std::uint32_t>(terms.size()));
        total += static_cast<double>(terms.size());
    }
    index.avg_length_ = total / static_cast<double>(index.chunks_.size());
    return index;
}

const Document& CorpusIndex::document(std::string_view doc_id) const {
    auto it = doc_slot_.find(doc_id);
    if (it == doc_slot_.end()) throw ConfigError("unknown doc_id '" + std::string(doc_id) + "'");
    return documents_[it->second];
}

double CorpusIndex::idf(std::size_t df) const {
    const auto n = static_cast<double>(chunks_.size());
    const auto d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

std::vector<RetrievalHit> CorpusIndex::retrieve(std::string_view query, int k) const {
    if (k < 1) throw ConfigError("retrieval k must be at least 1");
    auto terms = tokenize(query);
    if (terms.empty()) throw EmptyQuery();
    // Repeated query terms count once; sorted so accumulation order is fixed.
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

    std::map<std::uint32_t, double> scores;
    const double k1 = bm25_.k1;
    const double b = bm25_.b;
    for (const auto& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double w = idf(it->second.size());
        for (const auto& p : it->second) {
            const double tf = p.tf;
            const double norm = 1.0 - b + b * (chunk_length_[p.chunk] / avg_length_);
            scores[p.chunk] += w * (tf * (k1 + 1.0)) / (tf + k1 * norm);
        }
    }

    std::vector<std::pair<std::uint32_t, double>> ranked(scores.begin(), scores.end());
    std::sort(ranked.begin(), ranked.end(), [this](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return chunk_key(chunks_[a.first]) < chunk_key(chunks_[b.first]);
    });
    if (ranked.size() > static_cast<std::size_t>(k)) ranked.resize(static_cast<std::size_t>(k));

    std::vector<RetrievalHit> hits;
    hits.reserve(ranked.size());
    for (const auto& [slot, score] : ranked) {
        const auto& chunk = chunks_[slot];
        hits.push_back({chunk, documents_[doc_slot_.at(chunk.doc_id)], score,
                        static_cast<int>(hits.size()) + 1});
    }
    return hits;
}

nlohmann::json CorpusIndex::to_json() const {
    nlohmann::json doc;
    doc["format"] = "factdebate-corpus-index";
    doc["version"] = kIndexFormatVersion;
    doc["chunking"] = {{"window", chunking_.window}, {"overlap", chunking_.overlap}};
    doc["bm25"] = {{"k1", bm25_.k1}, {"b", bm25_.b}};
    auto& docs = doc["documents"] = nlohmann::json::array();
    for (const auto& d : documents_) {
        docs.push_back({{"doc_id", d.doc_id},
                        {"title", d.title},
                        {"organization", d.organization},
                        {"url", d.url},
                        {"page_count", d.page_count}});
    }
    auto& chunks = doc["chunks"] = nlohmann::json::array();
    for (const auto& c : chunks_) {
        chunks.push_back({{"doc_id", c.doc_id},
                          {"page", c.page},
                          {"ordinal", c.ordinal},
                          {"text", c.text},
                          {"token_count", c.token_count}});
    }
    return doc;
}

CorpusIndex CorpusIndex::from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || doc.value("format", std::string()) != "factdebate-corpus-index") {
        throw IndexFormatError("not a corpus index document");
    }
    if (!doc.contains("version") || !doc["version"].is_number_integer() ||
        doc["version"].get<int>() != kIndexFormatVersion) {
        throw IndexFormatError("unsupported corpus index version (expected " +
                               std::to_string(kIndexFormatVersion) + ")");
    }
    try {
        ChunkingParams chunking{doc.at("chunking").at("window").get<int>(),
                                doc.at("chunking").at("overlap").get<int>()};
        Bm25Params bm25{doc.at("bm25").at("k1").get<double>(), doc.at("bm25").at("b").get<double>()};
        std::vector<Document> documents;
        for (const auto& d : doc.at("documents")) {
            documents.push_back({d.at("doc_id").get<std::string>(), d.at("title").get<std::string>(),
                                 d.value("organization", std::string()), d.value("url", std::string()),
                                 d.value("page_count", 0)});
        }
        std::vector<Chunk> chunks;
        for (const auto& c : doc.at("chunks")) {
            chunks.push_back({c.at("doc_id").get<std::string>(), c.at("page").get<int>(),
                              c.at("ordinal").get<int>(), c.at("text").get<std::string>(),
                              c.at("token_count").get<int>()});
        }
        return build(std::move(documents), std::move(chunks), chunking, bm25);
    } catch (const nlohmann::json::exception& e) {
        throw IndexFormatError(std::string("malformed corpus index: ") + e.what());
    }
}

void CorpusIndex::save(const std::filesystem::path& path) const {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write index " + path.string());
        out << to_json().dump() << '\n';
        if (!out) throw Error("write failure on " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

CorpusIndex CorpusIndex::load(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw IndexFormatError(e.what());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        throw IndexFormatError("corpus index " + path.string() + " is not valid JSON");
    }
    return from_json(doc);
}

CorpusIndex ingest_corpus(const std::vector<ManifestEntry>& manifest, const ChunkingParams& params) {
    params.validate();
    if (manifest.empty()) throw EmptyCorpus();
    std::vector<Document> documents;
    std::vector<Chunk> chunks;
    for (const auto& entry : manifest) {
        std::string text;
        try {
            text = read_file(entry.text_path);
        } catch (const std::exception& e) {
            throw IngestError(entry.document.doc_id, e.what());
        }
        Document doc = entry.document;
        int page = 0;
        std::size_t start = 0;
        while (true) {
            const auto end = text.find('\f', start);
            const auto page_text = std::string_view(text).substr(
                start, end == std::string::npos ? std::string::npos : end - start);
            ++page;
            auto page_chunks = chunk_page(doc.doc_id, page, page_text, params);
            chunks.insert(chunks.end(), std::make_move_iterator(page_chunks.begin()),
                          std::make_move_iterator(page_chunks.end()));
            if (end == std::string::npos) break;
            start = end + 1;
        }
        doc.page_count = page;
        documents.push_back(std::move(doc));
    }
    return CorpusIndex::build(std::move(documents), std::move(chunks), params);
}

CorpusIndex ingest_manifest(const std::filesystem::path& manifest_path, const ChunkingParams& params) {
    params.validate();
    return ingest_corpus(read_manifest(manifest_path), params);
}

void IndexRegistry::add(std::string corpus_id, std::shared_ptr<const Retriever> retriever) {
    if (!retriever) throw ConfigError("null retriever for corpus '" + corpus_id + "'");
    if (!retrievers_.emplace(corpus_id, std::move(retriever)).second) {
        throw ConfigError("corpus '" + corpus_id + "' registered twice");
    }
}

void IndexRegistry::add_index(std::string corpus_id, CorpusIndex index) {
    add(std::move(corpus_id),
        std::make_shared<Bm25Retriever>(std::make_shared<const CorpusIndex>(std::move(index))));
}

bool IndexRegistry::contains(std::string_view corpus_id) const {
    return retrievers_.find(corpus_id) != retrievers_.end();
}

const Retriever& IndexRegistry::get(std::string_view corpus_id) const {
    auto it = retrievers_.find(corpus_id);
    if (it == retrievers_.end()) throw ConfigError("unknown corpus '" + std::string(corpus_id) + "'");
    return *it->second;
}

std::vector<std::string> IndexRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, r] : retrievers_) out.push_back(id);
    return out;
}

std::string format_evidence(const std::vector<RetrievalHit>& hits) {
    std::string out;
    for (const auto& hit : hits) {
        if (!out.empty()) out += "\n\n";
        out += "Reference: " + hit.document.title + ", Page: " + std::to_string(hit.chunk.page) +
               ", ORG: " + hit.document.organization + ", URL: " + hit.document.url + "\n";
        out += hit.chunk.text;
    }
    return out;
}

}  // namespace factdebate::corpus
