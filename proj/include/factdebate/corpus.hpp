#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factdebate/errors.hpp"
#include "json.hpp"

namespace factdebate::corpus {

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error("corpus contains no documents with text") {}
};

class IngestError : public Error {
public:
    IngestError(std::string doc_id, const std::string& what)
        : Error("cannot ingest document '" + doc_id + "': " + what), doc_id_(std::move(doc_id)) {}
    const std::string& doc_id() const noexcept { return doc_id_; }

private:
    std::string doc_id_;
};

class EmptyQuery : public Error {
public:
    EmptyQuery() : Error("query contains no searchable terms") {}
};

// Unreadable or incompatible persisted index.
class IndexFormatError : public Error {
public:
    using Error::Error;
};

struct Document {
    std::string doc_id;
    std::string title;
    std::string organization;
    std::string url;
    int page_count = 0;
};

struct Chunk {
    std::string doc_id;
    int page = 1;     // 1-based; 0 means unpaginated
    int ordinal = 0;  // position within the page
    std::string text;
    int token_count = 0;  // whitespace tokens
};

struct RetrievalHit {
    Chunk chunk;
    Document document;
    double score = 0.0;
    int rank = 0;  // dense from 1
};

struct ChunkingParams {
    int window = 512;
    int overlap = 64;

    void validate() const;  // throws ConfigError unless 0 <= overlap < window
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

inline constexpr int kDefaultTopK = 8;
inline constexpr int kIndexFormatVersion = 1;

// Lowercase, split on anything that is not [a-z0-9] (bytes >= 0x80 count as word
// characters so UTF-8 words stay whole). No stemming.
std::vector<std::string> tokenize(std::string_view text);

// Sliding window over whitespace tokens of one page. The last window ends at the page end.
std::vector<Chunk> chunk_page(const std::string& doc_id, int page, std::string_view text,
                              const ChunkingParams& params);

struct ManifestEntry {
    Document document;
    std::filesystem::path text_path;
};

// JSON-lines manifest: doc_id, title, organization, url, text_path (relative to the
// manifest's directory).
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);

class CorpusIndex {
public:
    // Throws EmptyCorpus when there is nothing to index.
    static CorpusIndex build(std::vector<Document> documents, std::vector<Chunk> chunks,
                             ChunkingParams chunking = {}, Bm25Params bm25 = {});

    const std::vector<Document>& documents() const { return documents_; }
    const std::vector<Chunk>& chunks() const { return chunks_; }
    const ChunkingParams& chunking() const { return chunking_; }
    const Bm25Params& bm25() const { return bm25_; }
    const Document& document(std::string_view doc_id) const;

    // Top-k BM25 hits; only chunks sharing at least one term with the query. Ties are
    // broken by (doc_id, page, ordinal) ascending.
    std::vector<RetrievalHit> retrieve(std::string_view query, int k) const;

    nlohmann::json to_json() const;
    static CorpusIndex from_json(const nlohmann::json& doc);
    void save(const std::filesystem::path& path) const;
    static CorpusIndex load(const std::filesystem::path& path);

private:
    struct Posting {
        std::uint32_t chunk;
        std::uint32_t tf;
    };

    CorpusIndex() = default;
    double idf(std::size_t df) const;

    std::vector<Document> documents_;
    std::vector<Chunk> chunks_;
    std::map<std::string, std::size_t, std::less<>> doc_slot_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::vector<std::uint32_t> chunk_length_;  // analyzed terms per chunk
    double avg_length_ = 0.0;
    ChunkingParams chunking_;
    Bm25Params bm25_;
};

// Reads every manifest entry's text file (pages separated by form feeds) and indexes it.
CorpusIndex ingest_corpus(const std::vector<ManifestEntry>& manifest,
                          const ChunkingParams& params = {});
CorpusIndex ingest_manifest(const std::filesystem::path& manifest_path,
                            const ChunkingParams& params = {});

// Retrieval backend seen by advocates. BM25 is the built-in implementation; other backends
// (e.g. embedding search) plug in behind this interface.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<RetrievalHit> retrieve(std::string_view query, int k) const = 0;
};

class Bm25Retriever final : public Retriever {
public:
    explicit Bm25Retriever(std::shared_ptr<const CorpusIndex> index) : index_(std::move(index)) {}
    std::vector<RetrievalHit> retrieve(std::string_view query, int k) const override {
        return index_->retrieve(query, k);
    }
    const CorpusIndex& index() const { return *index_; }

private:
    std::shared_ptr<const CorpusIndex> index_;
};

// corpus_id -> retriever. Populated before a run and read-only afterwards.
class IndexRegistry {
public:
    void add(std::string corpus_id, std::shared_ptr<const Retriever> retriever);
    void add_index(std::string corpus_id, CorpusIndex index);
    bool contains(std::string_view corpus_id) const;
    const Retriever& get(std::string_view corpus_id) const;  // throws ConfigError
    std::vector<std::string> ids() const;

private:
    std::map<std::string, std::shared_ptr<const Retriever>, std::less<>> retrievers_;
};

// One "Reference: <title>, Page: <page>, ORG: <org>, URL: <url>" header per hit followed by
// the chunk text; blocks in rank order separated by a blank line. Empty input -> "".
std::string format_evidence(const std::vector<RetrievalHit>& hits);

}  // namespace factdebate::corpus
