#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pverify/types.hpp"

namespace pverify {

enum class RetrievalBackend { TfIdf, Embedding };

RetrievalBackend backend_from_name(const std::string& name);
const char* backend_name(RetrievalBackend b);

struct RankedResult {
    int64_t doc_id = 0;
    double score = 0.0;
};

/// Maps text to a fixed-dimension vector. The built-in stand-in is a
/// deterministic hashed bag-of-words projection; a real sentence-embedding
/// backend can be plugged in behind the same signature.
using Embedder = std::function<std::vector<double>(const std::string&)>;

Embedder hashed_bow_embedder(int dim = 700);

/// Immutable similarity index over a corpus. TF-IDF backend: lowercased
/// unigram+bigram tokens, log-scaled tf, smoothed idf, L2-normalized rows.
class RetrievalIndex {
public:
    static RetrievalIndex build(const Corpus& corpus, RetrievalBackend backend,
                                Embedder embedder = nullptr);

    RetrievalBackend backend() const { return backend_; }
    size_t size() const { return doc_ids_.size(); }

    void save(const std::filesystem::path& path) const;
    static RetrievalIndex load(const std::filesystem::path& path);

    /// Sparse claim vector in index term space (tfidf backend).
    std::unordered_map<int, double> vectorize_query(const std::string& text) const;

    friend std::vector<RankedResult> retrieve(const RetrievalIndex&, const std::string&, size_t);

private:
    RetrievalBackend backend_ = RetrievalBackend::TfIdf;
    std::vector<int64_t> doc_ids_;

    // tfidf state
    std::unordered_map<std::string, int> vocab_;
    std::vector<double> idf_;
    std::vector<std::unordered_map<int, double>> doc_vectors_;  // L2-normalized

    // embedding state
    int embed_dim_ = 0;
    std::vector<std::vector<double>> embeddings_;  // L2-normalized
    Embedder embedder_;
};

/// Top-k docs by cosine similarity, descending score, ties by ascending
/// doc_id. Empty claim text scores 0 everywhere (a warning is printed).
std::vector<RankedResult> retrieve(const RetrievalIndex& index,
                                   const std::string& claim_text, size_t k);

/// Lowercased word tokens on ASCII alnum boundaries.
std::vector<std::string> tokenize_words(const std::string& text);

}  // namespace pverify
