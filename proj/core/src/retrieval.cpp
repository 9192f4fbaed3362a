#include "pverify/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

namespace pverify {

using nlohmann::json;

namespace {
constexpr int kIndexFormatVersion = 1;
}

RetrievalBackend backend_from_name(const std::string& name) {
    if (name == "tfidf") return RetrievalBackend::TfIdf;
    if (name == "embedding") return RetrievalBackend::Embedding;
    throw ConfigError("unknown retrieval backend: " + name);
}

const char* backend_name(RetrievalBackend b) {
    return b == RetrievalBackend::TfIdf ? "tfidf" : "embedding";
}

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

namespace {

// Unigrams plus adjacent-word bigrams.
std::vector<std::string> ngram_terms(const std::string& text) {
    auto words = tokenize_words(text);
    std::vector<std::string> terms = words;
    for (size_t i = 0; i + 1 < words.size(); ++i)
        terms.push_back(words[i] + " " + words[i + 1]);
    return terms;
}

std::string doc_text(const AbstractDoc& doc) {
    std::string text = doc.title;
    for (const auto& s : doc.sentences) {
        text += ' ';
        text += s;
    }
    return text;
}

void l2_normalize(std::unordered_map<int, double>& v) {
    double norm2 = 0.0;
    for (const auto& [_, w] : v) norm2 += w * w;
    if (norm2 == 0.0) return;
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& [_, w] : v) w *= inv;
}

void l2_normalize(std::vector<double>& v) {
    double norm2 = 0.0;
    for (double w : v) norm2 += w * w;
    if (norm2 == 0.0) return;
    double inv = 1.0 / std::sqrt(norm2);
    for (double& w : v) w *= inv;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

Embedder hashed_bow_embedder(int dim) {
    return [dim](const std::string& text) {
        std::vector<double> v(dim, 0.0);
        for (const auto& w : tokenize_words(text)) {
            uint64_t h = fnv1a(w);
            int bucket = static_cast<int>(h % static_cast<uint64_t>(dim));
            double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
            v[bucket] += sign;
        }
        l2_normalize(v);
        return v;
    };
}

RetrievalIndex RetrievalIndex::build(const Corpus& corpus, RetrievalBackend backend,
                                     Embedder embedder) {
    RetrievalIndex index;
    index.backend_ = backend;
    for (const auto& [id, _] : corpus.docs()) index.doc_ids_.push_back(id);

    if (backend == RetrievalBackend::Embedding) {
        if (!embedder) throw ConfigError("embedding backend requires an embedder");
        index.embedder_ = embedder;
        for (int64_t id : index.doc_ids_) {
            auto v = embedder(doc_text(corpus.at(id)));
            if (index.embed_dim_ == 0) index.embed_dim_ = static_cast<int>(v.size());
            if (static_cast<int>(v.size()) != index.embed_dim_)
                throw ConfigError("embedder returned inconsistent dimensions");
            l2_normalize(v);
            index.embeddings_.push_back(std::move(v));
        }
        return index;
    }

    // tfidf: first pass counts document frequencies.
    std::vector<std::unordered_map<std::string, int>> term_counts;
    std::unordered_map<std::string, int> df;
    for (int64_t id : index.doc_ids_) {
        std::unordered_map<std::string, int> counts;
        for (const auto& t : ngram_terms(doc_text(corpus.at(id)))) counts[t]++;
        for (const auto& [t, _] : counts) df[t]++;
        term_counts.push_back(std::move(counts));
    }
    for (const auto& [t, _] : df) {
        int id = static_cast<int>(index.vocab_.size());
        index.vocab_.emplace(t, id);
    }
    index.idf_.resize(index.vocab_.size());
    double n_docs = static_cast<double>(index.doc_ids_.size());
    for (const auto& [t, tid] : index.vocab_)
        index.idf_[tid] = std::log((1.0 + n_docs) / (1.0 + df[t])) + 1.0;

    for (const auto& counts : term_counts) {
        std::unordered_map<int, double> vec;
        for (const auto& [t, c] : counts) {
            int tid = index.vocab_.at(t);
            vec[tid] = (1.0 + std::log(static_cast<double>(c))) * index.idf_[tid];
        }
        l2_normalize(vec);
        index.doc_vectors_.push_back(std::move(vec));
    }
    return index;
}

std::unordered_map<int, double> RetrievalIndex::vectorize_query(const std::string& text) const {
    std::unordered_map<std::string, int> counts;
    for (const auto& t : ngram_terms(text)) counts[t]++;
    std::unordered_map<int, double> vec;
    for (const auto& [t, c] : counts) {
        auto it = vocab_.find(t);
        if (it == vocab_.end()) continue;
        vec[it->second] = (1.0 + std::log(static_cast<double>(c))) * idf_[it->second];
    }
    l2_normalize(vec);
    return vec;
}

std::vector<RankedResult> retrieve(const RetrievalIndex& index,
                                   const std::string& claim_text, size_t k) {
    if (k < 1) throw ConfigError("k must be >= 1");
    std::vector<RankedResult> results;
    results.reserve(index.doc_ids_.size());

    if (index.backend_ == RetrievalBackend::TfIdf) {
        auto query = index.vectorize_query(claim_text);
        if (query.empty())
            std::cerr << "warning: query has no in-vocabulary terms, all scores 0\n";
        for (size_t i = 0; i < index.doc_ids_.size(); ++i) {
            double score = 0.0;
            const auto& doc = index.doc_vectors_[i];
            for (const auto& [tid, w] : query) {
                auto it = doc.find(tid);
                if (it != doc.end()) score += w * it->second;
            }
            results.push_back({index.doc_ids_[i], score});
        }
    } else {
        auto q = index.embedder_(claim_text);
        l2_normalize(q);
        bool empty = std::all_of(q.begin(), q.end(), [](double x) { return x == 0.0; });
        if (empty) std::cerr << "warning: empty query embedding, all scores 0\n";
        for (size_t i = 0; i < index.doc_ids_.size(); ++i) {
            double score = 0.0;
            const auto& d = index.embeddings_[i];
            for (size_t j = 0; j < d.size(); ++j) score += q[j] * d[j];
            results.push_back({index.doc_ids_[i], score});
        }
    }

    size_t take = std::min(k, results.size());
    std::partial_sort(results.begin(), results.begin() + take, results.end(),
                      [](const RankedResult& a, const RankedResult& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.doc_id < b.doc_id;
                      });
    results.resize(take);
    return results;
}

void RetrievalIndex::save(const std::filesystem::path& path) const {
    json j;
    j["format_version"] = kIndexFormatVersion;
    j["backend"] = backend_name(backend_);
    j["doc_ids"] = doc_ids_;
    if (backend_ == RetrievalBackend::TfIdf) {
        json vocab = json::object();
        for (const auto& [t, id] : vocab_) vocab[t] = id;
        j["vocab"] = std::move(vocab);
        j["idf"] = idf_;
        json vecs = json::array();
        for (const auto& v : doc_vectors_) {
            json row = json::object();
            for (const auto& [tid, w] : v) row[std::to_string(tid)] = w;
            vecs.push_back(std::move(row));
        }
        j["doc_vectors"] = std::move(vecs);
    } else {
        j["embed_dim"] = embed_dim_;
        j["embeddings"] = embeddings_;
    }
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << j.dump();
}

RetrievalIndex RetrievalIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    json j = json::parse(in);
    if (j.at("format_version").get<int>() != kIndexFormatVersion)
        throw ConfigError("unsupported index format version");
    RetrievalIndex index;
    index.backend_ = backend_from_name(j.at("backend").get<std::string>());
    index.doc_ids_ = j.at("doc_ids").get<std::vector<int64_t>>();
    if (index.backend_ == RetrievalBackend::TfIdf) {
        for (const auto& [t, id] : j.at("vocab").items())
            index.vocab_[t] = id.get<int>();
        index.idf_ = j.at("idf").get<std::vector<double>>();
        for (const auto& row : j.at("doc_vectors")) {
            std::unordered_map<int, double> vec;
            for (const auto& [tid, w] : row.items())
                vec[std::stoi(tid)] = w.get<double>();
            index.doc_vectors_.push_back(std::move(vec));
        }
    } else {
        index.embed_dim_ = j.at("embed_dim").get<int>();
        index.embeddings_ = j.at("embeddings").get<std::vector<std::vector<double>>>();
        index.embedder_ = hashed_bow_embedder(index.embed_dim_);
    }
    return index;
}

}  // namespace pverify
