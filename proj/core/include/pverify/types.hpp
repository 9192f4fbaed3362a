#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pverify {

enum class Stance { Supports, Refutes, NoInfo };

inline const char* stance_name(Stance s) {
    switch (s) {
        case Stance::Supports: return "SUPPORTS";
        case Stance::Refutes: return "REFUTES";
        case Stance::NoInfo: return "NOINFO";
    }
    return "?";
}

Stance stance_from_name(const std::string& name);

/// One corpus document: an abstract pre-split into sentences.
struct AbstractDoc {
    int64_t doc_id = 0;
    std::string title;
    std::vector<std::string> sentences;
};

/// Gold evidence for one (claim, doc) pair.
struct Evidence {
    Stance label = Stance::NoInfo;                      // SUPPORTS or REFUTES
    std::vector<std::vector<int>> rationale_sets;       // each a set of sentence indices
};

struct Claim {
    int64_t claim_id = 0;
    std::string text;
    std::map<int64_t, Evidence> evidence;
    std::vector<int64_t> cited_doc_ids;
};

enum class InstanceOrigin { Gold, NegativeSample, Downsampled };

const char* origin_name(InstanceOrigin o);
InstanceOrigin origin_from_name(const std::string& name);

/// One (claim, candidate abstract) training/eval pair.
struct ClaimInstance {
    int64_t claim_id = 0;
    int64_t doc_id = 0;
    std::string claim_text;
    std::vector<std::string> sentences;     // paragraph sentences (possibly downsampled)
    std::vector<int> rationale_mask;        // 0/1, same length as sentences
    Stance stance = Stance::NoInfo;
    InstanceOrigin origin = InstanceOrigin::Gold;
};

class Corpus {
public:
    void add(AbstractDoc doc);
    bool contains(int64_t doc_id) const { return docs_.count(doc_id) > 0; }
    const AbstractDoc& at(int64_t doc_id) const;
    size_t size() const { return docs_.size(); }
    const std::map<int64_t, AbstractDoc>& docs() const { return docs_; }

private:
    std::map<int64_t, AbstractDoc> docs_;
};

/// Per-(claim, doc) model output, dummy sentence excluded.
struct ModelOutput {
    int64_t claim_id = 0;
    int64_t doc_id = 0;
    std::vector<double> rationale_probs;    // p_r per real sentence
    std::vector<int> selected;              // indices with p_r > p_not_r
    std::array<double, 3> stance_probs{};   // SUPPORTS, REFUTES, NOINFO
};

struct Prediction {
    int64_t claim_id = 0;
    int64_t doc_id = 0;
    std::vector<int> predicted_sentences;   // sorted ascending
    Stance predicted_label = Stance::NoInfo;
};

struct PRF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    PRF1 sentence_selection_only;
    PRF1 sentence_selection_label;
    PRF1 abstract_label_only;
    PRF1 abstract_label_rationale;
    std::optional<PRF1> retrieval;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pverify
