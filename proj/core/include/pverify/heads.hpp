#pragma once

#include <string>
#include <vector>

#include "pverify/autodiff.hpp"
#include "pverify/params.hpp"
#include "pverify/types.hpp"

namespace pverify {

/// Gaussian kernel bank for the kernel-pooling stance head.
struct KgatConfig {
    std::vector<double> mus;
    std::vector<double> sigmas;

    /// 21 kernels: exact-match (mu 1.0, sigma 1e-3) plus mu 0.9 .. -1.0
    /// step 0.1 with sigma 0.1.
    static KgatConfig standard();
    void validate() const;
};

/// Parameter names live under prefixes so domain adaptation can keep
/// several head sets side by side:
///   word_attn.*            shared word-level attention (Eq. 2 style)
///   <domain>rationale.*    rationale scorer
///   <domain>sent_attn.*    sentence-level attention for the simple head
///   <domain>stance.*       stance MLP
///   <domain>kgat.*         kernel head readout + stance MLP
/// An empty domain prefix is the single-domain layout.
void register_head_params(ParamStore& store, int d_model, int n_kernels,
                          const std::string& domain_prefix, std::mt19937& rng);
void register_word_attn_params(ParamStore& store, int d_model, std::mt19937& rng);
std::vector<std::string> head_param_names(const std::string& domain_prefix);
std::vector<std::string> word_attn_param_names();

/// Softmax-weighted sum over one token span. span_reps is m x d (m >= 1).
ad::Var word_attention_pool(ad::Var span_reps, TapeBinder& params);

/// Pools every sentence span of the sequence (span_map indices 1..) into a
/// (n_spans-1) x d matrix of sentence representations.
ad::Var pool_sentence_spans(ad::Var token_reps,
                            const std::vector<std::pair<int, int>>& span_map,
                            TapeBinder& params);

/// Per-sentence (p_not_r, p_r) via 2-way softmax of a 2-layer MLP; n x 2.
ad::Var score_rationales(ad::Var sent_reps, TapeBinder& params,
                         const std::string& domain_prefix);

enum class SelectionMode { Predicted, Gold };

struct RationaleSelection {
    std::vector<int> rows;   // row indices into the sentence-rep matrix
    bool used_dummy = false; // fell back to the dummy sentence
};

/// Predicted mode: rows with p_r strictly greater than p_not_r among real
/// sentences. Gold mode: rows with mask 1. Empty selection falls back to the
/// dummy row (requires has_dummy).
RationaleSelection select_rationale_inputs(const Eigen::MatrixXd& rationale_probs,
                                           SelectionMode mode,
                                           const std::vector<int>* gold_mask,
                                           bool has_dummy);

/// Sentence-level attention over the selected representations, then a 2-layer
/// MLP and 3-way softmax. Returns 1 x 3 (SUPPORTS, REFUTES, NOINFO).
ad::Var stance_simple(ad::Var selected_reps, TapeBinder& params,
                      const std::string& domain_prefix);

/// Kernel-pooling stance head over claim tokens and the selected sentences'
/// token spans. claim_token_reps is n x d including [CLS]; each span includes
/// its leading [SEP]. Returns 1 x 3.
ad::Var stance_kgat(ad::Var claim_token_reps,
                    const std::vector<ad::Var>& selected_token_spans,
                    const KgatConfig& config, TapeBinder& params,
                    const std::string& domain_prefix);

}  // namespace pverify
