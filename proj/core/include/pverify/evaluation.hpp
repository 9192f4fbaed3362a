#pragma once

#include <vector>

#include "pverify/types.hpp"

namespace pverify {

/// Forces the label of any prediction with no rationale sentences to NOINFO.
/// Idempotent; everything else passes through unchanged.
std::vector<Prediction> postprocess(std::vector<Prediction> preds);

/// Sentence-level P/R/F1, micro-averaged over every (claim, doc, sentence)
/// triple. A predicted sentence is a true positive iff it is in some gold
/// rationale set of its pair and, when require_label, the predicted label
/// matches the gold label. Empty denominators yield 0.
PRF1 sentence_level_f1(const std::vector<Prediction>& preds,
                       const std::vector<Claim>& gold, bool require_label);

/// Abstract-level P/R/F1. A prediction is positive iff its label is SUPPORTS
/// or REFUTES; a true positive additionally matches the gold label and, when
/// require_rationale, fully covers at least one gold rationale set.
PRF1 abstract_level_f1(const std::vector<Prediction>& preds,
                       const std::vector<Claim>& gold, bool require_rationale);

/// Micro-averaged retrieval P/R/F1 of per-claim retrieved doc lists against
/// gold evidence docs.
PRF1 retrieval_metrics(
    const std::vector<std::pair<int64_t, std::vector<int64_t>>>& retrieved,
    const std::vector<Claim>& gold);

/// All four official variants at once (predictions must be post-processed).
MetricsReport compute_metrics(const std::vector<Prediction>& preds,
                              const std::vector<Claim>& gold);

PRF1 make_prf1(double tp, double n_predicted, double n_gold);

}  // namespace pverify
