#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "pverify/types.hpp"

namespace pverify {

class RetrievalIndex;  // retrieval.hpp

/// Loads corpus JSONL: {"doc_id": int, "title": str, "abstract": [str, ...]}.
/// Extra fields are ignored. Throws ParseError (with line number) on malformed
/// lines and IntegrityError on duplicate doc_id.
Corpus load_corpus(const std::filesystem::path& path);

/// Loads claims JSONL: {"id": int, "claim": str, "evidence": {...},
/// "cited_doc_ids": [int]}. Evidence labels SUPPORT / CONTRADICT map to
/// SUPPORTS / REFUTES. Claims with empty evidence are valid.
std::vector<Claim> load_claims(const std::filesystem::path& path);

/// Loads paragraph-granularity FEVER-style claims plus their corpus and builds
/// instances directly: one positive per evidence doc, plus up to k_fever
/// retrieved negatives per claim. Pages are truncated to the first
/// kFeverMaxSentences sentences. Labels SUPPORTS / REFUTES / NOT ENOUGH INFO.
std::vector<ClaimInstance> load_fever(const std::filesystem::path& claims_path,
                                      const Corpus& corpus,
                                      const RetrievalIndex& index,
                                      int k_fever);

inline constexpr int kFeverMaxSentences = 30;

/// For each claim: one positive instance per evidence doc (mask = union of
/// gold rationale sets) plus up to k_train negatives (NOINFO, zero mask) from
/// the retriever's top ranks, excluding gold evidence docs.
std::vector<ClaimInstance> build_instances(const std::vector<Claim>& claims,
                                           const Corpus& corpus,
                                           const RetrievalIndex& index,
                                           int k_train);

/// Returns a copy with each non-rationale sentence independently dropped with
/// probability p_drop. Rationale sentences always survive; at least one
/// sentence always survives. Mask is re-indexed to the survivors.
ClaimInstance downsample_sentences(const ClaimInstance& inst, double p_drop,
                                   std::mt19937& rng);

/// Instance cache round-trip (JSONL, one instance per line, origin tag kept).
void save_instances(const std::vector<ClaimInstance>& instances,
                    const std::filesystem::path& path);
std::vector<ClaimInstance> load_instances(const std::filesystem::path& path);

}  // namespace pverify
