#pragma once

#include <filesystem>
#include <vector>

#include "pverify/model.hpp"
#include "pverify/retrieval.hpp"
#include "pverify/types.hpp"

namespace pverify {

enum class PipelineTask { Open, Oracle };

PipelineTask pipeline_task_from_name(const std::string& name);

struct PipelineConfig {
    PipelineTask task = PipelineTask::Open;
    int k_retrieval = 30;
    std::string domain;  // head-set prefix, usually empty
};

/// Retrieval (or oracle candidates) -> joint model -> post-processing.
/// Oracle candidates are the claim's evidence docs plus cited_doc_ids.
/// Claims with no candidates emit no predictions.
std::vector<Prediction> run_pipeline(const PipelineConfig& config,
                                     const JointModel& model,
                                     const RetrievalIndex* index,
                                     const std::vector<Claim>& claims,
                                     const Corpus& corpus,
                                     std::vector<ModelOutput>* outputs = nullptr);

/// SciFact submission format: {"id", "evidence": {doc: {"sentences", "label"}}}.
void save_predictions(const std::vector<Prediction>& preds,
                      const std::filesystem::path& path);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

/// ModelOutput JSONL (rationale probs, selection, stance distribution).
void save_model_outputs(const std::vector<ModelOutput>& outputs,
                        const std::filesystem::path& path);

}  // namespace pverify
