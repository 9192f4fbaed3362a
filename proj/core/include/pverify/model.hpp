#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pverify/encoder.hpp"
#include "pverify/heads.hpp"
#include "pverify/tokenizer.hpp"
#include "pverify/types.hpp"

namespace pverify {

enum class StanceHeadKind { Simple, Kgat };

StanceHeadKind stance_head_from_name(const std::string& name);
const char* stance_head_name(StanceHeadKind k);

struct ModelConfig {
    EncoderConfig encoder;
    KgatConfig kgat = KgatConfig::standard();
    StanceHeadKind stance_head = StanceHeadKind::Simple;
    /// Head-set prefixes. {""} is the single-domain layout; domain
    /// adaptation uses {"scifact.", "fever."} with shared encoder and
    /// word attention.
    std::vector<std::string> domains{""};
};

/// Provenance carried by checkpoints.
struct Lineage {
    std::string parent_hash;  // empty for fresh initialization
    std::string mode;
};

/// One forward pass over one (claim, paragraph) pair. The tape owns every
/// intermediate; keep the pass alive while using its Vars.
struct ForwardPass {
    std::unique_ptr<ad::Tape> tape;
    std::unique_ptr<TapeBinder> binder;
    TokenSequence seq;
    ad::Var token_reps;
    ad::Var sentence_reps;     // rows: dummy (if present) then real sentences
    ad::Var rationale_probs;   // same rows x 2: (p_not_r, p_r)
    RationaleSelection selection;
    ad::Var stance_probs;      // 1 x 3
};

class JointModel {
public:
    JointModel(ModelConfig config, Tokenizer tokenizer, uint64_t seed);

    /// gold_mask covers real sentences only; required in Gold mode.
    ForwardPass forward(const std::string& claim,
                        const std::vector<std::string>& sentences,
                        SelectionMode mode = SelectionMode::Predicted,
                        const std::vector<int>* gold_mask = nullptr,
                        const std::string& domain = "") const;

    /// Evaluation-mode output for one pair; dummy excluded from the arrays.
    ModelOutput predict(int64_t claim_id, int64_t doc_id, const std::string& claim,
                        const std::vector<std::string>& sentences,
                        const std::string& domain = "") const;

    /// Re-draws word attention and every head parameter of `domain`;
    /// encoder weights are kept.
    void reinit_heads(const std::string& domain, std::mt19937& rng);

    std::vector<std::string> encoder_param_names() const;
    std::vector<std::string> head_param_names_for(const std::string& domain) const;

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const ModelConfig& config() const { return config_; }
    const Tokenizer& tokenizer() const { return tokenizer_; }
    const TinyEncoder& encoder() const { return encoder_; }

    void save_checkpoint(const std::filesystem::path& path, const Lineage& lineage,
                         const std::string& train_config_echo = "") const;
    static JointModel load_checkpoint(const std::filesystem::path& path,
                                      Lineage* lineage_out = nullptr);

    uint64_t checkpoint_hash() const { return store_.hash_all(); }

private:
    ModelConfig config_;
    Tokenizer tokenizer_;
    TinyEncoder encoder_;
    ParamStore store_;
};

}  // namespace pverify
