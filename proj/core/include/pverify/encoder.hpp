#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pverify/autodiff.hpp"
#include "pverify/params.hpp"
#include "pverify/tokenizer.hpp"
#include "pverify/types.hpp"

namespace pverify {

/// Fixed dummy sentence prepended so the stance head always has input.
inline constexpr const char* kDummySentence = "@";

/// Claim + paragraph assembled as one separator-delimited token sequence.
/// span_map[0] is the claim span (owns [CLS]); spans 1.. are sentence spans,
/// each including its leading [SEP]. The trailing [SEP] belongs to the last
/// sentence span. Half-open [start, end) token ranges.
struct TokenSequence {
    std::vector<int> token_ids;
    std::vector<std::pair<int, int>> span_map;
    bool has_dummy = false;
    int dropped_sentences = 0;  // whole sentences cut by truncation
};

struct EncoderConfig {
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int d_ff = 128;
    int max_sequence_length = 512;
    int hash_buckets = 1024;

    void validate() const;
};

/// Builds the Eq.-style sequence [CLS c SEP (@ SEP)? s1 SEP ... sl SEP].
/// Over-long sequences lose whole trailing sentences, never partial ones.
TokenSequence assemble_sequence(const std::string& claim,
                                const std::vector<std::string>& sentences,
                                const Tokenizer& tokenizer, bool prepend_dummy,
                                int max_sequence_length = 512);

/// Trainable transformer encoder with learned positional embeddings.
/// Parameters live in an external ParamStore under the "encoder." prefix.
class TinyEncoder {
public:
    TinyEncoder(EncoderConfig config, int vocab_size);

    void register_params(ParamStore& store, std::mt19937& rng) const;

    /// Contextualized token representations, len x d_model. If attn_capture
    /// is non-null it receives every attention matrix of the pass.
    ad::Var encode(const TokenSequence& seq, TapeBinder& params,
                   std::vector<Eigen::MatrixXd>* attn_capture = nullptr) const;

    const EncoderConfig& config() const { return config_; }
    std::vector<std::string> param_names() const;

private:
    EncoderConfig config_;
    int vocab_size_;
};

/// Max relative gradient error over every parameter entry of `names`,
/// comparing tape gradients against central finite differences of loss_fn.
/// loss_fn must be a deterministic scalar function of the store.
double gradient_check(ParamStore& store, const std::vector<std::string>& names,
                      const std::function<double(const ParamStore&)>& loss_fn,
                      const std::function<std::map<std::string, Eigen::MatrixXd>(
                          const ParamStore&)>& grad_fn,
                      double h = 1e-5);

}  // namespace pverify
