#include "pverify/heads.hpp"

#include <cmath>
#include <stdexcept>

namespace pverify {

using ad::Var;

KgatConfig KgatConfig::standard() {
    KgatConfig c;
    c.mus.push_back(1.0);
    c.sigmas.push_back(1e-3);
    for (int i = 0; i < 20; ++i) {
        c.mus.push_back(0.9 - 0.1 * i);
        c.sigmas.push_back(0.1);
    }
    return c;
}

void KgatConfig::validate() const {
    if (mus.empty() || mus.size() != sigmas.size())
        throw ConfigError("kernel bank must be non-empty with matched widths");
    for (double s : sigmas)
        if (s <= 0.0) throw ConfigError("kernel widths must be positive");
}

void register_word_attn_params(ParamStore& store, int d_model, std::mt19937& rng) {
    init_normal(store.create("word_attn.w1", d_model, d_model), rng);
    store.create("word_attn.b1", 1, d_model);
    init_normal(store.create("word_attn.w2", d_model, 1), rng);
    store.create("word_attn.b2", 1, 1);
}

std::vector<std::string> word_attn_param_names() {
    return {"word_attn.w1", "word_attn.b1", "word_attn.w2", "word_attn.b2"};
}

void register_head_params(ParamStore& store, int d_model, int n_kernels,
                          const std::string& p, std::mt19937& rng) {
    init_normal(store.create(p + "rationale.w1", d_model, d_model), rng);
    store.create(p + "rationale.b1", 1, d_model);
    init_normal(store.create(p + "rationale.w2", d_model, 2), rng);
    store.create(p + "rationale.b2", 1, 2);

    init_normal(store.create(p + "sent_attn.w1", d_model, d_model), rng);
    store.create(p + "sent_attn.b1", 1, d_model);
    init_normal(store.create(p + "sent_attn.w2", d_model, 1), rng);
    store.create(p + "sent_attn.b2", 1, 1);

    init_normal(store.create(p + "stance.w1", d_model, d_model), rng);
    store.create(p + "stance.b1", 1, d_model);
    init_normal(store.create(p + "stance.w2", d_model, 3), rng);
    store.create(p + "stance.b2", 1, 3);

    init_normal(store.create(p + "kgat.readout.w1", n_kernels, n_kernels), rng);
    store.create(p + "kgat.readout.b1", 1, n_kernels);
    init_normal(store.create(p + "kgat.readout.w2", n_kernels, 1), rng);
    store.create(p + "kgat.readout.b2", 1, 1);
    init_normal(store.create(p + "kgat.stance.w1", d_model, d_model), rng);
    store.create(p + "kgat.stance.b1", 1, d_model);
    init_normal(store.create(p + "kgat.stance.w2", d_model, 3), rng);
    store.create(p + "kgat.stance.b2", 1, 3);
}

std::vector<std::string> head_param_names(const std::string& p) {
    std::vector<std::string> names;
    for (const char* s :
         {"rationale.w1", "rationale.b1", "rationale.w2", "rationale.b2",
          "sent_attn.w1", "sent_attn.b1", "sent_attn.w2", "sent_attn.b2",
          "stance.w1", "stance.b1", "stance.w2", "stance.b2",
          "kgat.readout.w1", "kgat.readout.b1", "kgat.readout.w2", "kgat.readout.b2",
          "kgat.stance.w1", "kgat.stance.b1", "kgat.stance.w2", "kgat.stance.b2"})
        names.push_back(p + s);
    return names;
}

namespace {

// tanh MLP producing one logit per row.
Var attn_logits(Var reps, TapeBinder& params, const std::string& prefix) {
    Var hidden = ad::tanh_(ad::add_rowvec(ad::matmul(reps, params(prefix + ".w1")),
                                          params(prefix + ".b1")));
    return ad::add_rowvec(ad::matmul(hidden, params(prefix + ".w2")),
                          params(prefix + ".b2"));
}

Var attention_pool(Var reps, TapeBinder& params, const std::string& prefix) {
    Var logits = attn_logits(reps, params, prefix);       // m x 1
    Var alpha = ad::softmax_rows(ad::transpose(logits));  // 1 x m
    return ad::matmul(alpha, reps);                       // 1 x d
}

Var mlp2_softmax(Var input, TapeBinder& params, const std::string& prefix) {
    Var hidden = ad::relu_(ad::add_rowvec(ad::matmul(input, params(prefix + ".w1")),
                                          params(prefix + ".b1")));
    Var logits = ad::add_rowvec(ad::matmul(hidden, params(prefix + ".w2")),
                                params(prefix + ".b2"));
    return ad::softmax_rows(logits);
}

Var row_normalize(Var x) {
    Var norm = ad::sqrt_(ad::add_scalar(ad::rowwise_sum(ad::square_(x)), 1e-12));
    return ad::div_colvec(x, norm);
}

}  // namespace

Var word_attention_pool(Var span_reps, TapeBinder& params) {
    if (span_reps.rows() < 1)
        throw std::logic_error("word_attention_pool: empty span");
    return attention_pool(span_reps, params, "word_attn");
}

Var pool_sentence_spans(Var token_reps,
                        const std::vector<std::pair<int, int>>& span_map,
                        TapeBinder& params) {
    std::vector<Var> rows;
    for (size_t i = 1; i < span_map.size(); ++i) {
        auto [start, end] = span_map[i];
        rows.push_back(word_attention_pool(ad::rows(token_reps, start, end - start), params));
    }
    return ad::concat_rows(rows);
}

Var score_rationales(Var sent_reps, TapeBinder& params, const std::string& p) {
    if (sent_reps.rows() < 1)
        throw std::logic_error("score_rationales: no sentence rows");
    return mlp2_softmax(sent_reps, params, p + "rationale");
}

RationaleSelection select_rationale_inputs(const Eigen::MatrixXd& rationale_probs,
                                           SelectionMode mode,
                                           const std::vector<int>* gold_mask,
                                           bool has_dummy) {
    RationaleSelection sel;
    int first_real = has_dummy ? 1 : 0;
    long n = rationale_probs.rows();
    if (mode == SelectionMode::Gold) {
        if (!gold_mask) throw std::logic_error("gold selection requires a mask");
        for (long i = first_real; i < n; ++i)
            if ((*gold_mask)[i - first_real] != 0) sel.rows.push_back(static_cast<int>(i));
    } else {
        for (long i = first_real; i < n; ++i)
            if (rationale_probs(i, 1) > rationale_probs(i, 0))
                sel.rows.push_back(static_cast<int>(i));
    }
    if (sel.rows.empty()) {
        if (!has_dummy)
            throw std::logic_error("empty selection without a dummy sentence");
        sel.rows.push_back(0);
        sel.used_dummy = true;
    }
    return sel;
}

Var stance_simple(Var selected_reps, TapeBinder& params, const std::string& p) {
    if (selected_reps.rows() < 1)
        throw std::logic_error("stance_simple: no selected rows");
    Var pooled = attention_pool(selected_reps, params, p + "sent_attn");
    return mlp2_softmax(pooled, params, p + "stance");
}

Var stance_kgat(Var claim_token_reps,
                const std::vector<ad::Var>& selected_token_spans,
                const KgatConfig& config, TapeBinder& params,
                const std::string& p) {
    config.validate();
    if (selected_token_spans.empty())
        throw std::logic_error("stance_kgat: no selected spans");

    Var claim_normed = row_normalize(claim_token_reps);

    std::vector<Var> scores;       // per-sentence evidence scores, 1 x 1 each
    std::vector<Var> sent_vecs;    // per-sentence mean token reps, 1 x d each
    for (const Var& span : selected_token_spans) {
        Var sim = ad::matmul(claim_normed, ad::transpose(row_normalize(span)));
        std::vector<Var> features;  // one 1 x 1 kernel feature each
        for (size_t k = 0; k < config.mus.size(); ++k) {
            double inv = -1.0 / (2.0 * config.sigmas[k] * config.sigmas[k]);
            Var kernel = ad::exp_(ad::scale(
                ad::square_(ad::add_scalar(sim, -config.mus[k])), inv));
            Var pooled = ad::log_(ad::add_scalar(ad::rowwise_sum(kernel), 1e-10));
            features.push_back(ad::mean_all(pooled));
        }
        Var f = ad::concat_cols(features);  // 1 x K
        Var hidden = ad::tanh_(ad::add_rowvec(
            ad::matmul(f, params(p + "kgat.readout.w1")), params(p + "kgat.readout.b1")));
        scores.push_back(ad::add_rowvec(ad::matmul(hidden, params(p + "kgat.readout.w2")),
                                        params(p + "kgat.readout.b2")));
        sent_vecs.push_back(ad::mean_rows(span));
    }

    Var alpha = ad::softmax_rows(ad::concat_cols(scores));      // 1 x k
    Var paragraph = ad::matmul(alpha, ad::concat_rows(sent_vecs));  // 1 x d
    return mlp2_softmax(paragraph, params, p + "kgat.stance");
}

}  // namespace pverify
