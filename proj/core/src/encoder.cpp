#include "pverify/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace pverify {

void EncoderConfig::validate() const {
    if (d_model <= 0 || n_layers < 0 || n_heads <= 0 || d_ff <= 0)
        throw ConfigError("encoder dimensions must be positive");
    if (d_model % n_heads != 0)
        throw ConfigError("d_model must be divisible by n_heads");
    if (max_sequence_length < 4)
        throw ConfigError("max_sequence_length too small");
}

TokenSequence assemble_sequence(const std::string& claim,
                                const std::vector<std::string>& sentences,
                                const Tokenizer& tokenizer, bool prepend_dummy,
                                int max_sequence_length) {
    if (sentences.empty()) throw ConfigError("assemble_sequence: no sentences");

    std::vector<std::vector<int>> sent_ids;
    if (prepend_dummy) sent_ids.push_back(tokenizer.encode(kDummySentence));
    for (const auto& s : sentences) sent_ids.push_back(tokenizer.encode(s));

    std::vector<int> claim_ids = tokenizer.encode(claim);

    // [CLS] claim, then per sentence [SEP] tokens, plus trailing [SEP].
    auto total_len = [&](size_t n_sents) {
        size_t len = 1 + claim_ids.size() + 1;  // CLS + claim + trailing SEP
        for (size_t i = 0; i < n_sents; ++i) len += 1 + sent_ids[i].size();
        return len;
    };

    size_t keep = sent_ids.size();
    size_t min_keep = prepend_dummy ? 2u : 1u;  // dummy alone is not a paragraph
    min_keep = std::min(min_keep, sent_ids.size());
    while (keep > min_keep && total_len(keep) > static_cast<size_t>(max_sequence_length))
        --keep;
    if (total_len(keep) > static_cast<size_t>(max_sequence_length))
        throw ConfigError("sequence cannot fit max_sequence_length");

    TokenSequence seq;
    seq.has_dummy = prepend_dummy;
    seq.dropped_sentences = static_cast<int>(sent_ids.size() - keep);

    seq.token_ids.push_back(Tokenizer::kClsId);
    seq.token_ids.insert(seq.token_ids.end(), claim_ids.begin(), claim_ids.end());
    seq.span_map.emplace_back(0, static_cast<int>(seq.token_ids.size()));

    for (size_t i = 0; i < keep; ++i) {
        int start = static_cast<int>(seq.token_ids.size());
        seq.token_ids.push_back(Tokenizer::kSepId);
        seq.token_ids.insert(seq.token_ids.end(), sent_ids[i].begin(), sent_ids[i].end());
        int end = static_cast<int>(seq.token_ids.size());
        if (i + 1 == keep) end += 1;  // trailing SEP joins the last span
        seq.span_map.emplace_back(start, end);
    }
    seq.token_ids.push_back(Tokenizer::kSepId);
    return seq;
}

TinyEncoder::TinyEncoder(EncoderConfig config, int vocab_size)
    : config_(config), vocab_size_(vocab_size) {
    config_.validate();
}

namespace {
std::string layer_name(int layer, const char* suffix) {
    return "encoder.layer" + std::to_string(layer) + "." + suffix;
}
}  // namespace

void TinyEncoder::register_params(ParamStore& store, std::mt19937& rng) const {
    int d = config_.d_model;
    init_normal(store.create("encoder.embedding", vocab_size_, d), rng);
    init_normal(store.create("encoder.positional", config_.max_sequence_length, d), rng);
    for (int l = 0; l < config_.n_layers; ++l) {
        for (const char* w : {"wq", "wk", "wv", "wo"})
            init_normal(store.create(layer_name(l, w), d, d), rng);
        for (const char* b : {"bq", "bk", "bv", "bo"})
            store.create(layer_name(l, b), 1, d);
        init_normal(store.create(layer_name(l, "ff_w1"), d, config_.d_ff), rng);
        store.create(layer_name(l, "ff_b1"), 1, config_.d_ff);
        init_normal(store.create(layer_name(l, "ff_w2"), config_.d_ff, d), rng);
        store.create(layer_name(l, "ff_b2"), 1, d);
        store.create(layer_name(l, "ln1_g"), 1, d).setOnes();
        store.create(layer_name(l, "ln1_b"), 1, d);
        store.create(layer_name(l, "ln2_g"), 1, d).setOnes();
        store.create(layer_name(l, "ln2_b"), 1, d);
    }
}

std::vector<std::string> TinyEncoder::param_names() const {
    std::vector<std::string> names{"encoder.embedding", "encoder.positional"};
    for (int l = 0; l < config_.n_layers; ++l)
        for (const char* s : {"wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo",
                              "ff_w1", "ff_b1", "ff_w2", "ff_b2",
                              "ln1_g", "ln1_b", "ln2_g", "ln2_b"})
            names.push_back(layer_name(l, s));
    return names;
}

namespace {

using ad::Var;

Var layer_norm(Var x, Var gain, Var bias) {
    constexpr double kEps = 1e-5;
    Var mean = ad::scale(ad::rowwise_sum(x), 1.0 / static_cast<double>(x.cols()));
    Var centered = ad::sub(x, ad::matmul(mean, x.tape()->constant(
                                                   Eigen::MatrixXd::Ones(1, x.cols()))));
    Var var = ad::scale(ad::rowwise_sum(ad::square_(centered)),
                        1.0 / static_cast<double>(x.cols()));
    Var std = ad::sqrt_(ad::add_scalar(var, kEps));
    Var normed = ad::div_colvec(centered, std);
    Var ones = x.tape()->constant(Eigen::MatrixXd::Ones(x.rows(), 1));
    return ad::add_rowvec(ad::mul(normed, ad::matmul(ones, gain)), bias);
}

}  // namespace

ad::Var TinyEncoder::encode(const TokenSequence& seq, TapeBinder& params,
                            std::vector<Eigen::MatrixXd>* attn_capture) const {
    ad::Tape& tape = *params("encoder.embedding").tape();
    long len = static_cast<long>(seq.token_ids.size());
    if (len > config_.max_sequence_length)
        throw std::logic_error("sequence exceeds positional table");
    for (int id : seq.token_ids)
        if (id < 0 || id >= vocab_size_)
            throw std::logic_error("token id out of vocabulary range");

    std::vector<int> positions(len);
    for (long i = 0; i < len; ++i) positions[i] = static_cast<int>(i);

    Var x = ad::add(ad::row_gather(params("encoder.embedding"), seq.token_ids),
                    ad::row_gather(params("encoder.positional"), positions));

    int d = config_.d_model;
    int dk = d / config_.n_heads;
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    for (int l = 0; l < config_.n_layers; ++l) {
        Var q = ad::add_rowvec(ad::matmul(x, params(layer_name(l, "wq"))),
                               params(layer_name(l, "bq")));
        Var k = ad::add_rowvec(ad::matmul(x, params(layer_name(l, "wk"))),
                               params(layer_name(l, "bk")));
        Var v = ad::add_rowvec(ad::matmul(x, params(layer_name(l, "wv"))),
                               params(layer_name(l, "bv")));

        std::vector<Var> head_outputs;
        for (int h = 0; h < config_.n_heads; ++h) {
            Var qh = ad::cols(q, h * dk, dk);
            Var kh = ad::cols(k, h * dk, dk);
            Var vh = ad::cols(v, h * dk, dk);
            Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_dk);
            Var attn = ad::softmax_rows(scores);
            if (attn_capture) attn_capture->push_back(attn.val());
            head_outputs.push_back(ad::matmul(attn, vh));
        }
        Var attn_out = ad::add_rowvec(
            ad::matmul(ad::concat_cols(head_outputs), params(layer_name(l, "wo"))),
            params(layer_name(l, "bo")));
        x = layer_norm(ad::add(x, attn_out), params(layer_name(l, "ln1_g")),
                       params(layer_name(l, "ln1_b")));

        Var hidden = ad::relu_(ad::add_rowvec(
            ad::matmul(x, params(layer_name(l, "ff_w1"))), params(layer_name(l, "ff_b1"))));
        Var ff = ad::add_rowvec(ad::matmul(hidden, params(layer_name(l, "ff_w2"))),
                                params(layer_name(l, "ff_b2")));
        x = layer_norm(ad::add(x, ff), params(layer_name(l, "ln2_g")),
                       params(layer_name(l, "ln2_b")));
    }
    (void)tape;
    return x;
}

double gradient_check(ParamStore& store, const std::vector<std::string>& names,
                      const std::function<double(const ParamStore&)>& loss_fn,
                      const std::function<std::map<std::string, Eigen::MatrixXd>(
                          const ParamStore&)>& grad_fn,
                      double h) {
    auto grads = grad_fn(store);
    double max_rel_err = 0.0;
    constexpr double kDenEps = 1e-10;
    for (const auto& name : names) {
        auto git = grads.find(name);
        Eigen::MatrixXd& p = store.at(name);
        for (long c = 0; c < p.cols(); ++c) {
            for (long r = 0; r < p.rows(); ++r) {
                double orig = p(r, c);
                p(r, c) = orig + h;
                double up = loss_fn(store);
                p(r, c) = orig - h;
                double down = loss_fn(store);
                p(r, c) = orig;
                double numeric = (up - down) / (2.0 * h);
                double analytic = git == grads.end() ? 0.0 : git->second(r, c);
                if (!std::isfinite(analytic))
                    throw std::runtime_error("non-finite gradient for " + name);
                double rel = std::abs(analytic - numeric) /
                             (std::abs(analytic) + std::abs(numeric) + kDenEps);
                max_rel_err = std::max(max_rel_err, rel);
            }
        }
    }
    return max_rel_err;
}

}  // namespace pverify
