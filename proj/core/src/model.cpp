#include "pverify/model.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pverify {

using nlohmann::json;

StanceHeadKind stance_head_from_name(const std::string& name) {
    if (name == "simple") return StanceHeadKind::Simple;
    if (name == "kgat") return StanceHeadKind::Kgat;
    throw ConfigError("unknown stance head: " + name);
}

const char* stance_head_name(StanceHeadKind k) {
    return k == StanceHeadKind::Simple ? "simple" : "kgat";
}

JointModel::JointModel(ModelConfig config, Tokenizer tokenizer, uint64_t seed)
    : config_(std::move(config)),
      tokenizer_(std::move(tokenizer)),
      encoder_(config_.encoder, tokenizer_.vocab_size()) {
    config_.kgat.validate();
    if (config_.domains.empty()) throw ConfigError("at least one domain required");
    std::mt19937 rng(static_cast<uint32_t>(seed));
    encoder_.register_params(store_, rng);
    register_word_attn_params(store_, config_.encoder.d_model, rng);
    for (const auto& domain : config_.domains)
        register_head_params(store_, config_.encoder.d_model,
                             static_cast<int>(config_.kgat.mus.size()), domain, rng);
}

ForwardPass JointModel::forward(const std::string& claim,
                                const std::vector<std::string>& sentences,
                                SelectionMode mode,
                                const std::vector<int>* gold_mask,
                                const std::string& domain) const {
    ForwardPass fp;
    fp.tape = std::make_unique<ad::Tape>();
    fp.binder = std::make_unique<TapeBinder>(*fp.tape, store_);
    TapeBinder& P = *fp.binder;

    fp.seq = assemble_sequence(claim, sentences, tokenizer_, /*prepend_dummy=*/true,
                               config_.encoder.max_sequence_length);
    fp.token_reps = encoder_.encode(fp.seq, P);
    fp.sentence_reps = pool_sentence_spans(fp.token_reps, fp.seq.span_map, P);
    fp.rationale_probs = score_rationales(fp.sentence_reps, P, domain);

    // Truncation may have dropped trailing sentences; clip the mask to match.
    std::vector<int> clipped_mask;
    const std::vector<int>* mask = gold_mask;
    size_t n_real = fp.seq.span_map.size() - 2;  // minus claim span and dummy
    if (gold_mask && gold_mask->size() > n_real) {
        clipped_mask.assign(gold_mask->begin(), gold_mask->begin() + n_real);
        mask = &clipped_mask;
    }
    fp.selection = select_rationale_inputs(fp.rationale_probs.val(), mode, mask,
                                           fp.seq.has_dummy);

    if (config_.stance_head == StanceHeadKind::Simple) {
        fp.stance_probs = stance_simple(
            ad::row_gather(fp.sentence_reps, fp.selection.rows), P, domain);
    } else {
        ad::Var claim_reps =
            ad::rows(fp.token_reps, fp.seq.span_map[0].first,
                     fp.seq.span_map[0].second - fp.seq.span_map[0].first);
        std::vector<ad::Var> spans;
        for (int row : fp.selection.rows) {
            auto [start, end] = fp.seq.span_map[row + 1];
            spans.push_back(ad::rows(fp.token_reps, start, end - start));
        }
        fp.stance_probs = stance_kgat(claim_reps, spans, config_.kgat, P, domain);
    }
    return fp;
}

ModelOutput JointModel::predict(int64_t claim_id, int64_t doc_id,
                                const std::string& claim,
                                const std::vector<std::string>& sentences,
                                const std::string& domain) const {
    ForwardPass fp = forward(claim, sentences, SelectionMode::Predicted, nullptr, domain);
    ModelOutput out;
    out.claim_id = claim_id;
    out.doc_id = doc_id;
    const Eigen::MatrixXd& probs = fp.rationale_probs.val();
    for (long i = 1; i < probs.rows(); ++i) {  // row 0 is the dummy
        out.rationale_probs.push_back(probs(i, 1));
        if (probs(i, 1) > probs(i, 0)) out.selected.push_back(static_cast<int>(i - 1));
    }
    const Eigen::MatrixXd& st = fp.stance_probs.val();
    out.stance_probs = {st(0, 0), st(0, 1), st(0, 2)};
    return out;
}

void JointModel::reinit_heads(const std::string& domain, std::mt19937& rng) {
    std::vector<std::string> names = word_attn_param_names();
    for (const auto& n : head_param_names(domain)) names.push_back(n);
    for (const auto& name : names) {
        Eigen::MatrixXd& p = store_.at(name);
        // Weight matrices are re-drawn, bias rows zeroed (matching initial layout).
        if (name.find(".w") != std::string::npos)
            init_normal(p, rng);
        else
            p.setZero();
    }
}

std::vector<std::string> JointModel::encoder_param_names() const {
    return encoder_.param_names();
}

std::vector<std::string> JointModel::head_param_names_for(const std::string& domain) const {
    return head_param_names(domain);
}

void JointModel::save_checkpoint(const std::filesystem::path& path,
                                 const Lineage& lineage,
                                 const std::string& train_config_echo) const {
    json j;
    j["format_version"] = 1;
    j["encoder"] = {{"d_model", config_.encoder.d_model},
                    {"n_layers", config_.encoder.n_layers},
                    {"n_heads", config_.encoder.n_heads},
                    {"d_ff", config_.encoder.d_ff},
                    {"max_sequence_length", config_.encoder.max_sequence_length},
                    {"hash_buckets", config_.encoder.hash_buckets}};
    j["kgat"] = {{"mus", config_.kgat.mus}, {"sigmas", config_.kgat.sigmas}};
    j["stance_head"] = stance_head_name(config_.stance_head);
    j["domains"] = config_.domains;
    j["lineage"] = {{"parent_hash", lineage.parent_hash}, {"mode", lineage.mode}};
    j["hash"] = std::to_string(checkpoint_hash());
    if (!train_config_echo.empty()) j["train_config"] = train_config_echo;

    {
        std::ostringstream tok_buf;
        auto tmp = path;
        tmp += ".vocab";
        tokenizer_.save(tmp);
        std::ifstream in(tmp);
        tok_buf << in.rdbuf();
        j["tokenizer"] = tok_buf.str();
        std::filesystem::remove(tmp);
    }

    json params = json::object();
    for (const auto& [name, m] : store_.all()) {
        std::vector<double> data(m.data(), m.data() + m.size());
        params[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
    }
    j["params"] = std::move(params);

    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << j.dump();
}

JointModel JointModel::load_checkpoint(const std::filesystem::path& path,
                                       Lineage* lineage_out) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    json j = json::parse(in);
    if (j.at("format_version").get<int>() != 1)
        throw ConfigError("unsupported checkpoint format version");

    ModelConfig config;
    const auto& e = j.at("encoder");
    config.encoder.d_model = e.at("d_model").get<int>();
    config.encoder.n_layers = e.at("n_layers").get<int>();
    config.encoder.n_heads = e.at("n_heads").get<int>();
    config.encoder.d_ff = e.at("d_ff").get<int>();
    config.encoder.max_sequence_length = e.at("max_sequence_length").get<int>();
    config.encoder.hash_buckets = e.at("hash_buckets").get<int>();
    config.kgat.mus = j.at("kgat").at("mus").get<std::vector<double>>();
    config.kgat.sigmas = j.at("kgat").at("sigmas").get<std::vector<double>>();
    config.stance_head = stance_head_from_name(j.at("stance_head").get<std::string>());
    config.domains = j.at("domains").get<std::vector<std::string>>();

    auto tmp = path;
    tmp += ".vocab.tmp";
    {
        std::ofstream tok_out(tmp);
        tok_out << j.at("tokenizer").get<std::string>();
    }
    Tokenizer tokenizer = Tokenizer::load(tmp);
    std::filesystem::remove(tmp);

    JointModel model(config, std::move(tokenizer), /*seed=*/0);
    for (const auto& [name, pj] : j.at("params").items()) {
        Eigen::MatrixXd& m = model.store_.at(name);
        long rows = pj.at("rows").get<long>(), cols = pj.at("cols").get<long>();
        if (m.rows() != rows || m.cols() != cols)
            throw ConfigError("checkpoint shape mismatch for " + name);
        auto data = pj.at("data").get<std::vector<double>>();
        m = Eigen::Map<Eigen::MatrixXd>(data.data(), rows, cols);
    }
    if (lineage_out) {
        lineage_out->parent_hash = j.at("lineage").at("parent_hash").get<std::string>();
        lineage_out->mode = j.at("lineage").at("mode").get<std::string>();
    }
    return model;
}

}  // namespace pverify
