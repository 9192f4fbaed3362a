#include "pverify/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "pverify/data.hpp"
#include "pverify/evaluation.hpp"

namespace pverify {

using nlohmann::json;

TrainMode train_mode_from_name(const std::string& name) {
    if (name == "scifact_only") return TrainMode::ScifactOnly;
    if (name == "fever_pretrain_then_finetune") return TrainMode::FeverPretrainThenFinetune;
    if (name == "domain_adaptation") return TrainMode::DomainAdaptation;
    throw ConfigError("unknown train mode: " + name);
}

const char* train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::ScifactOnly: return "scifact_only";
        case TrainMode::FeverPretrainThenFinetune: return "fever_pretrain_then_finetune";
        case TrainMode::DomainAdaptation: return "domain_adaptation";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (gamma <= 0.0) throw ConfigError("gamma must be > 0");
    if (total_epochs < 2) throw ConfigError("total_epochs must be >= 2");
    if (learning_rate <= 0.0 || encoder_learning_rate <= 0.0)
        throw ConfigError("learning rates must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (p_drop_sentence < 0.0 || p_drop_sentence >= 1.0)
        throw ConfigError("p_drop_sentence must be in [0, 1)");
}

TrainConfig TrainConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    json j = json::parse(in);
    TrainConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "gamma") c.gamma = value.get<double>();
        else if (key == "k_retrieval") c.k_retrieval = value.get<int>();
        else if (key == "k_train") c.k_train = value.get<int>();
        else if (key == "k_fever") c.k_fever = value.get<int>();
        else if (key == "learning_rate") c.learning_rate = value.get<double>();
        else if (key == "encoder_learning_rate") c.encoder_learning_rate = value.get<double>();
        else if (key == "batch_size") c.batch_size = value.get<int>();
        else if (key == "total_epochs") c.total_epochs = value.get<int>();
        else if (key == "dropout") c.dropout = value.get<double>();
        else if (key == "p_drop_sentence") c.p_drop_sentence = value.get<double>();
        else if (key == "seed") c.seed = value.get<uint64_t>();
        else if (key == "mode") c.mode = train_mode_from_name(value.get<std::string>());
        else if (key == "stance_head") c.stance_head = stance_head_from_name(value.get<std::string>());
        else if (key == "augment_downsample") c.augment_downsample = value.get<bool>();
        else throw ConfigError("unknown config key: " + key);
    }
    c.validate();
    return c;
}

std::string TrainConfig::to_json() const {
    json j{{"gamma", gamma},
           {"k_retrieval", k_retrieval},
           {"k_train", k_train},
           {"k_fever", k_fever},
           {"learning_rate", learning_rate},
           {"encoder_learning_rate", encoder_learning_rate},
           {"batch_size", batch_size},
           {"total_epochs", total_epochs},
           {"dropout", dropout},
           {"p_drop_sentence", p_drop_sentence},
           {"seed", seed},
           {"mode", train_mode_name(mode)},
           {"stance_head", stance_head_name(stance_head)},
           {"augment_downsample", augment_downsample}};
    return j.dump();
}

namespace {

int stance_index(Stance s) {
    switch (s) {
        case Stance::Supports: return 0;
        case Stance::Refutes: return 1;
        case Stance::NoInfo: return 2;
    }
    return 2;
}

double clamped_log(double p) {
    if (p < 1e-12) {
        std::cerr << "warning: probability " << p << " clamped at 1e-12\n";
        p = 1e-12;
    }
    return std::log(p);
}

}  // namespace

LossBreakdown joint_loss(const std::vector<double>& rationale_probs,
                         const std::vector<int>& gold_mask,
                         const std::array<double, 3>& stance_probs,
                         Stance gold_stance, double gamma) {
    if (gamma <= 0.0) throw ConfigError("gamma must be > 0");
    if (rationale_probs.size() != gold_mask.size())
        throw ConfigError("mask length mismatch");
    LossBreakdown out;
    for (size_t i = 0; i < rationale_probs.size(); ++i) {
        double p_gold = gold_mask[i] ? rationale_probs[i] : 1.0 - rationale_probs[i];
        out.rationale -= clamped_log(p_gold);
    }
    out.rationale /= static_cast<double>(rationale_probs.size());
    out.stance = -clamped_log(stance_probs[stance_index(gold_stance)]);
    out.total = gamma * out.rationale + out.stance;
    return out;
}

double scheduled_sampling_prob(int current_epoch, int total_epoch) {
    if (total_epoch < 2) throw ConfigError("total_epoch must be >= 2");
    if (current_epoch < 1 || current_epoch > total_epoch)
        throw ConfigError("current_epoch out of range");
    double progress = static_cast<double>(current_epoch - 1) /
                      static_cast<double>(total_epoch - 1);
    return std::sin(M_PI / 2.0 * progress);
}

SelectionMode choose_rationale_source(double p_sample, std::mt19937& rng) {
    if (p_sample < 0.0 || p_sample > 1.0)
        throw ConfigError("p_sample must be in [0, 1]");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return unif(rng) < p_sample ? SelectionMode::Predicted : SelectionMode::Gold;
}

LossBreakdown Trainer::step(JointModel& model, const ClaimInstance& inst,
                            SelectionMode mode, const std::string& domain) {
    ForwardPass fp = model.forward(inst.claim_text, inst.sentences, mode,
                                   &inst.rationale_mask, domain);

    // Gold labels per sentence row: dummy first with label 0, then the real
    // mask clipped to however many sentences survived truncation.
    long n_rows = fp.rationale_probs.rows();
    Eigen::MatrixXd target = Eigen::MatrixXd::Zero(n_rows, 2);
    target(0, 0) = 1.0;  // dummy: not a rationale
    for (long i = 1; i < n_rows; ++i) {
        int gold = inst.rationale_mask[i - 1];
        target(i, gold ? 1 : 0) = 1.0;
    }

    ad::Tape& tape = *fp.tape;
    ad::Var t_const = tape.constant(target);
    ad::Var l_rat = ad::neg(ad::scale(
        ad::sum_all(ad::mul(t_const, ad::log_(fp.rationale_probs))),
        1.0 / static_cast<double>(n_rows)));
    ad::Var l_st = ad::neg(
        ad::log_(ad::cols(fp.stance_probs, stance_index(inst.stance), 1)));
    ad::Var total = ad::add(ad::scale(l_rat, config_.gamma), l_st);

    tape.backward(total);
    auto grads = fp.binder->grads();
    optimizer_.step(model.params(), grads, [this](const std::string& name) {
        return name.rfind("encoder.", 0) == 0 ? config_.encoder_learning_rate
                                              : config_.learning_rate;
    });

    LossBreakdown out;
    out.rationale = l_rat.scalar();
    out.stance = l_st.scalar();
    out.total = total.scalar();
    return out;
}

PRF1 evaluate_selection_label(const JointModel& model,
                              const std::vector<ClaimInstance>& instances,
                              const std::vector<Claim>& gold,
                              const std::string& domain) {
    std::vector<Prediction> preds;
    for (const auto& inst : instances) {
        ModelOutput out = model.predict(inst.claim_id, inst.doc_id, inst.claim_text,
                                        inst.sentences, domain);
        Prediction p;
        p.claim_id = out.claim_id;
        p.doc_id = out.doc_id;
        p.predicted_sentences = out.selected;
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (out.stance_probs[i] > out.stance_probs[best]) best = i;
        p.predicted_label = best == 0   ? Stance::Supports
                            : best == 1 ? Stance::Refutes
                                        : Stance::NoInfo;
        preds.push_back(std::move(p));
    }
    return sentence_level_f1(postprocess(std::move(preds)), gold, true);
}

namespace {

struct PhasePlan {
    const std::vector<ClaimInstance>* instances;
    std::string domain;
};

void log_epoch(std::ostream* log, const EpochLog& e) {
    if (!log) return;
    json j{{"epoch", e.epoch},
           {"L_rationale", e.loss_rationale},
           {"L_stance", e.loss_stance},
           {"L_total", e.loss_total},
           {"p_sample", e.p_sample},
           {"dev", {{"precision", e.dev_selection_label.precision},
                    {"recall", e.dev_selection_label.recall},
                    {"f1", e.dev_selection_label.f1}}}};
    (*log) << j.dump() << '\n';
}

}  // namespace

TrainResult Trainer::train(JointModel& model,
                           const std::vector<ClaimInstance>& train_instances,
                           const std::vector<ClaimInstance>& dev_instances,
                           const std::vector<Claim>& dev_gold,
                           const std::vector<ClaimInstance>& fever_instances,
                           const std::optional<std::filesystem::path>& checkpoint_path,
                           std::ostream* metrics_log) {
    std::mt19937 rng(static_cast<uint32_t>(config_.seed));
    TrainResult result;

    auto run_phase = [&](const std::vector<ClaimInstance>& data,
                         const std::string& domain, const std::string& phase_mode,
                         bool track_best, const std::vector<ClaimInstance>* alt_data,
                         const std::string& alt_domain) -> bool {
        size_t alt_pos = 0;
        for (int epoch = 1; epoch <= config_.total_epochs; ++epoch) {
            double p_sample = scheduled_sampling_prob(epoch, config_.total_epochs);
            EpochLog log_entry;
            log_entry.epoch = epoch;
            log_entry.p_sample = p_sample;

            std::vector<ClaimInstance> epoch_data = data;
            if (config_.augment_downsample && config_.p_drop_sentence > 0.0) {
                for (const auto& inst : data)
                    if (inst.origin == InstanceOrigin::Gold)
                        epoch_data.push_back(
                            downsample_sentences(inst, config_.p_drop_sentence, rng));
            }
            std::shuffle(epoch_data.begin(), epoch_data.end(), rng);

            size_t n_steps = 0;
            for (const auto& inst : epoch_data) {
                SelectionMode mode = choose_rationale_source(p_sample, rng);
                LossBreakdown lb = step(model, inst, mode, domain);
                if (!std::isfinite(lb.total)) {
                    std::cerr << "non-finite loss at epoch " << epoch
                              << "; aborting, last checkpoint retained\n";
                    return false;
                }
                log_entry.loss_rationale += lb.rationale;
                log_entry.loss_stance += lb.stance;
                log_entry.loss_total += lb.total;
                ++n_steps;

                // Domain adaptation interleaves one batch of the other
                // domain per step.
                if (alt_data && !alt_data->empty()) {
                    const ClaimInstance& alt = (*alt_data)[alt_pos % alt_data->size()];
                    ++alt_pos;
                    SelectionMode alt_mode = choose_rationale_source(p_sample, rng);
                    step(model, alt, alt_mode, alt_domain);
                }
            }
            if (n_steps > 0) {
                log_entry.loss_rationale /= static_cast<double>(n_steps);
                log_entry.loss_stance /= static_cast<double>(n_steps);
                log_entry.loss_total /= static_cast<double>(n_steps);
            }

            if (track_best) {
                log_entry.dev_selection_label =
                    evaluate_selection_label(model, dev_instances, dev_gold, domain);
                if (result.best_epoch == 0 ||
                    log_entry.dev_selection_label.f1 > result.best_dev_f1) {
                    result.best_dev_f1 = log_entry.dev_selection_label.f1;
                    result.best_epoch = epoch;
                    if (checkpoint_path) {
                        Lineage lineage{"", phase_mode};
                        model.save_checkpoint(*checkpoint_path, lineage,
                                              config_.to_json());
                    }
                }
            }
            log_epoch(metrics_log, log_entry);
            result.epochs.push_back(log_entry);
        }
        return true;
    };

    switch (config_.mode) {
        case TrainMode::ScifactOnly:
            run_phase(train_instances, "", "scifact_only", true, nullptr, "");
            break;
        case TrainMode::FeverPretrainThenFinetune: {
            if (!run_phase(fever_instances, "", "fever_pretrain", false, nullptr, ""))
                break;
            std::mt19937 reinit_rng(static_cast<uint32_t>(config_.seed) + 1);
            model.reinit_heads("", reinit_rng);
            for (const auto& name : word_attn_param_names()) optimizer_.reset(name);
            for (const auto& name : head_param_names("")) optimizer_.reset(name);
            run_phase(train_instances, "", "fever_pretrain_then_finetune", true,
                      nullptr, "");
            break;
        }
        case TrainMode::DomainAdaptation:
            run_phase(train_instances, "scifact.", "domain_adaptation", true,
                      &fever_instances, "fever.");
            break;
    }
    return result;
}

}  // namespace pverify
