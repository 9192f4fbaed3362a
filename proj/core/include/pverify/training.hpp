#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pverify/model.hpp"
#include "pverify/types.hpp"

namespace pverify {

enum class TrainMode { ScifactOnly, FeverPretrainThenFinetune, DomainAdaptation };

TrainMode train_mode_from_name(const std::string& name);
const char* train_mode_name(TrainMode m);

struct TrainConfig {
    double gamma = 6.0;
    int k_retrieval = 30;
    int k_train = 12;
    int k_fever = 5;
    double learning_rate = 5e-6;          // heads
    double encoder_learning_rate = 1e-5;
    int batch_size = 1;
    int total_epochs = 10;
    double dropout = 0.0;
    double p_drop_sentence = 0.3;         // down-sampling rate
    uint64_t seed = 42;
    TrainMode mode = TrainMode::ScifactOnly;
    StanceHeadKind stance_head = StanceHeadKind::Simple;
    bool augment_downsample = true;

    void validate() const;
    static TrainConfig from_json_file(const std::filesystem::path& path);
    std::string to_json() const;
};

struct LossBreakdown {
    double rationale = 0.0;
    double stance = 0.0;
    double total = 0.0;
};

/// Eq.-style joint loss on plain probabilities. rationale_probs holds p_r per
/// sentence (dummy included, its gold label 0); gold_mask matches it.
/// L_rationale is the mean sentence cross-entropy, L_stance the 3-way
/// cross-entropy, total = gamma * rationale + stance.
LossBreakdown joint_loss(const std::vector<double>& rationale_probs,
                         const std::vector<int>& gold_mask,
                         const std::array<double, 3>& stance_probs,
                         Stance gold_stance, double gamma);

/// sin(pi/2 * progress) with progress = (current_epoch-1)/(total_epoch-1).
/// current_epoch is 1-based; total_epoch must be >= 2.
double scheduled_sampling_prob(int current_epoch, int total_epoch);

/// Returns Predicted with probability p_sample.
SelectionMode choose_rationale_source(double p_sample, std::mt19937& rng);

struct EpochLog {
    int epoch = 0;
    double loss_rationale = 0.0;
    double loss_stance = 0.0;
    double loss_total = 0.0;
    double p_sample = 0.0;
    PRF1 dev_selection_label;
};

struct TrainResult {
    std::vector<EpochLog> epochs;
    int best_epoch = 0;
    double best_dev_f1 = 0.0;
};

class Trainer {
public:
    Trainer(TrainConfig config) : config_(config) { config_.validate(); }

    /// One gradient step on one instance. Returns the loss breakdown.
    /// The domain prefix selects the head set (domain adaptation).
    LossBreakdown step(JointModel& model, const ClaimInstance& inst,
                       SelectionMode mode, const std::string& domain = "");

    /// Full loop over total_epochs; keeps the best checkpoint by dev
    /// sentence-level Selection+Label F1 at `checkpoint_path` when given.
    /// fever_instances are used by the transfer-learning modes.
    TrainResult train(JointModel& model,
                      const std::vector<ClaimInstance>& train_instances,
                      const std::vector<ClaimInstance>& dev_instances,
                      const std::vector<Claim>& dev_gold,
                      const std::vector<ClaimInstance>& fever_instances = {},
                      const std::optional<std::filesystem::path>& checkpoint_path = {},
                      std::ostream* metrics_log = nullptr);

    AdamOptimizer& optimizer() { return optimizer_; }

private:
    TrainConfig config_;
    AdamOptimizer optimizer_;
};

/// Dev-set sentence-level Selection+Label F1 of a model over instances.
PRF1 evaluate_selection_label(const JointModel& model,
                              const std::vector<ClaimInstance>& instances,
                              const std::vector<Claim>& gold,
                              const std::string& domain = "");

}  // namespace pverify
