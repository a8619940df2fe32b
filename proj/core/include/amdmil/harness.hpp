#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "amdmil/metrics.hpp"
#include "amdmil/mil.hpp"
#include "amdmil/synthdata.hpp"

namespace amdmil {

/// Component switches of the ablation lattice. Legal sets satisfy
/// trainable => agent, mask => trainable, denoise => mask.
struct AblationFlags {
    bool agent = true;
    bool trainable = true;
    bool mask = true;
    bool denoise = true;

    void validate() const;
    friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

/// Variant selected by a legal flag set; agent = false selects Nystrom.
Aggregator aggregator_for(const AblationFlags& flags);
/// Inverse of aggregator_for for the lattice variants.
std::optional<AblationFlags> flags_for(Aggregator a);

inline constexpr int kConfigSchemaVersion = 1;

struct TrainConfig {
    double lr = 2e-4;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t epochs = 30;
    std::uint64_t seed = 7;
    Aggregator aggregator = Aggregator::Amd;
    /// When set, overrides `aggregator` through aggregator_for().
    std::optional<AblationFlags> ablation_flags;
    std::size_t n_agents = 8;
    std::size_t landmarks = 8;
    std::size_t nystrom_iters = 6;
    ThresholdMode threshold_mode = ThresholdMode::Linear;
    std::size_t cnn_groups = 4;
    bool raw_product = false;
    /// 0 disables early stopping. Otherwise every fifth training bag is held
    /// out and the parameters with the best validation AUC are kept.
    std::size_t early_stop_patience = 0;
    std::size_t folds = 6;
    bool stratified = true;
    /// Folds trained concurrently.
    std::size_t jobs = 1;

    void validate() const;
    Aggregator resolved_aggregator() const;
    AttentionConfig attention_config(std::size_t feature_dim) const;
    AdamConfig adam() const;
};

struct FoldResult {
    std::size_t fold = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::vector<double> epoch_loss;
    std::size_t epochs_run = 0;
    double acc = 0.0;
    double macro_f1 = 0.0;
    double auc = 0.0;
    double seconds = 0.0;
};

struct BagAttention {
    std::string id;
    std::size_t fold = 0;
    std::uint32_t label = 0;
    std::vector<double> scores;
    std::optional<std::vector<std::uint8_t>> instance_labels;
};

struct RunRecord {
    TrainConfig config;
    std::size_t feature_dim = 0;
    std::size_t classes = 0;
    std::vector<FoldResult> folds;
    MeanStd acc;
    MeanStd macro_f1;
    MeanStd auc;
    /// Test-fold attention for every bag.
    std::vector<BagAttention> attention;
    double seconds = 0.0;
};

struct EvalResult {
    std::vector<std::size_t> y_true;
    std::vector<std::size_t> y_pred;
    std::vector<std::vector<double>> probabilities;
    double acc = 0.0;
    double macro_f1 = 0.0;
    /// NaN when the evaluated set holds a single class.
    double auc = 0.0;
};

EvalResult evaluate(const Model& model, const std::vector<Bag>& bags, const std::vector<std::size_t>& indices);

struct TrainOutcome {
    RunRecord record;
    std::vector<Model> models;  // one per fold
};

/// Cross-validated training: per fold, Adam with one bag per step, then test
/// metrics on the held-out fold. Throws NumericError on a non-finite loss.
TrainOutcome train_with_models(const std::vector<Bag>& bags, const FoldPlan& plan, const TrainConfig& cfg);
RunRecord train(const std::vector<Bag>& bags, const FoldPlan& plan, const TrainConfig& cfg);

/// Trains one model on `train_bags` and evaluates it on `test_bags`
/// (transfer protocol; no folds). The record holds a single fold entry.
TrainOutcome train_transfer(const std::vector<Bag>& train_bags, const std::vector<Bag>& test_bags,
                            const TrainConfig& cfg);

/// The five lattice rows, in order: Nystrom; agent; agent+train;
/// agent+train+mask; full.
std::vector<AblationFlags> ablation_rows();
std::vector<RunRecord> ablation_suite(const std::vector<Bag>& bags, const FoldPlan& plan, const TrainConfig& base);

struct SweepPoint {
    std::size_t agents = 0;
    RunRecord record;
};
std::vector<SweepPoint> agent_count_sweep(const std::vector<Bag>& bags, const FoldPlan& plan, const TrainConfig& cfg,
                                          const std::vector<std::size_t>& counts = {32, 64, 128, 256, 384, 512});

struct ParamGradError {
    std::string name;
    double max_rel_error = 0.0;
    double max_abs_grad = 0.0;
};

/// Compares pipeline_backward against finite_diff_grad of the cross-entropy
/// loss for every trainable tensor of `model`.
std::vector<ParamGradError> gradient_report(const Model& model, const Matrix& features, std::size_t label,
                                            double h = 1e-5);

struct ScalingRow {
    std::size_t instances = 0;
    double dense_ms = 0.0;  // Q/K/V projection + dense self-attention
    double amd_ms = 0.0;    // amd_forward
};

/// Median wall time over `repeats` runs of each forward pass on one random
/// bag of `instances` rows (plus class token).
ScalingRow measure_scaling(std::size_t instances, std::size_t dim, std::size_t agents, std::size_t repeats,
                           std::uint64_t seed = 1);
std::string scaling_csv(const std::vector<ScalingRow>& rows);

// Serialisation. CSV headers are fixed:
//   ablation: row,nystrom,agent,train,mask,denoise,acc_mean,acc_std,f1_mean,f1_std,auc_mean,auc_std,
//             delta_acc,delta_f1,delta_auc
//   sweep:    n_agents,acc_mean,acc_std,auc_mean,auc_std,seconds
//   loss:     fold,epoch,loss
//   attention: instance_index,attention_score,instance_label
//   bench:    instances,dense_ms,amd_ms
std::string config_to_json(const TrainConfig& cfg);
/// Merges the JSON object in `text` over `base`. Unknown keys raise ConfigError.
TrainConfig config_from_json(const std::string& text, TrainConfig base = {});
std::string run_record_to_json(const RunRecord& rec);
std::string ablation_csv(const std::vector<RunRecord>& rows);
std::string sweep_csv(const std::vector<SweepPoint>& points);
std::string loss_curve_csv(const RunRecord& rec);

/// Writes the per-instance attention of one bag as CSV.
void export_attention(const Model& model, const Bag& bag, const std::filesystem::path& path);
std::string attention_csv(const Model& model, const Bag& bag);

}  // namespace amdmil
