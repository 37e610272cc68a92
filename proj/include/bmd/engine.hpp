#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmd/benchmark.hpp"
#include "bmd/dynamic.hpp"
#include "bmd/kmeans.hpp"
#include "bmd/labeling.hpp"
#include "bmd/metrics.hpp"
#include "bmd/objectives.hpp"

namespace bmd {

/// naive..bmp are static-label self-training; bmd adds the EMA-driven soft
/// label term on top of bmp's static labels.
enum class AdaptationStrategy { naive, mono, bp, bmp, bmd };

const char* to_string(AdaptationStrategy s);
bool parse_strategy(const std::string& name, AdaptationStrategy& out);

struct AdaptationConfig {
    AdaptationStrategy strategy = AdaptationStrategy::bmd;
    std::size_t epochs = 30;
    std::size_t source_epochs = 30;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double ratio = 3.0;            // top-M selection ratio r
    std::size_t prototypes_per_class = 4;  // S
    std::size_t refinement_rounds = 2;
    LossWeights loss_weights;      // alpha 2, beta 0.5
    double lambda = 0.9999;
    std::uint64_t seed = 0;
    double label_smoothing_eps = 0.1;
    std::size_t feature_dim = 8;
    Activation activation = Activation::tanh_act;
};

/// Returns a copy with strategy-dependent adjustments applied (beta forced to
/// zero below bmd) or throws on contradictions.
AdaptationConfig validate_config(const AdaptationConfig& config);

/// Per-epoch curves plus the final evaluation. Accuracy curves are fractions;
/// final_metrics is percent-based. Entries are NaN when no ground truth was
/// supplied. wall_time_seconds is excluded from serialized outputs.
struct RunRecord {
    std::vector<double> pseudo_label_accuracy;
    std::vector<double> predicted_accuracy;
    MetricsReport final_metrics;
    bool has_eval = false;
    double wall_time_seconds = 0.0;
    AdaptationConfig config;
};

/// Supervised label-smoothed CE on the source set; classifier trains here and
/// is frozen everywhere else.
SoftmaxLinearModel train_source(const SoftmaxLinearModel& model, const LabeledSet& source,
                                const AdaptationConfig& config);

struct AdaptResult {
    SoftmaxLinearModel model;
    RunRecord record;
};

/// Source-free adaptation: per epoch, a full feature pass refreshes the
/// static labels via the configured strategy (and, for bmd, re-initializes
/// the EMA prototype state from the fresh bank); minibatches then take SGD
/// steps on the combined loss. The optional eval labels feed only RunRecord.
AdaptResult adapt(const SoftmaxLinearModel& model, const Matrix& target_x,
                  const AdaptationConfig& config, const EvalLabels* eval = nullptr);

struct AblationRow {
    AdaptationStrategy strategy = AdaptationStrategy::naive;
    std::vector<double> final_accuracy;     // percent, one per seed
    std::vector<double> final_coeff_var;    // one per seed
    std::vector<double> epoch0_pseudo_acc;  // fraction, one per seed
    double mean_accuracy = 0.0;
    double mean_coeff_var = 0.0;
    double mean_epoch0_pseudo_acc = 0.0;
    double std_accuracy = 0.0;
};

struct AblationTable {
    std::vector<std::uint64_t> seeds;
    std::vector<AblationRow> rows;  // naive, mono, bp, bmp, bmd
};

/// Runs every strategy over the shared seed list. Each seed regenerates the
/// domain pair and retrains one source model that all strategies adapt from.
AblationTable ablation_suite(const GmmDomainSpec& base_spec, const AdaptationConfig& base_config,
                             const std::vector<std::uint64_t>& seeds);

}  // namespace bmd
