#pragma once

#include <cstdint>
#include <vector>

#include "bmd/labeling.hpp"

namespace bmd {

/// Per-class accuracy summary. Accuracies are percentages; classes absent
/// from the ground truth are excluded from the moments and flagged missing.
/// acc_std uses the sample (N-1) convention.
struct MetricsReport {
    double overall_accuracy = 0.0;
    std::vector<double> per_class;  // percent; NaN for missing classes
    std::vector<std::uint8_t> class_present;
    double acc_mean = 0.0;
    double acc_std = 0.0;
    double coeff_var = 0.0;
};

/// Moments of an already-computed per-class accuracy vector (any unit).
MetricsReport metrics_from_per_class(const std::vector<double>& per_class);

MetricsReport compute_metrics(const std::vector<int>& predictions,
                              const std::vector<int>& ground_truth, std::size_t num_classes);

/// Fraction of predictions equal to truth.
double label_match_fraction(const std::vector<int>& predictions,
                            const std::vector<int>& ground_truth);

double pseudo_label_accuracy(const LabelBank& labels, const std::vector<int>& ground_truth);

}  // namespace bmd
