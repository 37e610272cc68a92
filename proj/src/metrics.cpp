#include "bmd/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bmd {

namespace {

void fill_moments(MetricsReport& report) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < report.per_class.size(); ++k) {
        if (!report.class_present[k]) continue;
        sum += report.per_class[k];
        ++n;
    }
    if (n == 0) throw std::invalid_argument("no class present in ground truth");
    report.acc_mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t k = 0; k < report.per_class.size(); ++k) {
        if (!report.class_present[k]) continue;
        const double d = report.per_class[k] - report.acc_mean;
        sq += d * d;
    }
    report.acc_std = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) : 0.0;
    report.coeff_var = report.acc_std == 0.0 ? 0.0 : report.acc_std / report.acc_mean;
}

}  // namespace

MetricsReport metrics_from_per_class(const std::vector<double>& per_class) {
    if (per_class.empty()) throw std::invalid_argument("empty input");
    MetricsReport report;
    report.per_class = per_class;
    report.class_present.assign(per_class.size(), 1);
    fill_moments(report);
    report.overall_accuracy = report.acc_mean;  // unweighted when counts are unknown
    return report;
}

MetricsReport compute_metrics(const std::vector<int>& predictions,
                              const std::vector<int>& ground_truth, std::size_t num_classes) {
    if (predictions.size() != ground_truth.size())
        throw std::invalid_argument("predictions and ground truth disagree on instance count");
    if (predictions.empty()) throw std::invalid_argument("empty input");
    if (num_classes == 0) throw std::invalid_argument("num_classes must be >= 1");

    std::vector<std::size_t> total(num_classes, 0);
    std::vector<std::size_t> correct(num_classes, 0);
    std::size_t overall_correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int t = ground_truth[i];
        if (t < 0 || static_cast<std::size_t>(t) >= num_classes)
            throw std::invalid_argument("label out of range");
        ++total[static_cast<std::size_t>(t)];
        if (predictions[i] == t) {
            ++correct[static_cast<std::size_t>(t)];
            ++overall_correct;
        }
    }

    MetricsReport report;
    report.overall_accuracy =
        100.0 * static_cast<double>(overall_correct) / static_cast<double>(predictions.size());
    report.per_class.assign(num_classes, std::numeric_limits<double>::quiet_NaN());
    report.class_present.assign(num_classes, 0);
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (total[k] == 0) continue;
        report.class_present[k] = 1;
        report.per_class[k] =
            100.0 * static_cast<double>(correct[k]) / static_cast<double>(total[k]);
    }
    fill_moments(report);
    return report;
}

double label_match_fraction(const std::vector<int>& predictions,
                            const std::vector<int>& ground_truth) {
    if (predictions.size() != ground_truth.size())
        throw std::invalid_argument("predictions and ground truth disagree on instance count");
    if (predictions.empty()) throw std::invalid_argument("empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == ground_truth[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double pseudo_label_accuracy(const LabelBank& labels, const std::vector<int>& ground_truth) {
    return label_match_fraction(labels.hard_labels, ground_truth);
}

}  // namespace bmd
