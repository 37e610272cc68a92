#pragma once

#include <cstddef>
#include <vector>

#include "bmd/matrix.hpp"
#include "bmd/rng.hpp"

namespace bmd {

enum class Activation { identity, tanh_act };

/// Trainable linear extractor (optionally tanh) in front of a classifier that
/// stays frozen after source training. Forward: probs = softmax(V f(x) + c)
/// with f(x) = act(W x + b).
struct SoftmaxLinearModel {
    Matrix extractor_w;                // d x D
    std::vector<double> extractor_b;   // d
    Matrix classifier_w;               // K x d
    std::vector<double> classifier_b;  // K
    Activation activation = Activation::identity;

    std::size_t input_dim() const { return extractor_w.cols(); }
    std::size_t feature_dim() const { return extractor_w.rows(); }
    std::size_t num_classes() const { return classifier_w.rows(); }
};

/// Glorot-uniform weights, zero biases, seeded.
SoftmaxLinearModel make_model(std::size_t input_dim, std::size_t feature_dim,
                              std::size_t num_classes, Activation activation, std::uint64_t seed);

struct ForwardResult {
    Matrix features;  // B x d, post-activation, not normalized
    Matrix probs;     // B x K, row-stochastic
};

ForwardResult forward(const SoftmaxLinearModel& model, const Matrix& x);

struct LossWeights {
    double alpha = 2.0;
    double beta = 0.5;
};

/// Mean negative log-likelihood of the labeled class, probs clamped to
/// >= 1e-7 before the log.
double ce_loss(const Matrix& probs, const std::vector<int>& hard_labels);

/// Symmetric cross entropy: mean of -(sum_k y log p + p log y), both log
/// arguments clamped to >= 1e-7.
double sce_loss(const Matrix& probs, const Matrix& soft_labels);

/// CE against (1 - eps) * onehot + eps / K targets; eps in [0, 1].
double label_smoothing_ce(const Matrix& probs, const std::vector<int>& hard_labels, double epsilon);

/// alpha * ce + beta * sce on a forward pass of the batch. A zero weight
/// skips its term (and that term's labels may be empty).
double combined_loss(const SoftmaxLinearModel& model, const Matrix& batch,
                     const std::vector<int>& static_labels, const Matrix& dynamic_labels,
                     const LossWeights& w);

struct ExtractorGradients {
    Matrix weights;               // d x D
    std::vector<double> bias;     // d
};

/// Analytic gradients of combined_loss w.r.t. the extractor only (the
/// classifier is frozen during adaptation).
ExtractorGradients gradients(const SoftmaxLinearModel& model, const Matrix& batch,
                             const std::vector<int>& static_labels, const Matrix& dynamic_labels,
                             const LossWeights& w);

struct ModelGradients {
    Matrix extractor_w;
    std::vector<double> extractor_b;
    Matrix classifier_w;
    std::vector<double> classifier_b;
};

/// Gradients of label_smoothing_ce w.r.t. every parameter; used for source
/// training where the classifier is still live.
ModelGradients source_gradients(const SoftmaxLinearModel& model, const Matrix& batch,
                                const std::vector<int>& hard_labels, double epsilon);

/// SGD with momentum: v <- m v + g, p <- p - lr v. Velocity buffers are
/// zero-initialized lazily to the parameter shapes.
struct SgdMomentum {
    double learning_rate = 0.01;
    double momentum = 0.9;
    Matrix vel_extractor_w;
    std::vector<double> vel_extractor_b;
    Matrix vel_classifier_w;
    std::vector<double> vel_classifier_b;

    void apply(SoftmaxLinearModel& model, const ExtractorGradients& g);
    void apply(SoftmaxLinearModel& model, const ModelGradients& g);
};

}  // namespace bmd
