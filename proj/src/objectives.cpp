#include "bmd/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace bmd {

namespace {

constexpr double kLogClamp = 1e-7;

Matrix linear(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
    Matrix out = pairwise_similarity(x, w);  // x . w^T
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b[j];
    }
    return out;
}

Matrix apply_activation(const Matrix& z, Activation act) {
    if (act == Activation::identity) return z;
    Matrix out(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.cols(); ++j) out(i, j) = std::tanh(z(i, j));
    return out;
}

void check_labels(const Matrix& probs, const std::vector<int>& labels) {
    if (labels.size() != probs.rows())
        throw std::invalid_argument("labels and probs disagree on instance count");
    for (const int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= probs.cols())
            throw std::invalid_argument("label out of range");
    }
}

// dL/dprobs for alpha * CE(hard) + beta * SCE(soft), clamp-aware.
Matrix loss_grad_wrt_probs(const Matrix& probs, const std::vector<int>& static_labels,
                           const Matrix& dynamic_labels, const LossWeights& w) {
    const std::size_t B = probs.rows();
    const std::size_t K = probs.cols();
    const double inv_b = 1.0 / static_cast<double>(B);
    Matrix g(B, K);
    if (w.alpha != 0.0) {
        for (std::size_t i = 0; i < B; ++i) {
            const auto y = static_cast<std::size_t>(static_labels[i]);
            const double p = probs(i, y);
            if (p >= kLogClamp) g(i, y) -= w.alpha * inv_b / p;
        }
    }
    if (w.beta != 0.0) {
        for (std::size_t i = 0; i < B; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                const double p = probs(i, k);
                const double y = dynamic_labels(i, k);
                double dp = std::log(std::max(y, kLogClamp));
                if (p >= kLogClamp) dp += y / p;
                g(i, k) -= w.beta * inv_b * dp;
            }
        }
    }
    return g;
}

// softmax backward: dlogits[i,j] = p_ij * (g_ij - sum_k g_ik p_ik)
Matrix softmax_backward(const Matrix& probs, const Matrix& grad_probs) {
    Matrix out(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t k = 0; k < probs.cols(); ++k) dot += grad_probs(i, k) * probs(i, k);
        for (std::size_t j = 0; j < probs.cols(); ++j)
            out(i, j) = probs(i, j) * (grad_probs(i, j) - dot);
    }
    return out;
}

struct BackpropBuffers {
    Matrix dlogits;  // B x K
    Matrix dz;       // B x d, pre-activation gradient
};

BackpropBuffers backprop_to_extractor(const SoftmaxLinearModel& model, const ForwardResult& fwd,
                                      const Matrix& grad_probs) {
    BackpropBuffers buf;
    buf.dlogits = softmax_backward(fwd.probs, grad_probs);
    const std::size_t B = fwd.features.rows();
    const std::size_t d = model.feature_dim();
    const std::size_t K = model.num_classes();
    Matrix dfeat(B, d);
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            const double dl = buf.dlogits(i, j);
            if (dl == 0.0) continue;
            const double* v = model.classifier_w.row_ptr(j);
            for (std::size_t c = 0; c < d; ++c) dfeat(i, c) += dl * v[c];
        }
    }
    if (model.activation == Activation::tanh_act) {
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t c = 0; c < d; ++c) {
                const double f = fwd.features(i, c);
                dfeat(i, c) *= 1.0 - f * f;
            }
    }
    buf.dz = std::move(dfeat);
    return buf;
}

ExtractorGradients extractor_grads_from(const Matrix& dz, const Matrix& x) {
    const std::size_t d = dz.cols();
    const std::size_t D = x.cols();
    ExtractorGradients g;
    g.weights = Matrix(d, D);
    g.bias.assign(d, 0.0);
    for (std::size_t i = 0; i < dz.rows(); ++i) {
        const double* xi = x.row_ptr(i);
        for (std::size_t r = 0; r < d; ++r) {
            const double v = dz(i, r);
            if (v == 0.0) continue;
            for (std::size_t c = 0; c < D; ++c) g.weights(r, c) += v * xi[c];
        }
        for (std::size_t r = 0; r < d; ++r) g.bias[r] += dz(i, r);
    }
    return g;
}

void check_loss_inputs(const SoftmaxLinearModel& model, const Matrix& batch,
                       const std::vector<int>& static_labels, const Matrix& dynamic_labels,
                       const LossWeights& w) {
    // both-zero weights are rejected at config level; the pure ops return 0
    if (w.alpha < 0.0 || w.beta < 0.0) throw std::invalid_argument("loss weights must be >= 0");
    if (batch.rows() == 0) throw std::invalid_argument("empty input");
    if (batch.cols() != model.input_dim()) throw std::invalid_argument("dimension mismatch");
    if (w.alpha != 0.0 && static_labels.size() != batch.rows())
        throw std::invalid_argument("labels and batch disagree on instance count");
    if (w.beta != 0.0 &&
        (dynamic_labels.rows() != batch.rows() || dynamic_labels.cols() != model.num_classes()))
        throw std::invalid_argument("dynamic labels and batch disagree on shape");
}

}  // namespace

SoftmaxLinearModel make_model(std::size_t input_dim, std::size_t feature_dim,
                              std::size_t num_classes, Activation activation, std::uint64_t seed) {
    if (input_dim == 0 || feature_dim == 0 || num_classes == 0)
        throw std::invalid_argument("model dimensions must be >= 1");
    SoftmaxLinearModel model;
    model.activation = activation;
    model.extractor_w = Matrix(feature_dim, input_dim);
    model.extractor_b.assign(feature_dim, 0.0);
    model.classifier_w = Matrix(num_classes, feature_dim);
    model.classifier_b.assign(num_classes, 0.0);

    SeededRng rng_w(mix_seed(seed, 1));
    const double lim_w =
        std::sqrt(6.0 / static_cast<double>(input_dim + feature_dim));
    for (std::size_t r = 0; r < feature_dim; ++r)
        for (std::size_t c = 0; c < input_dim; ++c)
            model.extractor_w(r, c) = rng_w.next_uniform(-lim_w, lim_w);

    SeededRng rng_v(mix_seed(seed, 2));
    const double lim_v =
        std::sqrt(6.0 / static_cast<double>(feature_dim + num_classes));
    for (std::size_t r = 0; r < num_classes; ++r)
        for (std::size_t c = 0; c < feature_dim; ++c)
            model.classifier_w(r, c) = rng_v.next_uniform(-lim_v, lim_v);
    return model;
}

ForwardResult forward(const SoftmaxLinearModel& model, const Matrix& x) {
    if (x.cols() != model.input_dim()) throw std::invalid_argument("dimension mismatch");
    ForwardResult out;
    out.features = apply_activation(linear(x, model.extractor_w, model.extractor_b),
                                    model.activation);
    out.probs = softmax_rows(linear(out.features, model.classifier_w, model.classifier_b));
    return out;
}

double ce_loss(const Matrix& probs, const std::vector<int>& hard_labels) {
    if (probs.rows() == 0) throw std::invalid_argument("empty input");
    check_labels(probs, hard_labels);
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const double p = probs(i, static_cast<std::size_t>(hard_labels[i]));
        total -= std::log(std::max(p, kLogClamp));
    }
    return total / static_cast<double>(probs.rows());
}

double sce_loss(const Matrix& probs, const Matrix& soft_labels) {
    if (probs.rows() == 0) throw std::invalid_argument("empty input");
    if (probs.rows() != soft_labels.rows() || probs.cols() != soft_labels.cols())
        throw std::invalid_argument("dimension mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        for (std::size_t k = 0; k < probs.cols(); ++k) {
            const double p = probs(i, k);
            const double y = soft_labels(i, k);
            total -= y * std::log(std::max(p, kLogClamp));
            total -= p * std::log(std::max(y, kLogClamp));
        }
    }
    return total / static_cast<double>(probs.rows());
}

double label_smoothing_ce(const Matrix& probs, const std::vector<int>& hard_labels,
                          double epsilon) {
    if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must be in [0, 1]");
    if (probs.rows() == 0) throw std::invalid_argument("empty input");
    check_labels(probs, hard_labels);
    const std::size_t K = probs.cols();
    const double off = epsilon / static_cast<double>(K);
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const auto y = static_cast<std::size_t>(hard_labels[i]);
        for (std::size_t k = 0; k < K; ++k) {
            const double target = (k == y) ? (1.0 - epsilon) + off : off;
            if (target == 0.0) continue;
            total -= target * std::log(std::max(probs(i, k), kLogClamp));
        }
    }
    return total / static_cast<double>(probs.rows());
}

double combined_loss(const SoftmaxLinearModel& model, const Matrix& batch,
                     const std::vector<int>& static_labels, const Matrix& dynamic_labels,
                     const LossWeights& w) {
    check_loss_inputs(model, batch, static_labels, dynamic_labels, w);
    const ForwardResult fwd = forward(model, batch);
    double loss = 0.0;
    if (w.alpha != 0.0) loss += w.alpha * ce_loss(fwd.probs, static_labels);
    if (w.beta != 0.0) loss += w.beta * sce_loss(fwd.probs, dynamic_labels);
    return loss;
}

ExtractorGradients gradients(const SoftmaxLinearModel& model, const Matrix& batch,
                             const std::vector<int>& static_labels, const Matrix& dynamic_labels,
                             const LossWeights& w) {
    check_loss_inputs(model, batch, static_labels, dynamic_labels, w);
    const ForwardResult fwd = forward(model, batch);
    if (w.alpha != 0.0) check_labels(fwd.probs, static_labels);
    const Matrix grad_probs = loss_grad_wrt_probs(fwd.probs, static_labels, dynamic_labels, w);
    const BackpropBuffers buf = backprop_to_extractor(model, fwd, grad_probs);
    return extractor_grads_from(buf.dz, batch);
}

ModelGradients source_gradients(const SoftmaxLinearModel& model, const Matrix& batch,
                                const std::vector<int>& hard_labels, double epsilon) {
    if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must be in [0, 1]");
    if (batch.rows() == 0) throw std::invalid_argument("empty input");
    if (batch.cols() != model.input_dim()) throw std::invalid_argument("dimension mismatch");
    const ForwardResult fwd = forward(model, batch);
    check_labels(fwd.probs, hard_labels);

    const std::size_t B = batch.rows();
    const std::size_t K = model.num_classes();
    const std::size_t d = model.feature_dim();
    const double inv_b = 1.0 / static_cast<double>(B);
    const double off = epsilon / static_cast<double>(K);

    // dL/dprobs for CE against smoothed targets, clamp-aware
    Matrix grad_probs(B, K);
    for (std::size_t i = 0; i < B; ++i) {
        const auto y = static_cast<std::size_t>(hard_labels[i]);
        for (std::size_t k = 0; k < K; ++k) {
            const double target = (k == y) ? (1.0 - epsilon) + off : off;
            const double p = fwd.probs(i, k);
            if (target != 0.0 && p >= kLogClamp) grad_probs(i, k) -= inv_b * target / p;
        }
    }
    const BackpropBuffers buf = backprop_to_extractor(model, fwd, grad_probs);

    ModelGradients g;
    g.classifier_w = Matrix(K, d);
    g.classifier_b.assign(K, 0.0);
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            const double dl = buf.dlogits(i, j);
            if (dl == 0.0) continue;
            const double* f = fwd.features.row_ptr(i);
            for (std::size_t c = 0; c < d; ++c) g.classifier_w(j, c) += dl * f[c];
            g.classifier_b[j] += dl;
        }
    }
    ExtractorGradients eg = extractor_grads_from(buf.dz, batch);
    g.extractor_w = std::move(eg.weights);
    g.extractor_b = std::move(eg.bias);
    return g;
}

namespace {

void momentum_step(Matrix& vel, Matrix& param, const Matrix& grad, double lr, double m) {
    if (vel.rows() != grad.rows() || vel.cols() != grad.cols())
        vel = Matrix(grad.rows(), grad.cols());
    for (std::size_t r = 0; r < grad.rows(); ++r) {
        for (std::size_t c = 0; c < grad.cols(); ++c) {
            vel(r, c) = m * vel(r, c) + grad(r, c);
            param(r, c) -= lr * vel(r, c);
        }
    }
}

void momentum_step(std::vector<double>& vel, std::vector<double>& param,
                   const std::vector<double>& grad, double lr, double m) {
    if (vel.size() != grad.size()) vel.assign(grad.size(), 0.0);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        vel[i] = m * vel[i] + grad[i];
        param[i] -= lr * vel[i];
    }
}

}  // namespace

void SgdMomentum::apply(SoftmaxLinearModel& model, const ExtractorGradients& g) {
    momentum_step(vel_extractor_w, model.extractor_w, g.weights, learning_rate, momentum);
    momentum_step(vel_extractor_b, model.extractor_b, g.bias, learning_rate, momentum);
}

void SgdMomentum::apply(SoftmaxLinearModel& model, const ModelGradients& g) {
    momentum_step(vel_extractor_w, model.extractor_w, g.extractor_w, learning_rate, momentum);
    momentum_step(vel_extractor_b, model.extractor_b, g.extractor_b, learning_rate, momentum);
    momentum_step(vel_classifier_w, model.classifier_w, g.classifier_w, learning_rate, momentum);
    momentum_step(vel_classifier_b, model.classifier_b, g.classifier_b, learning_rate, momentum);
}

}  // namespace bmd
