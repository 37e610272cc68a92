#pragma once

#include <cstdint>
#include <vector>

#include "bmd/matrix.hpp"

namespace bmd {

/// Two-domain Gaussian mixture: target class k is the source class shifted by
/// shifts row k. Per-class covariance scales and counts allow one class to be
/// made much harder to transfer than the rest.
struct GmmDomainSpec {
    std::size_t num_classes = 0;
    std::size_t dim = 0;
    Matrix means;                            // K x D
    std::vector<double> cov_scales;          // K, isotropic std per class
    Matrix shifts;                           // K x D
    std::vector<std::size_t> source_counts;  // K
    std::vector<std::size_t> target_counts;  // K
    std::uint64_t seed = 0;
};

struct LabeledSet {
    Matrix x;
    std::vector<int> labels;
};

/// Ground-truth target labels, kept in a distinct type so the adaptation path
/// cannot consume them; only metrics code accepts this.
struct EvalLabels {
    std::vector<int> labels;
};

struct DomainPair {
    LabeledSet source;
    Matrix target_x;
    EvalLabels target_eval;
};

DomainPair generate_domain_pair(const GmmDomainSpec& spec);

/// Benchmark profile: six classes, the last one with a 4x shift magnitude
/// aimed at its nearest rival class and half the target count.
GmmDomainSpec make_hard_truck_spec(std::uint64_t seed);

/// Widely separated classes with tiny covariance and negligible shift; any
/// sane labeler reaches 100% on it.
GmmDomainSpec make_separable_spec(std::uint64_t seed);

}  // namespace bmd
