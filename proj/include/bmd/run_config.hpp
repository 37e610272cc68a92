#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmd/benchmark.hpp"
#include "bmd/engine.hpp"

namespace bmd {

/// Parsed run/ablate configuration. Omitted keys fall back to the built-in
/// defaults (r=3, S=4, lambda=0.9999, epochs=30, batch_size=64, eps=0.1);
/// unknown keys are rejected by name.
struct RunConfig {
    AdaptationConfig adaptation;
    std::string benchmark_profile = "hard_truck";  // hard_truck | separable | custom
    GmmDomainSpec custom_benchmark;                // only for profile=custom
    std::vector<std::uint64_t> seeds;              // ablate; empty = derive from seed
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Resolves the configured benchmark to a concrete spec seeded with `seed`.
GmmDomainSpec resolve_benchmark(const RunConfig& config, std::uint64_t seed);

}  // namespace bmd
