#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evosynth/tensor.hpp"

namespace evo {

struct MetricsConfig {
    double beta_squared = 0.3;
    enum class ThresholdMode { max_sweep, fixed };
    ThresholdMode mode = ThresholdMode::max_sweep;
    double fixed_threshold = 0.5;

    static constexpr int kSweepSteps = 256;  // thresholds k/255, k = 0..255

    std::string mode_str() const;
};

struct EvalReport {
    double f_beta = 0.0;  // mean of per-image values
    double mae = 0.0;
    std::vector<double> per_image_f;
    std::vector<double> per_image_mae;
    std::string threshold_mode;
};

// Weighted-harmonic precision/recall score of a binarized prediction:
// F = (1 + b^2) P R / (b^2 P + R), 0 when the denominator is 0. Under
// max_sweep the maximum over the 256-threshold sweep is returned.
double f_beta(const Tensor& prediction, const Tensor& ground_truth,
              const MetricsConfig& cfg);

// Mean absolute per-pixel error.
double mae(const Tensor& prediction, const Tensor& ground_truth);

// Ancestor-to-descendant synapse ratio reported as a multiplier truncated to
// two decimals (63767232 / 1333010 -> 47.83).
double architectural_efficiency(std::int64_t ancestor_synapses,
                                std::int64_t descendant_synapses);

}  // namespace evo
