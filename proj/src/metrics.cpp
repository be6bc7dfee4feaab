#include "evosynth/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "evosynth/errors.hpp"

namespace evo {

std::string MetricsConfig::mode_str() const {
    if (mode == ThresholdMode::max_sweep) return "max-sweep";
    std::ostringstream os;
    os << "fixed:" << fixed_threshold;
    return os.str();
}

namespace {

double f_from_counts(double tp, double fp, double fn, double beta2) {
    double p = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    double r = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
    double denom = beta2 * p + r;
    if (denom <= 0.0) return 0.0;
    return (1.0 + beta2) * p * r / denom;
}

// Largest k in [ -1, 255 ] with k/255 <= p, by exact comparison.
int sweep_bucket(float p) {
    int k = static_cast<int>(std::floor(static_cast<double>(p) * 255.0));
    if (k > 255) k = 255;
    if (k < -1) k = -1;
    while (k + 1 <= 255 && static_cast<double>(k + 1) / 255.0 <= p) ++k;
    while (k >= 0 && static_cast<double>(k) / 255.0 > p) --k;
    return k;
}

}  // namespace

double f_beta(const Tensor& prediction, const Tensor& ground_truth,
              const MetricsConfig& cfg) {
    if (!prediction.same_shape(ground_truth))
        throw ShapeError("prediction and ground truth shapes differ");
    std::int64_t n = prediction.numel();

    if (cfg.mode == MetricsConfig::ThresholdMode::fixed) {
        double tp = 0, fp = 0, fn = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            bool pos = prediction[i] >= cfg.fixed_threshold;
            bool gt = ground_truth[i] > 0.5f;
            if (pos && gt) ++tp;
            else if (pos) ++fp;
            else if (gt) ++fn;
        }
        return f_from_counts(tp, fp, fn, cfg.beta_squared);
    }

    // max over the sweep: a pixel with bucket K is predicted positive for
    // every threshold index k <= K, so suffix sums of two histograms give
    // tp/fp at all 256 thresholds in one pass.
    double hist_pos[256] = {0};
    double hist_neg[256] = {0};
    double total_gt = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        int k = sweep_bucket(prediction[i]);
        bool gt = ground_truth[i] > 0.5f;
        total_gt += gt ? 1 : 0;
        if (k < 0) continue;
        if (gt) hist_pos[k] += 1;
        else hist_neg[k] += 1;
    }
    double best = 0.0;
    double tp = 0, fp = 0;
    for (int k = 255; k >= 0; --k) {
        tp += hist_pos[k];
        fp += hist_neg[k];
        double f = f_from_counts(tp, fp, total_gt - tp, cfg.beta_squared);
        if (f > best) best = f;
    }
    return best;
}

double mae(const Tensor& prediction, const Tensor& ground_truth) {
    if (!prediction.same_shape(ground_truth))
        throw ShapeError("prediction and ground truth shapes differ");
    double acc = 0.0;
    std::int64_t n = prediction.numel();
    for (std::int64_t i = 0; i < n; ++i)
        acc += std::abs(static_cast<double>(prediction[i]) - ground_truth[i]);
    return n > 0 ? acc / static_cast<double>(n) : 0.0;
}

double architectural_efficiency(std::int64_t ancestor_synapses,
                                std::int64_t descendant_synapses) {
    if (descendant_synapses < 1)
        throw std::invalid_argument("descendant synapse count must be >= 1");
    if (ancestor_synapses < 0)
        throw std::invalid_argument("ancestor synapse count must be >= 0");
    double ratio = static_cast<double>(ancestor_synapses) /
                   static_cast<double>(descendant_synapses);
    // reported truncated to two decimals (1e-9 guards against a ratio whose
    // hundredth is exact but lands just below it in binary)
    return std::floor(ratio * 100.0 + 1e-9) / 100.0;
}

}  // namespace evo
