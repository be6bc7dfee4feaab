#pragma once

#include <cstdint>
#include <vector>

#include "evosynth/layers.hpp"
#include "evosynth/tensor.hpp"

namespace evo {

enum class Loss { binary_cross_entropy, mean_squared_error };
enum class InitMode { uniform_scaled, constant };

Loss loss_from_string(const std::string& s);
const char* to_string(Loss l);

struct TrainConfig {
    float learning_rate = 0.1f;
    int epochs = 1;
    int batch_size = 8;
    Loss loss = Loss::binary_cross_entropy;
    std::uint64_t seed = 0;
    // Fresh-initialization rule. uniform_scaled draws each weight from
    // +-sqrt(6 / (fan_in + fan_out)) with the fans measured on the unmasked
    // topology; constant sets every surviving weight to init_constant.
    InitMode init = InitMode::uniform_scaled;
    float init_constant = 0.05f;
};

struct Network {
    Architecture arch;
    std::vector<Tensor> weights;  // per layer; empty for weightless layers
    std::vector<Tensor> biases;   // per layer {out.c}; biases are never masked
};

struct Example {
    Tensor input;   // {C,H,W}
    Tensor target;  // matches the network output shape
};

struct Gradients {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

struct TrainResult {
    Network net;
    std::vector<double> epoch_loss;
};

// Fresh network on the architecture's surviving synapses; masked weights are
// exactly zero, biases start at zero.
Network init_network(const Architecture& arch, const TrainConfig& cfg,
                     std::uint64_t seed);

// Zeroes every masked weight in place (weights of dead synapses contribute
// nothing and must be stored as exact zeros).
void apply_mask(Network& net);

// batch is {N,C,H,W} matching the architecture input; result is
// {N,C',H',W'} of the final layer. Throws ShapeError on mismatch.
Tensor forward(const Network& net, const Tensor& batch);

// Per-layer activations of one forward pass; outputs[i] is layer i's
// post-activation output. Used by training and kept public for tests.
struct ForwardTrace {
    std::vector<Tensor> outputs;
};
ForwardTrace forward_trace(const Network& net, const Tensor& batch);

// Mean-over-elements loss of a forward output against targets.
double loss_value(const Tensor& output, const Tensor& targets, Loss loss);

// Gradient of the mean batch loss with respect to every weight and bias.
// Gradients at masked synapses are exactly zero.
Gradients gradients(const Network& net, const Tensor& batch,
                    const Tensor& targets, Loss loss);

// Plain SGD with a fixed learning rate. Masked weights stay exactly zero;
// identical seed and dataset give bit-identical weights. Throws
// TrainingDiverged when a non-finite loss shows up.
TrainResult train(Network net, const std::vector<Example>& data,
                  const TrainConfig& cfg);

// Stacks examples[indices] into one {N,...} input tensor and one target
// tensor.
Tensor stack_inputs(const std::vector<Example>& data,
                    const std::vector<std::size_t>& indices);
Tensor stack_targets(const std::vector<Example>& data,
                     const std::vector<std::size_t>& indices);

}  // namespace evo
