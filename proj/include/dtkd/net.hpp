#pragma once

// Small multilayer perceptron with hand-derived backpropagation, SGD with
// momentum, the warmup/milestone learning-rate schedule, and the binary
// checkpoint format.

#include "dtkd/numkit.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dtkd::net {

using numkit::Matrix;

enum class Activation { kRelu };

struct MlpSpec {
    std::vector<std::size_t> layer_sizes; // input dim, hidden dims..., class count
    Activation activation = Activation::kRelu;

    void validate() const; // throws std::domain_error
    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
};

/// Per-layer weights (in_dim x out_dim, row-major) and biases, 64-bit.
struct MlpParams {
    MlpSpec spec;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases,
    /// drawn layer by layer in row-major order from the given stream.
    static MlpParams init(const MlpSpec &spec, numkit::Rng &rng);
    bool all_finite() const;
};

/// Pre-activations of every layer plus the input batch, as produced by
/// forward(); backward() consumes it.
struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre_activations;
};

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    static Gradients zeros_like(const MlpParams &params);
};

using Velocity = Gradients;

struct TrainSchedule {
    double base_lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t epochs = 120;
    std::size_t warmup_epochs = 10;
    std::vector<std::size_t> decay_milestones = {75, 90, 105};
    double decay_factor = 0.1;
    std::size_t batch_size = 64;
    std::uint64_t seed = 42;

    void validate() const; // throws std::domain_error
};

/// Affine/ReLU stack; returns the logits and (optionally) fills the cache
/// needed by backward().
Matrix forward(const MlpParams &params, const Matrix &batch, ForwardCache *cache = nullptr);

/// Exact parameter gradients of the loss whose logit gradient is supplied.
Gradients backward(const MlpParams &params, const ForwardCache &cache,
                   const Matrix &logit_gradient);

/// velocity <- momentum * velocity + grad + weight_decay * param;
/// param    <- param - lr_now * velocity.
void sgd_step(MlpParams &params, const Gradients &grads, const TrainSchedule &schedule,
              Velocity &velocity, double lr_now);

/// Linear warmup ramp from base_lr / warmup_epochs, then base_lr scaled by
/// decay_factor per passed milestone.
double lr_at(const TrainSchedule &schedule, std::size_t epoch);

/// Binary checkpoint: "DTKD" magic, u16 format version, u32 layer count,
/// u32 per-layer dims, then per layer row-major f32 little-endian weights
/// followed by biases.
void store_checkpoint(const MlpParams &params, const std::filesystem::path &path);
MlpParams load_checkpoint(const std::filesystem::path &path);

} // namespace dtkd::net
