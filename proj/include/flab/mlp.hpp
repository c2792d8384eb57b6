#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flab/features.hpp"
#include "flab/signal.hpp"
#include "flab/sphere.hpp"

namespace flab {

inline constexpr std::array<int, 6> kHiddenSizes{30, 60, 80, 80, 60, 30};

// Fully connected regressor mapping a feature vector to the angle (radians)
// to the closest fascicle. Rectifier on hidden layers, identity output.
struct MlpModel {
    std::vector<int> layer_sizes;            // {n+1, 30, 60, 80, 80, 60, 30, 1}
    std::vector<Eigen::MatrixXd> weights;    // per layer, (out x in)
    std::vector<Eigen::VectorXd> biases;     // per layer, (out)
    int feature_n = 15;
    double feature_epsilon = 0.1;
    std::uint64_t config_digest = 0;

    int input_size() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
    void validate() const;  // shapes chain, hidden sizes match kHiddenSizes
};

struct TrainConfig {
    int sample_count = 50000;       // simulated voxels
    int directions_per_voxel = 32;  // probe directions drawn per voxel
    int batch_size = 256;
    int epochs = 50;
    double learning_rate = 1e-3;
    // Step schedule: the learning rate is multiplied by lr_decay at 60% and
    // again at 85% of the epoch budget. 1.0 keeps it constant.
    double lr_decay = 0.3;
    std::uint64_t rng_seed = 0;
    int feature_n = 15;
    double feature_epsilon = 0.1;
    bool noise = true;  // Rician noise at a per-voxel SNR from sampler's range
    // Fraction of training voxels replaced by fascicle-free (pure isotropic)
    // voxels with target pi/2, so the regressor also learns what "no fascicle
    // anywhere" looks like. 0 keeps every voxel at 1-3 fascicles.
    double isotropic_fraction = 0.0;
    SamplerConfig sampler;
    // Dataset generation workers. Training itself is single-threaded and
    // bit-reproducible for a fixed seed.
    int threads = 1;

    std::uint64_t digest() const;
};

struct Dataset {
    Eigen::MatrixXd features;  // samples x (n+1)
    Eigen::VectorXd targets;   // radians in [0, pi/2]

    Eigen::Index size() const { return features.rows(); }
};

// Simulated training pairs: sample_count voxels, directions_per_voxel probes
// drawn uniformly from the grid per voxel, target = angle to the closest
// fascicle. Deterministic for a fixed config.rng_seed regardless of threads.
Dataset generate_dataset(const TrainConfig& config, const SphereGrid& grid,
                         const GradientTable& table);

struct TrainStats {
    std::vector<double> epoch_loss;  // mean squared error per epoch
};

// Mini-batch Adam on mean squared error. Deterministic for a fixed seed.
MlpModel train(const Dataset& dataset, const TrainConfig& config, TrainStats* stats = nullptr);

// Forward pass, clamped to [0, pi/2].
double predict_angle(const MlpModel& model, const FeatureVector& feature);
double predict_angle(const MlpModel& model, std::span<const double> feature_values);
Eigen::VectorXd predict_batch(const MlpModel& model, const Eigen::MatrixXd& features);

// Model file: "FLAB-MLP1" magic, text header, then little-endian float64
// weights in layer order (each weight matrix row-major, then its bias).
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

std::uint64_t weight_digest(const MlpModel& model);

namespace detail {

// Loss and gradients for one batch; shared by the optimizer and the
// finite-difference checks.
struct Gradients {
    double loss = 0.0;
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;
};

Gradients loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& batch_features,
                             const Eigen::VectorXd& batch_targets);

double batch_loss(const MlpModel& model, const Eigen::MatrixXd& batch_features,
                  const Eigen::VectorXd& batch_targets);

}  // namespace detail

}  // namespace flab
