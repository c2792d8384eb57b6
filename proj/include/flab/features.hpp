#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "flab/signal.hpp"
#include "flab/vec3.hpp"

namespace flab {

// Cone-profile feature of a voxel's measurements around a probe direction u:
// values[j] is the weighted mean of the diffusion-weighted measurements with
// weights 1/(|angle(q_i, u) - theta_j| + epsilon), theta_j = j*pi/(2n).
// Angles use the antipodal metric, so the feature is even in u. Reference
// (b ~ 0) measurements are excluded.
struct FeatureVector {
    std::vector<double> values;  // n+1 entries
    int n = 15;

    double theta(int j) const { return j * kPi / (2.0 * n); }
};

FeatureVector compute_feature(const Vec3& u, std::span<const double> signals,
                              const GradientTable& table, int n = 15, double epsilon = 0.1);

// Precomputed, normalized cone weights for a fixed probe set and table.
// apply() reproduces compute_feature for every probe up to floating summation
// order; it exists so whole-volume prediction does not recompute the probe
// angles per voxel.
class FeatureBasis {
public:
    FeatureBasis(std::span<const Vec3> probes, const GradientTable& table, int n = 15,
                 double epsilon = 0.1);

    // signals: all m measurements of one voxel. Returns (probes x n+1).
    Eigen::MatrixXd apply(std::span<const double> signals) const;

    int probe_count() const { return probe_count_; }
    int feature_size() const { return n_ + 1; }

private:
    Eigen::MatrixXd weights_;     // (probes*(n+1)) x m_dw, rows sum to 1
    std::vector<int> dw_indices_;  // table rows with diffusion weighting
    int probe_count_ = 0;
    int n_ = 15;
};

}  // namespace flab
