#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "flab/mlp.hpp"
#include "flab/postprocess.hpp"
#include "flab/signal.hpp"
#include "flab/sphere.hpp"
#include "flab/vec3.hpp"

namespace flab {

struct ClassRates {
    double accuracy = 0.0;
    double sensitivity = 0.0;  // TP / (TP + FN); NaN when the class is absent
    double specificity = 0.0;  // TN / (TN + FP); NaN when everything is the class
};

// One-vs-rest rates for fascicle counts 1..3 plus the full confusion matrix.
struct CountConfusion {
    std::array<ClassRates, 3> per_class;              // index k-1 for class k
    std::vector<std::vector<long>> matrix;            // [true][predicted]
    long total = 0;

    ClassRates rates_from_matrix(int k) const;  // recomputed, for cross-checks
};

CountConfusion count_metrics(std::span<const int> true_counts,
                             std::span<const int> predicted_counts);

struct TrueFascicle {
    Vec3 orientation;
    double fraction = 0.0;
};

// Weighted average angular error in degrees: sum_i w_i min_j angle(v_i, e_j)
// with antipodal angles and weights renormalized over the true fascicles.
// An empty estimate scores the maximal 90 degrees for every true fascicle.
double waae_deg(std::span<const TrueFascicle> truth, std::span<const Vec3> estimated);

// Sum of exactly 12 tract grades, each in {1, 2, 3}.
int grade_sum(std::span<const int> grades);

struct DownsampleOptions {
    double threshold_deg = 30.0;
    int smooth_iterations = 2;
    double smooth_lambda = 0.5;
    double fodf_p = 2.0;
    int max_count = 0;
    int threads = 1;
};

struct DownsampleRow {
    double fraction = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    double max = 0.0;
    long samples = 0;  // (voxel, trial) observations with a reference peak
};

struct DownsampleReport {
    std::vector<DownsampleRow> rows;
};

// Robustness of the dominant fODF peak to random measurement removal: for
// each fraction and trial a seeded measurement subset is dropped (shared by
// all voxels), the pipeline re-run, and the angular deviation of the dominant
// peak from the full-table reference recorded. Voxels without a reference
// peak are skipped; a vanished peak counts as 90 degrees.
DownsampleReport downsample_experiment(std::span<const double> signals, int n_voxels,
                                       const GradientTable& table, const MlpModel& model,
                                       const SphereGrid& grid, std::span<const double> fractions,
                                       int trials, std::uint64_t rng_seed,
                                       const DownsampleOptions& options = {});

}  // namespace flab
