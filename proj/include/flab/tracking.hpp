#pragma once

#include <array>
#include <span>
#include <vector>

#include "flab/postprocess.hpp"
#include "flab/vec3.hpp"

namespace flab {

enum class Termination { LeftVolume, AngleExceeded, MaxSteps, NoPeak };

const char* termination_name(Termination t);

// Points in voxel coordinates (voxel centers at integer positions),
// consecutive points exactly one step apart. A streamline is integrated from
// the seed in both directions; each end records why it stopped.
struct Streamline {
    std::vector<Vec3> points;
    Termination forward_reason = Termination::NoPeak;
    Termination backward_reason = Termination::NoPeak;
};

struct TrackParams {
    double step = 0.5;           // voxels
    double max_angle_deg = 45.0;  // per-step turning limit
    int max_steps = 1000;         // per direction
};

// Deterministic peak-following: at every step the peak of the containing
// voxel closest to the incoming direction (antipodal metric) is chosen.
// The first direction is the most confident peak of the seed voxel.
std::vector<Streamline> track(std::span<const std::array<int, 3>> seeds,
                              const PredictionVolume& peaks, const TrackParams& params = {});

struct SuccessReport {
    std::vector<double> per_pair;
    double mean = 0.0;
};

// Fraction of each pair's streamlines with either endpoint within tolerance
// (Euclidean, voxel units, inclusive) of any target voxel center.
SuccessReport success_ratio(const std::vector<std::vector<Streamline>>& per_pair_streamlines,
                            const std::vector<std::vector<std::array<int, 3>>>& per_pair_targets,
                            double tolerance = 2.0);

}  // namespace flab
