#pragma once

#include <span>
#include <vector>

#include "flab/metrics.hpp"
#include "flab/mlp.hpp"
#include "flab/postprocess.hpp"
#include "flab/signal.hpp"
#include "flab/sphere.hpp"

namespace flab {

struct PipelineOptions {
    double threshold_deg = 30.0;
    int smooth_iterations = 2;
    double smooth_lambda = 0.5;
    double fodf_p = 2.0;
    int max_count = 0;  // 0 = uncapped
    int threads = 1;
    bool want_fodf = false;
    bool want_fields = false;
};

struct VolumeResult {
    PredictionVolume predictions;
    std::vector<double> fodf;          // voxel-major amplitudes (want_fodf)
    std::vector<double> raw_field;     // voxel-major angles (want_fields)
    std::vector<double> smooth_field;  // voxel-major angles (want_fields)
};

// Full per-voxel pipeline over a volume: features -> angle field -> smoothing
// -> fascicle extraction, parallel across voxels with per-voxel determinism.
VolumeResult predict_volume(const MlpModel& model, std::span<const double> signals, int nx, int ny,
                            int nz, const GradientTable& table, const SphereGrid& grid,
                            const PipelineOptions& options = {});

}  // namespace flab
