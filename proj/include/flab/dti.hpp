#pragma once

#include <span>

#include "flab/postprocess.hpp"
#include "flab/signal.hpp"
#include "flab/vec3.hpp"

namespace flab {

// Log-linear single-tensor fit; used as the comparison baseline for the
// tracking experiments.
struct DtiFit {
    Vec3 principal;
    double fa = 0.0;
    double md = 0.0;
    bool ok = false;
};

DtiFit fit_dti(std::span<const double> signals, const GradientTable& table);

// One peak per voxel (the principal eigenvector) where the fit succeeds and
// FA clears the threshold; empty prediction otherwise.
PredictionVolume dti_peaks(std::span<const double> signals, int nx, int ny, int nz,
                           const GradientTable& table, double fa_threshold = 0.15,
                           int threads = 1);

}  // namespace flab
