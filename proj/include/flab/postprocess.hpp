#pragma once

#include <span>
#include <vector>

#include "flab/mlp.hpp"
#include "flab/signal.hpp"
#include "flab/sphere.hpp"
#include "flab/vec3.hpp"

namespace flab {

// Per-grid-direction estimated angle (radians, [0, pi/2]) to the closest
// fascicle. Values are antipodally symmetric: values[i] == values[antipode[i]].
struct AngleField {
    std::vector<double> values;

    void validate(const SphereGrid& grid) const;
};

struct FasciclePrediction {
    // Canonical-hemisphere orientations, ordered by ascending field value at
    // their minima (most confident first).
    std::vector<Vec3> orientations;
    std::vector<int> raw_minima;  // grid indices of the unrefined minima

    int count() const { return static_cast<int>(orientations.size()); }
};

struct PredictionVolume {
    int nx = 0, ny = 0, nz = 0;
    std::vector<FasciclePrediction> voxels;  // x fastest, then y, then z

    int voxel_count() const { return nx * ny * nz; }
    int voxel_index(int x, int y, int z) const { return x + nx * (y + ny * z); }
    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
    }
};

// Model prediction for every grid direction, then symmetrized across
// antipodal pairs. Features are even in the probe, so only the canonical
// member of each pair is evaluated.
AngleField estimate_field(const MlpModel& model, std::span<const double> signals,
                          const GradientTable& table, const SphereGrid& grid);

// Iterated neighborhood diffusion on the grid graph:
// v[i] <- (1-lambda)*v[i] + lambda*mean(neighbors), with antipodal symmetry
// re-enforced after each iteration and the result clamped to [0, pi/2].
AngleField smooth_field(const AngleField& field, const SphereGrid& grid, int iterations = 2,
                        double lambda = 0.5);

// Thresholds the field at threshold_deg, extracts local minima among the
// candidates, refines each minimum by the Karcher mean of its cluster
// (candidates nearer to it than to any other minimum). max_count > 0 keeps
// only that many lowest-value minima.
FasciclePrediction extract_fascicles(const AngleField& field, const SphereGrid& grid,
                                     double threshold_deg = 30.0, int max_count = 0);

// amplitude[i] = 1 / max(value[i], floor)^p, normalized to unit sum.
std::vector<double> fodf_from_field(const AngleField& field, double p = 2.0,
                                    double floor_rad = deg2rad(1.0));

}  // namespace flab
