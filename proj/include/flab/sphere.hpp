#pragma once

#include <span>
#include <vector>

#include "flab/vec3.hpp"

namespace flab {

// Antipodally symmetric direction grid. directions[antipode[i]] is the exact
// negation of directions[i]; the neighbor relation is symmetric with at least
// five (in practice six or more) entries per direction.
struct SphereGrid {
    std::vector<Vec3> directions;
    std::vector<std::vector<int>> neighbors;
    std::vector<int> antipode;

    int size() const { return static_cast<int>(directions.size()); }
};

// Deterministic grid of n_points directions (n_points even, >= 12): a
// spherical Fibonacci lattice on n_points/2 upper-hemisphere seeds, each
// paired with its negation. Neighbors are the 6 nearest directions by angle,
// symmetrized.
SphereGrid build_grid(int n_points);

// Indices i where mask[i] is set, field[i] <= field[j] for every neighbor j,
// and field[i] < field[j] for at least one neighbor. Each result is mapped to
// the canonical member of its antipodal pair and the list is deduplicated.
std::vector<int> local_minima(std::span<const double> field, const SphereGrid& grid,
                              std::span<const char> candidate_mask);

// Intrinsic mean of directions on the sphere. Members are sign-aligned to the
// running estimate, so antipodal inputs collapse; iterates tangent-space
// averaging until the update angle drops below 1e-8 rad (at most 100 rounds).
Vec3 karcher_mean(std::span<const Vec3> cluster, const Vec3& seed);

// Grid index whose direction is closest to v under the antipodal metric.
int nearest_grid_index(const SphereGrid& grid, const Vec3& v);

}  // namespace flab
