#include "flab/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace flab {

SphereGrid build_grid(int n_points) {
    if (n_points < 12 || n_points % 2 != 0) {
        throw std::invalid_argument("build_grid: n_points must be even and >= 12, got " +
                                    std::to_string(n_points));
    }
    const int half = n_points / 2;
    const double golden_angle = kPi * (3.0 - std::sqrt(5.0));

    SphereGrid grid;
    grid.directions.resize(n_points);
    grid.antipode.resize(n_points);
    for (int i = 0; i < half; ++i) {
        // z descends through (0, 1): seeds cover the upper hemisphere, the
        // negations fill the lower one.
        double z = 1.0 - (i + 0.5) / half;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double theta = golden_angle * i;
        Vec3 seed{r * std::cos(theta), r * std::sin(theta), z};
        grid.directions[2 * i] = seed;
        grid.directions[2 * i + 1] = -seed;
        grid.antipode[2 * i] = 2 * i + 1;
        grid.antipode[2 * i + 1] = 2 * i;
    }

    // 6 nearest by angle (plain angle, not antipodal: a direction's antipode
    // sits at 180 degrees and is never a neighbor).
    const int k = 6;
    grid.neighbors.assign(n_points, {});
    std::vector<std::pair<double, int>> order(n_points - 1);
    for (int i = 0; i < n_points; ++i) {
        order.clear();
        for (int j = 0; j < n_points; ++j) {
            if (j == i) continue;
            order.emplace_back(-dot(grid.directions[i], grid.directions[j]), j);
        }
        int take = std::min<int>(k, static_cast<int>(order.size()));
        std::partial_sort(order.begin(), order.begin() + take, order.end());
        for (int t = 0; t < take; ++t) grid.neighbors[i].push_back(order[t].second);
    }
    // Symmetrize and sort.
    for (int i = 0; i < n_points; ++i) {
        for (int j : grid.neighbors[i]) {
            auto& back = grid.neighbors[j];
            if (std::find(back.begin(), back.end(), i) == back.end()) back.push_back(i);
        }
    }
    for (auto& nb : grid.neighbors) std::sort(nb.begin(), nb.end());
    return grid;
}

std::vector<int> local_minima(std::span<const double> field, const SphereGrid& grid,
                              std::span<const char> candidate_mask) {
    const std::size_t n = grid.directions.size();
    if (field.size() != n || candidate_mask.size() != n) {
        throw std::invalid_argument("local_minima: field/mask size does not match grid size");
    }
    std::set<int> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!candidate_mask[i]) continue;
        bool leq_all = true;
        bool lt_any = false;
        for (int j : grid.neighbors[i]) {
            if (field[i] > field[j]) {
                leq_all = false;
                break;
            }
            if (field[i] < field[j]) lt_any = true;
        }
        if (!leq_all || !lt_any) continue;
        int idx = static_cast<int>(i);
        if (!is_canonical(grid.directions[i])) idx = grid.antipode[i];
        out.insert(idx);
    }
    return {out.begin(), out.end()};
}

Vec3 karcher_mean(std::span<const Vec3> cluster, const Vec3& seed) {
    if (cluster.empty()) throw std::invalid_argument("karcher_mean: empty cluster");
    constexpr double tol = 1e-8;
    constexpr int max_iters = 100;

    Vec3 est = normalized(seed);
    for (int iter = 0; iter < max_iters; ++iter) {
        Vec3 tangent_sum{};
        for (const Vec3& member : cluster) {
            Vec3 v = dot(member, est) < 0.0 ? -member : member;
            double c = std::clamp(dot(v, est), -1.0, 1.0);
            double theta = std::acos(c);
            Vec3 offset = v - est * c;  // length sin(theta)
            double s = std::sqrt(std::max(0.0, 1.0 - c * c));
            double scale = s > 1e-12 ? theta / s : 1.0;  // theta/sin(theta) -> 1
            tangent_sum += offset * scale;
        }
        Vec3 step = tangent_sum * (1.0 / static_cast<double>(cluster.size()));
        double angle = norm(step);
        if (angle < tol) break;
        est = normalized(est * std::cos(angle) + step * (std::sin(angle) / angle));
    }
    return est;
}

int nearest_grid_index(const SphereGrid& grid, const Vec3& v) {
    int best = 0;
    double best_dot = -1.0;
    for (int i = 0; i < grid.size(); ++i) {
        double d = std::abs(dot(grid.directions[i], v));
        if (d > best_dot) {
            best_dot = d;
            best = i;
        }
    }
    return best;
}

}  // namespace flab
