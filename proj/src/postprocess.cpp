#include "flab/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flab {

void AngleField::validate(const SphereGrid& grid) const {
    if (values.size() != static_cast<std::size_t>(grid.size())) {
        throw std::invalid_argument("angle field: size does not match grid");
    }
    for (double v : values) {
        if (!(v >= 0.0 && v <= kPi / 2.0 + 1e-12)) {
            throw std::invalid_argument("angle field: value outside [0, pi/2]");
        }
    }
}

AngleField estimate_field(const MlpModel& model, std::span<const double> signals,
                          const GradientTable& table, const SphereGrid& grid) {
    std::vector<int> canonical;
    canonical.reserve(grid.size() / 2);
    for (int i = 0; i < grid.size(); ++i) {
        if (is_canonical(grid.directions[i])) canonical.push_back(i);
    }

    Eigen::MatrixXd features(canonical.size(), model.input_size());
    for (std::size_t c = 0; c < canonical.size(); ++c) {
        auto fv = compute_feature(grid.directions[canonical[c]], signals, table, model.feature_n,
                                  model.feature_epsilon);
        for (int j = 0; j < model.input_size(); ++j) features(c, j) = fv.values[j];
    }
    Eigen::VectorXd angles = predict_batch(model, features);

    AngleField field;
    field.values.assign(grid.size(), 0.0);
    for (std::size_t c = 0; c < canonical.size(); ++c) {
        field.values[canonical[c]] = angles[c];
        field.values[grid.antipode[canonical[c]]] = angles[c];
    }
    // Symmetrization (v[i]+v[antipode])/2 is an exact no-op here by
    // construction; fields from other sources go through smooth_field, which
    // re-enforces it.
    return field;
}

namespace {

void symmetrize(std::vector<double>& values, const SphereGrid& grid) {
    for (int i = 0; i < grid.size(); ++i) {
        const int a = grid.antipode[i];
        if (i < a) {
            const double mean = 0.5 * (values[i] + values[a]);
            values[i] = mean;
            values[a] = mean;
        }
    }
}

}  // namespace

AngleField smooth_field(const AngleField& field, const SphereGrid& grid, int iterations,
                        double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("smooth_field: lambda must lie in (0, 1]");
    }
    if (field.values.size() != static_cast<std::size_t>(grid.size())) {
        throw std::invalid_argument("smooth_field: field size does not match grid");
    }

    std::vector<double> current = field.values;
    std::vector<double> next(current.size());
    for (int it = 0; it < iterations; ++it) {
        for (int i = 0; i < grid.size(); ++i) {
            double sum = 0.0;
            for (int j : grid.neighbors[i]) sum += current[j];
            const double mean = sum / static_cast<double>(grid.neighbors[i].size());
            next[i] = (1.0 - lambda) * current[i] + lambda * mean;
        }
        symmetrize(next, grid);
        current.swap(next);
    }
    for (double& v : current) v = std::clamp(v, 0.0, kPi / 2.0);

    AngleField out;
    out.values = std::move(current);
    return out;
}

FasciclePrediction extract_fascicles(const AngleField& field, const SphereGrid& grid,
                                     double threshold_deg, int max_count) {
    if (!(threshold_deg > 0.0 && threshold_deg < 90.0)) {
        throw std::invalid_argument("extract_fascicles: threshold must lie in (0, 90) degrees");
    }
    if (field.values.size() != static_cast<std::size_t>(grid.size())) {
        throw std::invalid_argument("extract_fascicles: field size does not match grid");
    }
    const double threshold = deg2rad(threshold_deg);

    std::vector<char> mask(grid.size());
    std::vector<int> candidates;
    for (int i = 0; i < grid.size(); ++i) {
        mask[i] = field.values[i] < threshold ? 1 : 0;
        if (mask[i]) candidates.push_back(i);
    }

    std::vector<int> minima = local_minima(field.values, grid, mask);
    if (minima.empty()) return {};

    // Most confident first; grid index breaks ties.
    std::sort(minima.begin(), minima.end(), [&](int a, int b) {
        if (field.values[a] != field.values[b]) return field.values[a] < field.values[b];
        return a < b;
    });

    // Assign each candidate to its nearest minimum (ties to the lowest grid
    // index), then refine each minimum on its cluster.
    std::vector<std::vector<Vec3>> clusters(minima.size());
    for (int c : candidates) {
        int best = -1;
        double best_angle = 0.0;
        for (std::size_t k = 0; k < minima.size(); ++k) {
            double ang = antipodal_angle_rad(grid.directions[c], grid.directions[minima[k]]);
            if (best < 0 || ang < best_angle - 1e-15 ||
                (std::abs(ang - best_angle) <= 1e-15 && minima[k] < minima[best])) {
                best = static_cast<int>(k);
                best_angle = ang;
            }
        }
        clusters[best].push_back(grid.directions[c]);
    }

    FasciclePrediction pred;
    const std::size_t keep =
        max_count > 0 ? std::min<std::size_t>(max_count, minima.size()) : minima.size();
    for (std::size_t k = 0; k < keep; ++k) {
        const Vec3 seed = grid.directions[minima[k]];
        Vec3 mean = clusters[k].empty() ? seed : karcher_mean(clusters[k], seed);
        pred.orientations.push_back(canonicalize(mean));
        pred.raw_minima.push_back(minima[k]);
    }
    return pred;
}

std::vector<double> fodf_from_field(const AngleField& field, double p, double floor_rad) {
    if (!(p > 0.0) || !(floor_rad > 0.0)) {
        throw std::invalid_argument("fodf_from_field: p and floor must be positive");
    }
    std::vector<double> amplitudes(field.values.size());
    double total = 0.0;
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        amplitudes[i] = 1.0 / std::pow(std::max(field.values[i], floor_rad), p);
        total += amplitudes[i];
    }
    for (double& a : amplitudes) a /= total;
    return amplitudes;
}

}  // namespace flab
