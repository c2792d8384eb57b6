#include "flab/signal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "flab/errors.hpp"
#include "flab/parallel.hpp"
#include "flab/rng.hpp"

namespace flab {

void GradientTable::validate() const {
    if (directions.size() != bvalues.size()) {
        throw std::invalid_argument("gradient table: direction/bvalue counts differ");
    }
    if (count() < 6) {
        throw std::invalid_argument("gradient table: need at least 6 measurements, got " +
                                    std::to_string(count()));
    }
    for (int i = 0; i < count(); ++i) {
        if (bvalues[i] < 0.0) throw std::invalid_argument("gradient table: negative b-value");
        if (!is_b0(i) && !is_unit(directions[i], 1e-6)) {
            throw std::invalid_argument("gradient table: non-unit direction at index " +
                                        std::to_string(i));
        }
    }
}

void VoxelModel::validate(double min_crossing_angle_deg) const {
    double total = f_iso;
    if (f_iso < 0.0 || lambda_iso <= 0.0) {
        throw std::invalid_argument("voxel model: isotropic compartment out of range");
    }
    for (const auto& f : fascicles) {
        if (f.fraction < 0.0) throw std::invalid_argument("voxel model: negative fraction");
        if (!(f.lambda_par > f.lambda_perp) || !(f.lambda_perp > 0.0)) {
            throw std::invalid_argument("voxel model: need lambda_par > lambda_perp > 0");
        }
        if (!is_unit(f.orientation)) {
            throw std::invalid_argument("voxel model: non-unit fascicle orientation");
        }
        total += f.fraction;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("voxel model: fractions sum to " + std::to_string(total));
    }
    if (count() > 3) throw std::invalid_argument("voxel model: more than 3 fascicles");
    for (int a = 0; a < count(); ++a) {
        for (int b = a + 1; b < count(); ++b) {
            double ang = angle_between_deg(fascicles[a].orientation, fascicles[b].orientation, true);
            if (ang + 1e-9 < min_crossing_angle_deg) {
                throw std::invalid_argument("voxel model: fascicles cross at " +
                                            std::to_string(ang) + " deg, below the configured floor");
            }
        }
    }
}

std::vector<double> simulate_signal(const VoxelModel& model, const GradientTable& table,
                                    const NoiseSpec& noise, std::uint64_t rng_seed) {
    table.validate();
    model.validate();

    const int m = table.count();
    std::vector<double> out(m);
    for (int i = 0; i < m; ++i) {
        const double b = table.bvalues[i];
        double s = model.f_iso * std::exp(-b * model.lambda_iso);
        for (const auto& f : model.fascicles) {
            double c = dot(table.directions[i], f.orientation);
            double mean_lambda = (f.lambda_par + 2.0 * f.lambda_perp) / 3.0;
            s += f.fraction *
                 std::exp(-b * (f.lambda_perp + 3.0 * (mean_lambda - f.lambda_perp) * c * c));
        }
        out[i] = s;
    }
    if (noise.enabled()) {
        Rng rng(rng_seed);
        const double sigma = 1.0 / noise.snr;
        for (int i = 0; i < m; ++i) {
            double e1 = rng.normal();
            double e2 = rng.normal();
            out[i] = std::sqrt((out[i] + e1 * sigma) * (out[i] + e1 * sigma) +
                               (e2 * sigma) * (e2 * sigma));
        }
    }
    return out;
}

namespace {

Vec3 random_direction(Rng& rng) {
    double z = rng.uniform(-1.0, 1.0);
    double phi = rng.uniform(0.0, 2.0 * kPi);
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

constexpr int kMaxRejectionAttempts = 10000;

}  // namespace

VoxelModel sample_training_voxel(const SamplerConfig& config, std::uint64_t rng_seed) {
    if (config.min_count < 1 || config.max_count > 3 || config.min_count > config.max_count) {
        throw std::invalid_argument("sampler: fascicle count range must lie within [1, 3]");
    }
    Rng rng(rng_seed);
    const int k =
        config.min_count + static_cast<int>(rng.uniform_index(config.max_count - config.min_count + 1));

    // Orientations: whole-set rejection against the pairwise angle floor.
    std::vector<Vec3> orientations(k);
    bool ok = false;
    for (int attempt = 0; attempt < kMaxRejectionAttempts && !ok; ++attempt) {
        for (int i = 0; i < k; ++i) orientations[i] = random_direction(rng);
        ok = true;
        for (int a = 0; a < k && ok; ++a) {
            for (int b = a + 1; b < k; ++b) {
                if (angle_between_deg(orientations[a], orientations[b], true) <
                    config.min_crossing_angle_deg) {
                    ok = false;
                    break;
                }
            }
        }
    }
    if (!ok) {
        throw NumericalError("sampler: could not satisfy the crossing-angle floor; "
                             "the configured constraints look inconsistent");
    }

    VoxelModel model;
    model.lambda_iso = rng.uniform(config.lambda_iso_min, config.lambda_iso_max);
    model.f_iso = rng.uniform(config.f_iso_min, config.f_iso_max);
    const double remainder = 1.0 - model.f_iso;

    // Fractions: uniform on the simplex (normalized exponentials), rejected
    // until every fascicle clears the absolute floor.
    std::vector<double> weights(k);
    ok = false;
    for (int attempt = 0; attempt < kMaxRejectionAttempts && !ok; ++attempt) {
        double total = 0.0;
        for (int i = 0; i < k; ++i) {
            weights[i] = -std::log(1.0 - rng.uniform());
            total += weights[i];
        }
        ok = true;
        for (int i = 0; i < k; ++i) {
            weights[i] = weights[i] / total;
            if (weights[i] * remainder < config.min_fraction) ok = false;
        }
    }
    if (!ok) {
        throw NumericalError("sampler: could not satisfy the fraction floor; "
                             "the configured constraints look inconsistent");
    }

    model.fascicles.resize(k);
    for (int i = 0; i < k; ++i) {
        auto& f = model.fascicles[i];
        f.orientation = orientations[i];
        f.fraction = weights[i] * remainder;
        f.lambda_par = rng.uniform(config.lambda_par_min, config.lambda_par_max);
        f.lambda_perp = rng.uniform(config.lambda_perp_min, config.lambda_perp_max);
    }
    // Remove the tiny simplex rounding drift so fractions sum exactly.
    double total = model.f_iso;
    for (const auto& f : model.fascicles) total += f.fraction;
    model.fascicles.back().fraction += 1.0 - total;

    model.validate(config.min_crossing_angle_deg);
    return model;
}

namespace {

// Distance from a voxel center to the bundle's spine; orientation at that
// point. Returns false when the voxel is outside the bundle.
bool bundle_covers(const BundleSpec& b, const Vec3& p, Vec3* orientation) {
    if (b.kind == BundleSpec::Kind::Straight) {
        Vec3 rel = p - b.point;
        Vec3 along = b.direction * dot(rel, b.direction);
        if (norm(rel - along) > b.half_width) return false;
        *orientation = b.direction;
        return true;
    }
    double dx = p.x - b.center.x;
    double dy = p.y - b.center.y;
    double r = std::hypot(dx, dy);
    if (r < 1e-12 || std::abs(r - b.radius) > b.half_width) return false;
    double ang = rad2deg(std::atan2(dy, dx));
    if (ang < 0.0) ang += 360.0;
    if (ang + 1e-9 < b.angle_min_deg || ang - 1e-9 > b.angle_max_deg) return false;
    *orientation = normalized(Vec3{-dy, dx, 0.0});
    return true;
}

}  // namespace

Phantom build_phantom(const PhantomSpec& spec, const GradientTable& table, const NoiseSpec& noise,
                      std::uint64_t rng_seed, int threads) {
    if (spec.nx <= 0 || spec.ny <= 0 || spec.nz <= 0) {
        throw std::invalid_argument("phantom spec: dimensions must be positive");
    }
    table.validate();

    Phantom phantom;
    phantom.nx = spec.nx;
    phantom.ny = spec.ny;
    phantom.nz = spec.nz;
    phantom.pairs = spec.pairs;
    for (const auto& pair : spec.pairs) {
        for (const auto* group : {&pair.seeds, &pair.targets}) {
            for (const auto& v : *group) {
                if (v[0] < 0 || v[0] >= spec.nx || v[1] < 0 || v[1] >= spec.ny || v[2] < 0 ||
                    v[2] >= spec.nz) {
                    throw std::invalid_argument("phantom spec: seed/target voxel outside volume");
                }
            }
        }
    }

    const int nvox = phantom.voxel_count();
    phantom.voxels.resize(nvox);
    for (int z = 0; z < spec.nz; ++z) {
        for (int y = 0; y < spec.ny; ++y) {
            for (int x = 0; x < spec.nx; ++x) {
                Vec3 p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
                std::vector<Vec3> orientations;
                std::vector<double> weights;
                for (const auto& b : spec.bundles) {
                    Vec3 o;
                    if (bundle_covers(b, p, &o)) {
                        orientations.push_back(o);
                        weights.push_back(b.weight);
                    }
                }
                VoxelModel model;
                model.lambda_iso = spec.lambda_iso;
                if (orientations.empty()) {
                    model.f_iso = 1.0;
                } else {
                    model.f_iso = spec.f_iso;
                    double total_weight = 0.0;
                    for (double w : weights) total_weight += w;
                    double remainder = 1.0 - spec.f_iso;
                    model.fascicles.resize(orientations.size());
                    double assigned = model.f_iso;
                    for (std::size_t i = 0; i < orientations.size(); ++i) {
                        auto& f = model.fascicles[i];
                        f.orientation = orientations[i];
                        f.fraction = remainder * weights[i] / total_weight;
                        f.lambda_par = spec.lambda_par;
                        f.lambda_perp = spec.lambda_perp;
                        if (f.fraction + 1e-12 < spec.min_fraction) {
                            throw std::invalid_argument(
                                "phantom spec: overlapping bundles push a fascicle fraction to " +
                                std::to_string(f.fraction) + ", below the floor of " +
                                std::to_string(spec.min_fraction));
                        }
                        assigned += f.fraction;
                    }
                    model.fascicles.back().fraction += 1.0 - assigned;
                }
                try {
                    model.validate(orientations.empty() ? 0.0 : spec.min_crossing_angle_deg);
                } catch (const std::invalid_argument& e) {
                    throw std::invalid_argument("phantom spec: voxel (" + std::to_string(x) + "," +
                                                std::to_string(y) + "," + std::to_string(z) +
                                                "): " + e.what());
                }
                phantom.voxels[phantom.voxel_index(x, y, z)] = std::move(model);
            }
        }
    }

    const int m = table.count();
    phantom.signals.resize(static_cast<std::size_t>(nvox) * m);
    parallel_for(nvox, threads, [&](std::size_t v) {
        auto sig = simulate_signal(phantom.voxels[v], table, noise,
                                   rng_seed ^ static_cast<std::uint64_t>(v));
        std::copy(sig.begin(), sig.end(), phantom.signals.begin() + v * m);
    });
    return phantom;
}

namespace {

PhantomSpec make_grid15() {
    // Two in-plane bands crossing at 90 degrees plus a through-plane bundle
    // (a disc of voxels oriented along z), the classic three-way crossing:
    // regions of 1, 2, and 3 mutually orthogonal fascicles.
    PhantomSpec spec;
    spec.nx = 15;
    spec.ny = 15;
    spec.nz = 1;

    BundleSpec horizontal;
    horizontal.kind = BundleSpec::Kind::Straight;
    horizontal.point = {7.0, 7.0, 0.0};
    horizontal.direction = {1.0, 0.0, 0.0};
    horizontal.half_width = 3.0;  // rows 4..10

    BundleSpec vertical = horizontal;
    vertical.direction = {0.0, 1.0, 0.0};  // cols 4..10

    BundleSpec through = horizontal;
    through.direction = {0.0, 0.0, 1.0};
    through.half_width = 2.6;  // disc of radius 2.6 around the center

    spec.bundles = {horizontal, vertical, through};
    return spec;
}

std::vector<std::array<int, 3>> column_voxels(int x, int y0, int y1) {
    std::vector<std::array<int, 3>> out;
    for (int y = y0; y <= y1; ++y) out.push_back({x, y, 0});
    return out;
}

std::vector<std::array<int, 3>> row_voxels(int y, int x0, int x1) {
    std::vector<std::array<int, 3>> out;
    for (int x = x0; x <= x1; ++x) out.push_back({x, y, 0});
    return out;
}

PhantomSpec make_bundles20() {
    PhantomSpec spec;
    spec.nx = 33;
    spec.ny = 33;
    spec.nz = 1;

    const std::vector<int> band_centers{3, 9, 21, 27};
    for (int c : band_centers) {
        BundleSpec b;
        b.kind = BundleSpec::Kind::Straight;
        b.point = {16.0, static_cast<double>(c), 0.0};
        b.direction = {1.0, 0.0, 0.0};
        b.half_width = 1.0;
        spec.bundles.push_back(b);
    }
    for (int c : band_centers) {
        BundleSpec b;
        b.kind = BundleSpec::Kind::Straight;
        b.point = {static_cast<double>(c), 16.0, 0.0};
        b.direction = {0.0, 1.0, 0.0};
        b.half_width = 1.0;
        spec.bundles.push_back(b);
    }

    BundleSpec arc_a;
    arc_a.kind = BundleSpec::Kind::Arc;
    arc_a.center = {0.0, 0.0, 0.0};
    arc_a.radius = 15.0;
    arc_a.half_width = 1.5;
    arc_a.angle_min_deg = 0.0;
    arc_a.angle_max_deg = 90.0;
    spec.bundles.push_back(arc_a);

    BundleSpec arc_b = arc_a;
    arc_b.center = {32.0, 32.0, 0.0};
    arc_b.angle_min_deg = 180.0;
    arc_b.angle_max_deg = 270.0;
    spec.bundles.push_back(arc_b);

    // One pair per bundle end: straight bands tracked east/west and
    // north/south, arcs tracked from either endpoint.
    for (int c : band_centers) {
        spec.pairs.push_back({column_voxels(0, c - 1, c + 1), column_voxels(32, c - 1, c + 1)});
        spec.pairs.push_back({column_voxels(32, c - 1, c + 1), column_voxels(0, c - 1, c + 1)});
    }
    for (int c : band_centers) {
        spec.pairs.push_back({row_voxels(0, c - 1, c + 1), row_voxels(32, c - 1, c + 1)});
        spec.pairs.push_back({row_voxels(32, c - 1, c + 1), row_voxels(0, c - 1, c + 1)});
    }
    RegionPair arc_a_pair{row_voxels(0, 14, 16), column_voxels(0, 14, 16)};
    spec.pairs.push_back(arc_a_pair);
    spec.pairs.push_back({arc_a_pair.targets, arc_a_pair.seeds});
    RegionPair arc_b_pair{row_voxels(32, 16, 18), column_voxels(32, 16, 18)};
    spec.pairs.push_back(arc_b_pair);
    spec.pairs.push_back({arc_b_pair.targets, arc_b_pair.seeds});
    return spec;
}

}  // namespace

PhantomSpec builtin_phantom_spec(const std::string& name) {
    if (name == "grid15") return make_grid15();
    if (name == "bundles20") return make_bundles20();
    throw std::invalid_argument("unknown builtin phantom spec: " + name);
}

}  // namespace flab
