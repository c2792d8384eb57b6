#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flab/vec3.hpp"

namespace flab {

// b-values below this carry no diffusion weighting and are treated as
// reference measurements.
inline constexpr double kB0Threshold = 50.0;  // s/mm^2

struct GradientTable {
    std::vector<Vec3> directions;
    std::vector<double> bvalues;  // s/mm^2

    int count() const { return static_cast<int>(directions.size()); }
    bool is_b0(int i) const { return bvalues[i] < kB0Threshold; }
    void validate() const;  // throws std::invalid_argument
};

struct Fascicle {
    double fraction = 0.0;
    double lambda_par = 0.0;   // axial diffusivity, mm^2/s
    double lambda_perp = 0.0;  // radial diffusivity, mm^2/s
    Vec3 orientation;          // unit
};

// Ground-truth compartment parameters of one voxel. Signals are emitted
// normalized (s/s0), so s0 never appears.
struct VoxelModel {
    double f_iso = 1.0;
    double lambda_iso = 0.0025;  // mm^2/s
    std::vector<Fascicle> fascicles;

    int count() const { return static_cast<int>(fascicles.size()); }
    void validate(double min_crossing_angle_deg = 0.0) const;
};

struct NoiseSpec {
    double snr = 0.0;  // relative to the b=0 signal; <= 0 disables noise

    bool enabled() const { return snr > 0.0; }
    static NoiseSpec none() { return {}; }
    static NoiseSpec rician(double snr) { return {snr}; }
};

// Normalized multi-tensor signals s_i/s0 for every table entry. With noise
// enabled each value is replaced by the magnitude of the signal plus complex
// Gaussian noise of sigma 1/snr (Rician corruption), using the seeded
// generator.
std::vector<double> simulate_signal(const VoxelModel& model, const GradientTable& table,
                                    const NoiseSpec& noise, std::uint64_t rng_seed);

struct SamplerConfig {
    int min_count = 1;
    int max_count = 3;
    double min_crossing_angle_deg = 30.0;
    double min_fraction = 0.15;
    double lambda_par_min = 0.0018, lambda_par_max = 0.0024;
    double lambda_perp_min = 0.00035, lambda_perp_max = 0.00050;
    double lambda_iso_min = 0.002, lambda_iso_max = 0.003;
    double f_iso_min = 0.0, f_iso_max = 0.2;
    double snr_min = 10.0, snr_max = 30.0;  // per-voxel Rician SNR for training draws
};

// Random voxel: fascicle count uniform over [min_count, max_count],
// orientations uniform on the sphere rejection-sampled to the pairwise
// crossing-angle floor, diffusivities uniform over the configured ranges,
// fractions uniform on the simplex of 1 - f_iso with a per-fascicle floor.
VoxelModel sample_training_voxel(const SamplerConfig& config, std::uint64_t rng_seed);

struct RegionPair {
    std::vector<std::array<int, 3>> seeds;
    std::vector<std::array<int, 3>> targets;
};

struct BundleSpec {
    enum class Kind { Straight, Arc };
    Kind kind = Kind::Straight;
    // Straight: voxels within half_width of the line through `point` along
    // `direction`; fascicle orientation = direction.
    Vec3 point;
    Vec3 direction;
    // Arc: in-plane annulus segment around `center` (|r - radius| <= half_width,
    // polar angle within [angle_min_deg, angle_max_deg]); orientation = tangent.
    Vec3 center;
    double radius = 0.0;
    double angle_min_deg = 0.0, angle_max_deg = 360.0;

    double half_width = 1.0;
    double weight = 1.0;  // relative occupancy where bundles overlap
};

struct PhantomSpec {
    int nx = 0, ny = 0, nz = 1;
    double f_iso = 0.1;
    double lambda_iso = 0.0025;
    double lambda_par = 0.0021;
    double lambda_perp = 0.00042;
    double min_crossing_angle_deg = 30.0;
    double min_fraction = 0.15;
    std::vector<BundleSpec> bundles;
    std::vector<RegionPair> pairs;  // tractography seed/target regions
};

// Built-in specs: "grid15" (15x15 crossing phantom) and "bundles20"
// (33x33 tracking phantom with 20 seed/target pairs).
PhantomSpec builtin_phantom_spec(const std::string& name);

struct Phantom {
    int nx = 0, ny = 0, nz = 0;
    std::vector<VoxelModel> voxels;  // x fastest, then y, then z
    std::vector<double> signals;     // voxel-major, measurements contiguous
    std::vector<RegionPair> pairs;

    int voxel_count() const { return nx * ny * nz; }
    int voxel_index(int x, int y, int z) const { return x + nx * (y + ny * z); }
    std::span<const double> voxel_signals(int v, int m) const {
        return {signals.data() + static_cast<std::size_t>(v) * m, static_cast<std::size_t>(m)};
    }
};

// Deterministic phantom with retained ground truth. Noise is seeded per voxel
// with rng_seed ^ voxel index, so the result is independent of evaluation
// order. threads > 1 parallelizes over voxels.
Phantom build_phantom(const PhantomSpec& spec, const GradientTable& table, const NoiseSpec& noise,
                      std::uint64_t rng_seed, int threads = 1);

}  // namespace flab
