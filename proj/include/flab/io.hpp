#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flab/mlp.hpp"
#include "flab/postprocess.hpp"
#include "flab/signal.hpp"
#include "flab/tracking.hpp"

namespace flab {

// Raw volume: little-endian float32 payload at `path`, text sidecar at
// `path + ".hdr"` carrying dims, value kind, endianness, units, and the
// payload byte count. Layout is voxel-major (x fastest, then y, then z) with
// the M per-voxel values contiguous.
struct VolumeFile {
    int nx = 0, ny = 0, nz = 0, m = 0;
    std::string kind = "dwi";        // dwi | fodf | angle
    std::string units = "normalized";
    std::vector<float> data;

    std::size_t value_count() const {
        return static_cast<std::size_t>(nx) * ny * nz * m;
    }
};

void write_volume(const std::string& path, const VolumeFile& volume);
VolumeFile read_volume(const std::string& path);

// FSL-convention gradient table: bvec has three whitespace-separated rows of
// m components, bval one row of m values. Columns are normalized to unit
// length; a non-unit column with b > 50 is normalized and reported in
// `warnings`.
GradientTable read_gradient_table(const std::string& bvec_path, const std::string& bval_path,
                                  std::vector<std::string>* warnings = nullptr);
void write_gradient_table(const std::string& bvec_path, const std::string& bval_path,
                          const GradientTable& table);

// Ground-truth voxel models; numeric fields round-trip at full precision.
void write_truth(const std::string& path, int nx, int ny, int nz,
                 std::span<const VoxelModel> voxels);
struct TruthFile {
    int nx = 0, ny = 0, nz = 0;
    std::vector<VoxelModel> voxels;
};
TruthFile read_truth(const std::string& path);

void write_predictions(const std::string& path, const PredictionVolume& volume);
PredictionVolume read_predictions(const std::string& path);

// Seed/target regions, one line per pair of space-separated x,y,z triples.
void write_regions(const std::string& path, const std::vector<RegionPair>& pairs, bool targets);
std::vector<std::vector<std::array<int, 3>>> read_regions(const std::string& path);

// One line per point "x y z", blank line between streamlines.
void write_streamlines(const std::string& path, std::span<const Streamline> streamlines);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace flab
