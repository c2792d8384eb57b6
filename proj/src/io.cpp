#include "flab/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "volume serialization assumes a little-endian host");

namespace flab {

namespace {

constexpr const char* kVolumeMagic = "FLAB-VOL1";
constexpr const char* kTruthMagic = "FLAB-TRUTH1";
constexpr const char* kPredMagic = "FLAB-PRED1";
constexpr const char* kRegionsMagic = "FLAB-ROIS1";

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    return is;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    return os;
}

void expect_magic(std::istream& is, const std::string& magic, const std::string& path) {
    std::string line;
    if (!std::getline(is, line) || line != magic) {
        throw FormatError(path + ": expected magic string '" + magic + "'");
    }
}

}  // namespace

void write_volume(const std::string& path, const VolumeFile& volume) {
    if (volume.data.size() != volume.value_count()) {
        throw std::invalid_argument("write_volume: data size does not match dims");
    }
    const std::size_t payload_bytes = volume.data.size() * sizeof(float);

    auto hdr = open_output(path + ".hdr");
    hdr << kVolumeMagic << '\n';
    hdr << "dims: " << volume.nx << ' ' << volume.ny << ' ' << volume.nz << ' ' << volume.m << '\n';
    hdr << "kind: " << volume.kind << '\n';
    hdr << "endian: little\n";
    hdr << "units: " << volume.units << '\n';
    hdr << "payload_bytes: " << payload_bytes << '\n';
    if (!hdr) throw FormatError("write_volume: header write failed for " + path);

    auto os = open_output(path);
    os.write(reinterpret_cast<const char*>(volume.data.data()),
             static_cast<std::streamsize>(payload_bytes));
    if (!os) throw FormatError("write_volume: payload write failed for " + path);
}

VolumeFile read_volume(const std::string& path) {
    auto hdr = open_input(path + ".hdr");
    expect_magic(hdr, kVolumeMagic, path + ".hdr");

    VolumeFile volume;
    std::size_t payload_bytes = 0;
    std::string line;
    while (std::getline(hdr, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "dims:") {
            ls >> volume.nx >> volume.ny >> volume.nz >> volume.m;
        } else if (key == "kind:") {
            ls >> volume.kind;
        } else if (key == "units:") {
            ls >> volume.units;
        } else if (key == "endian:") {
            std::string endian;
            ls >> endian;
            if (endian != "little") throw FormatError(path + ": unsupported endianness " + endian);
        } else if (key == "payload_bytes:") {
            ls >> payload_bytes;
        } else if (!key.empty()) {
            throw FormatError(path + ".hdr: unknown header field '" + key + "'");
        }
        if (!ls && !ls.eof()) throw FormatError(path + ".hdr: malformed value for '" + key + "'");
    }
    if (volume.nx <= 0 || volume.ny <= 0 || volume.nz <= 0 || volume.m <= 0) {
        throw FormatError(path + ".hdr: missing or non-positive dims");
    }
    if (payload_bytes != volume.value_count() * sizeof(float)) {
        throw FormatError(path + ".hdr: payload_bytes does not match dims");
    }

    auto is = open_input(path);
    volume.data.resize(volume.value_count());
    is.read(reinterpret_cast<char*>(volume.data.data()),
            static_cast<std::streamsize>(payload_bytes));
    if (static_cast<std::size_t>(is.gcount()) != payload_bytes) {
        throw FormatError(path + ": payload shorter than header declares");
    }
    char extra;
    if (is.read(&extra, 1)) throw FormatError(path + ": payload longer than header declares");
    return volume;
}

GradientTable read_gradient_table(const std::string& bvec_path, const std::string& bval_path,
                                  std::vector<std::string>* warnings) {
    auto bvec = open_input(bvec_path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(bvec, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!ls.eof()) {
            throw FormatError(bvec_path + ":" + std::to_string(line_no) + ": non-numeric token");
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.size() != 3) {
        throw FormatError(bvec_path + ": expected 3 component rows, found " +
                          std::to_string(rows.size()));
    }
    if (rows[1].size() != rows[0].size() || rows[2].size() != rows[0].size()) {
        throw FormatError(bvec_path + ": rows have " + std::to_string(rows[0].size()) + "/" +
                          std::to_string(rows[1].size()) + "/" + std::to_string(rows[2].size()) +
                          " entries; rows 1-3 must match");
    }

    auto bval = open_input(bval_path);
    std::vector<double> bvalues;
    line_no = 0;
    while (std::getline(bval, line)) {
        ++line_no;
        std::istringstream ls(line);
        double v;
        while (ls >> v) bvalues.push_back(v);
        if (!ls.eof()) {
            throw FormatError(bval_path + ":" + std::to_string(line_no) + ": non-numeric token");
        }
    }
    if (bvalues.size() != rows[0].size()) {
        throw FormatError(bval_path + ": " + std::to_string(bvalues.size()) + " b-values vs " +
                          std::to_string(rows[0].size()) + " gradient columns in " + bvec_path);
    }

    GradientTable table;
    table.bvalues = bvalues;
    for (std::size_t i = 0; i < bvalues.size(); ++i) {
        Vec3 dir{rows[0][i], rows[1][i], rows[2][i]};
        const double len = norm(dir);
        const bool weighted = bvalues[i] >= kB0Threshold;
        if (len < 1e-12) {
            if (weighted) {
                throw FormatError(bvec_path + ": zero gradient direction in column " +
                                  std::to_string(i + 1) + " with b=" + format_double(bvalues[i]));
            }
            table.directions.push_back({0.0, 0.0, 0.0});
            continue;
        }
        if (weighted && std::abs(len - 1.0) > 1e-6 && warnings) {
            warnings->push_back("normalized non-unit gradient column " + std::to_string(i + 1) +
                                " (length " + format_double(len) + ")");
        }
        table.directions.push_back(normalized(dir));
    }
    table.validate();
    return table;
}

void write_gradient_table(const std::string& bvec_path, const std::string& bval_path,
                          const GradientTable& table) {
    auto bvec = open_output(bvec_path);
    for (int comp = 0; comp < 3; ++comp) {
        for (int i = 0; i < table.count(); ++i) {
            const Vec3& d = table.directions[i];
            double v = comp == 0 ? d.x : comp == 1 ? d.y : d.z;
            bvec << (i ? " " : "") << format_double(v);
        }
        bvec << '\n';
    }
    auto bval = open_output(bval_path);
    for (int i = 0; i < table.count(); ++i) {
        bval << (i ? " " : "") << format_double(table.bvalues[i]);
    }
    bval << '\n';
}

void write_truth(const std::string& path, int nx, int ny, int nz,
                 std::span<const VoxelModel> voxels) {
    if (voxels.size() != static_cast<std::size_t>(nx) * ny * nz) {
        throw std::invalid_argument("write_truth: voxel count does not match dims");
    }
    auto os = open_output(path);
    os << kTruthMagic << '\n';
    os << "dims: " << nx << ' ' << ny << ' ' << nz << '\n';
    for (const auto& voxel : voxels) {
        os << format_double(voxel.f_iso) << ' ' << format_double(voxel.lambda_iso) << ' '
           << voxel.count();
        for (const auto& f : voxel.fascicles) {
            os << ' ' << format_double(f.fraction) << ' ' << format_double(f.lambda_par) << ' '
               << format_double(f.lambda_perp) << ' ' << format_double(f.orientation.x) << ' '
               << format_double(f.orientation.y) << ' ' << format_double(f.orientation.z);
        }
        os << '\n';
    }
    if (!os) throw FormatError("write_truth: write failed for " + path);
}

TruthFile read_truth(const std::string& path) {
    auto is = open_input(path);
    expect_magic(is, kTruthMagic, path);

    TruthFile truth;
    std::string line;
    if (!std::getline(is, line)) throw FormatError(path + ": missing dims line");
    {
        std::istringstream ls(line);
        std::string key;
        ls >> key >> truth.nx >> truth.ny >> truth.nz;
        if (key != "dims:" || !ls || truth.nx <= 0 || truth.ny <= 0 || truth.nz <= 0) {
            throw FormatError(path + ": malformed dims line");
        }
    }
    const std::size_t expected = static_cast<std::size_t>(truth.nx) * truth.ny * truth.nz;
    int line_no = 2;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        VoxelModel voxel;
        int k;
        if (!(ls >> voxel.f_iso >> voxel.lambda_iso >> k) || k < 0) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": malformed voxel record");
        }
        voxel.fascicles.resize(k);
        for (auto& f : voxel.fascicles) {
            if (!(ls >> f.fraction >> f.lambda_par >> f.lambda_perp >> f.orientation.x >>
                  f.orientation.y >> f.orientation.z)) {
                throw FormatError(path + ":" + std::to_string(line_no) + ": truncated fascicle");
            }
        }
        truth.voxels.push_back(std::move(voxel));
    }
    if (truth.voxels.size() != expected) {
        throw FormatError(path + ": " + std::to_string(truth.voxels.size()) + " voxels, dims say " +
                          std::to_string(expected));
    }
    return truth;
}

void write_predictions(const std::string& path, const PredictionVolume& volume) {
    if (static_cast<int>(volume.voxels.size()) != volume.voxel_count()) {
        throw std::invalid_argument("write_predictions: voxel count does not match dims");
    }
    auto os = open_output(path);
    os << kPredMagic << '\n';
    os << "dims: " << volume.nx << ' ' << volume.ny << ' ' << volume.nz << '\n';
    for (const auto& voxel : volume.voxels) {
        os << voxel.count();
        for (const auto& o : voxel.orientations) {
            os << ' ' << format_double(o.x) << ' ' << format_double(o.y) << ' '
               << format_double(o.z);
        }
        os << '\n';
    }
    if (!os) throw FormatError("write_predictions: write failed for " + path);
}

PredictionVolume read_predictions(const std::string& path) {
    auto is = open_input(path);
    expect_magic(is, kPredMagic, path);

    PredictionVolume volume;
    std::string line;
    if (!std::getline(is, line)) throw FormatError(path + ": missing dims line");
    {
        std::istringstream ls(line);
        std::string key;
        ls >> key >> volume.nx >> volume.ny >> volume.nz;
        if (key != "dims:" || !ls || volume.nx <= 0 || volume.ny <= 0 || volume.nz <= 0) {
            throw FormatError(path + ": malformed dims line");
        }
    }
    int line_no = 2;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        FasciclePrediction pred;
        int k;
        if (!(ls >> k) || k < 0) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": malformed voxel record");
        }
        pred.orientations.resize(k);
        for (auto& o : pred.orientations) {
            if (!(ls >> o.x >> o.y >> o.z)) {
                throw FormatError(path + ":" + std::to_string(line_no) + ": truncated orientation");
            }
        }
        volume.voxels.push_back(std::move(pred));
    }
    if (static_cast<int>(volume.voxels.size()) != volume.voxel_count()) {
        throw FormatError(path + ": voxel record count does not match dims");
    }
    return volume;
}

void write_regions(const std::string& path, const std::vector<RegionPair>& pairs, bool targets) {
    auto os = open_output(path);
    os << kRegionsMagic << '\n';
    for (const auto& pair : pairs) {
        const auto& group = targets ? pair.targets : pair.seeds;
        for (std::size_t i = 0; i < group.size(); ++i) {
            os << (i ? " " : "") << group[i][0] << ',' << group[i][1] << ',' << group[i][2];
        }
        os << '\n';
    }
    if (!os) throw FormatError("write_regions: write failed for " + path);
}

std::vector<std::vector<std::array<int, 3>>> read_regions(const std::string& path) {
    auto is = open_input(path);
    expect_magic(is, kRegionsMagic, path);

    std::vector<std::vector<std::array<int, 3>>> out;
    std::string line;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::vector<std::array<int, 3>> group;
        std::string token;
        while (ls >> token) {
            std::array<int, 3> v;
            char c1, c2;
            std::istringstream ts(token);
            if (!(ts >> v[0] >> c1 >> v[1] >> c2 >> v[2]) || c1 != ',' || c2 != ',') {
                throw FormatError(path + ":" + std::to_string(line_no) + ": bad voxel token '" +
                                  token + "'");
            }
            group.push_back(v);
        }
        if (!group.empty()) out.push_back(std::move(group));
    }
    return out;
}

void write_streamlines(const std::string& path, std::span<const Streamline> streamlines) {
    auto os = open_output(path);
    for (std::size_t i = 0; i < streamlines.size(); ++i) {
        if (i) os << '\n';
        for (const auto& p : streamlines[i].points) {
            os << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z)
               << '\n';
        }
    }
    if (!os) throw FormatError("write_streamlines: write failed for " + path);
}

void write_text_file(const std::string& path, const std::string& content) {
    auto os = open_output(path);
    os << content;
    if (!os) throw FormatError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
    auto is = open_input(path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace flab
