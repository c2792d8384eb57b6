#include "flab/config.hpp"

#include <fstream>

#include <json.hpp>

#include "flab/errors.hpp"

namespace flab {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

Vec3 read_vec3(const json& j, const std::string& context) {
    if (!j.is_array() || j.size() != 3) {
        throw FormatError(context + ": expected an [x, y, z] array");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

PhantomSpec load_phantom_spec(const std::string& path) {
    const json j = parse_file(path);
    try {
        PhantomSpec spec;
        const auto& dims = j.at("dims");
        if (!dims.is_array() || dims.size() != 3) {
            throw FormatError("dims: expected [nx, ny, nz]");
        }
        spec.nx = dims[0].get<int>();
        spec.ny = dims[1].get<int>();
        spec.nz = dims[2].get<int>();
        maybe(j, "f_iso", spec.f_iso);
        maybe(j, "lambda_iso", spec.lambda_iso);
        maybe(j, "lambda_par", spec.lambda_par);
        maybe(j, "lambda_perp", spec.lambda_perp);
        maybe(j, "min_crossing_angle_deg", spec.min_crossing_angle_deg);
        maybe(j, "min_fraction", spec.min_fraction);

        for (const auto& b : j.value("bundles", json::array())) {
            BundleSpec bundle;
            const std::string type = b.at("type").get<std::string>();
            if (type == "straight") {
                bundle.kind = BundleSpec::Kind::Straight;
                bundle.point = read_vec3(b.at("point"), "bundle point");
                bundle.direction = normalized(read_vec3(b.at("direction"), "bundle direction"));
            } else if (type == "arc") {
                bundle.kind = BundleSpec::Kind::Arc;
                bundle.center = read_vec3(b.at("center"), "arc center");
                bundle.radius = b.at("radius").get<double>();
                maybe(b, "angle_min_deg", bundle.angle_min_deg);
                maybe(b, "angle_max_deg", bundle.angle_max_deg);
            } else {
                throw FormatError("bundle type must be 'straight' or 'arc', got '" + type + "'");
            }
            maybe(b, "half_width", bundle.half_width);
            maybe(b, "weight", bundle.weight);
            spec.bundles.push_back(bundle);
        }

        for (const auto& p : j.value("pairs", json::array())) {
            RegionPair pair;
            for (const auto& v : p.at("seeds")) {
                pair.seeds.push_back({v[0].get<int>(), v[1].get<int>(), v[2].get<int>()});
            }
            for (const auto& v : p.at("targets")) {
                pair.targets.push_back({v[0].get<int>(), v[1].get<int>(), v[2].get<int>()});
            }
            spec.pairs.push_back(std::move(pair));
        }
        return spec;
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

TrainFileConfig load_train_config(const std::string& path) {
    const json j = parse_file(path);
    try {
        TrainFileConfig config;
        const auto& table = j.at("table");
        config.bvec_path = table.at("bvec").get<std::string>();
        config.bval_path = table.at("bval").get<std::string>();
        maybe(j, "grid", config.grid_size);

        if (auto it = j.find("train"); it != j.end()) {
            const auto& t = *it;
            maybe(t, "sample_count", config.train.sample_count);
            maybe(t, "directions_per_voxel", config.train.directions_per_voxel);
            maybe(t, "batch_size", config.train.batch_size);
            maybe(t, "epochs", config.train.epochs);
            maybe(t, "learning_rate", config.train.learning_rate);
            maybe(t, "rng_seed", config.train.rng_seed);
            maybe(t, "feature_n", config.train.feature_n);
            maybe(t, "feature_epsilon", config.train.feature_epsilon);
            maybe(t, "noise", config.train.noise);
            maybe(t, "threads", config.train.threads);
        }
        if (auto it = j.find("sampler"); it != j.end()) {
            const auto& s = *it;
            auto& sampler = config.train.sampler;
            maybe(s, "min_count", sampler.min_count);
            maybe(s, "max_count", sampler.max_count);
            maybe(s, "min_crossing_angle_deg", sampler.min_crossing_angle_deg);
            maybe(s, "min_fraction", sampler.min_fraction);
            maybe(s, "lambda_par_min", sampler.lambda_par_min);
            maybe(s, "lambda_par_max", sampler.lambda_par_max);
            maybe(s, "lambda_perp_min", sampler.lambda_perp_min);
            maybe(s, "lambda_perp_max", sampler.lambda_perp_max);
            maybe(s, "lambda_iso_min", sampler.lambda_iso_min);
            maybe(s, "lambda_iso_max", sampler.lambda_iso_max);
            maybe(s, "f_iso_min", sampler.f_iso_min);
            maybe(s, "f_iso_max", sampler.f_iso_max);
            maybe(s, "snr_min", sampler.snr_min);
            maybe(s, "snr_max", sampler.snr_max);
        }
        return config;
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace flab
