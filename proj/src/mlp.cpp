#include "flab/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "flab/errors.hpp"
#include "flab/parallel.hpp"
#include "flab/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "model serialization assumes a little-endian host");

namespace flab {

void MlpModel::validate() const {
    if (layer_sizes.size() != kHiddenSizes.size() + 2) {
        throw FormatError("mlp: expected " + std::to_string(kHiddenSizes.size() + 2) +
                          " layer sizes, got " + std::to_string(layer_sizes.size()));
    }
    for (std::size_t i = 0; i < kHiddenSizes.size(); ++i) {
        if (layer_sizes[i + 1] != kHiddenSizes[i]) {
            throw FormatError("mlp: hidden layer sizes must be {30,60,80,80,60,30}");
        }
    }
    if (layer_sizes.back() != 1) throw FormatError("mlp: output layer must have size 1");
    if (layer_sizes.front() < 1) throw FormatError("mlp: input layer must be non-empty");
    const std::size_t n_layers = layer_sizes.size() - 1;
    if (weights.size() != n_layers || biases.size() != n_layers) {
        throw FormatError("mlp: weight/bias count does not match layer count");
    }
    for (std::size_t l = 0; l < n_layers; ++l) {
        if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
            biases[l].size() != layer_sizes[l + 1]) {
            throw FormatError("mlp: weight shapes do not chain between layers");
        }
    }
}

std::uint64_t TrainConfig::digest() const {
    std::ostringstream os;
    os.precision(17);
    os << sample_count << '|' << directions_per_voxel << '|' << batch_size << '|' << epochs << '|'
       << learning_rate << '|' << lr_decay << '|' << rng_seed << '|' << feature_n << '|'
       << feature_epsilon << '|'
       << noise << '|' << isotropic_fraction << '|' << sampler.min_count << '|'
       << sampler.max_count << '|'
       << sampler.min_crossing_angle_deg << '|' << sampler.min_fraction << '|'
       << sampler.lambda_par_min << '|' << sampler.lambda_par_max << '|' << sampler.lambda_perp_min
       << '|' << sampler.lambda_perp_max << '|' << sampler.lambda_iso_min << '|'
       << sampler.lambda_iso_max << '|' << sampler.f_iso_min << '|' << sampler.f_iso_max << '|'
       << sampler.snr_min << '|' << sampler.snr_max;
    auto s = os.str();
    return fnv1a64(s.data(), s.size());
}

Dataset generate_dataset(const TrainConfig& config, const SphereGrid& grid,
                         const GradientTable& table) {
    if (config.sample_count < 1 || config.directions_per_voxel < 1) {
        throw std::invalid_argument("generate_dataset: counts must be positive");
    }
    if (config.directions_per_voxel > grid.size()) {
        throw std::invalid_argument("generate_dataset: directions_per_voxel exceeds grid size");
    }
    table.validate();

    const int dpv = config.directions_per_voxel;
    const Eigen::Index total = static_cast<Eigen::Index>(config.sample_count) * dpv;
    Dataset ds;
    ds.features.resize(total, config.feature_n + 1);
    ds.targets.resize(total);

    parallel_for(config.sample_count, config.threads, [&](std::size_t v) {
        // Per-voxel stream, decorrelated from the voxel-model draw.
        const std::uint64_t voxel_seed = splitmix64(config.rng_seed + 0x51ed270b0f4d2d9cull) ^
                                         splitmix64(static_cast<std::uint64_t>(v));
        Rng rng(splitmix64(voxel_seed));

        VoxelModel model;
        if (rng.uniform() < config.isotropic_fraction) {
            model.f_iso = 1.0;
            model.lambda_iso =
                rng.uniform(config.sampler.lambda_iso_min, config.sampler.lambda_iso_max);
        } else {
            model = sample_training_voxel(config.sampler, voxel_seed);
        }

        NoiseSpec noise = NoiseSpec::none();
        if (config.noise) {
            noise = NoiseSpec::rician(rng.uniform(config.sampler.snr_min, config.sampler.snr_max));
        }
        auto signals = simulate_signal(model, table, noise, rng.next());

        for (int d = 0; d < dpv; ++d) {
            const Vec3& u = grid.directions[rng.uniform_index(grid.size())];
            auto fv = compute_feature(u, signals, table, config.feature_n, config.feature_epsilon);
            double target = kPi / 2.0;  // no fascicle anywhere
            for (const auto& f : model.fascicles) {
                target = std::min(target, antipodal_angle_rad(u, f.orientation));
            }
            const Eigen::Index row = static_cast<Eigen::Index>(v) * dpv + d;
            for (int j = 0; j <= config.feature_n; ++j) ds.features(row, j) = fv.values[j];
            ds.targets[row] = target;
        }
    });
    return ds;
}

namespace detail {

namespace {

// Forward pass keeping pre-activations; activations[0] is the input batch.
struct ForwardPass {
    std::vector<Eigen::MatrixXd> activations;
    Eigen::VectorXd predictions;
};

ForwardPass forward(const MlpModel& model, const Eigen::MatrixXd& batch) {
    const std::size_t n_layers = model.weights.size();
    ForwardPass fp;
    fp.activations.resize(n_layers + 1);
    fp.activations[0] = batch;
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd z = fp.activations[l] * model.weights[l].transpose();
        z.rowwise() += model.biases[l].transpose();
        if (l + 1 < n_layers) z = z.cwiseMax(0.0);
        fp.activations[l + 1] = std::move(z);
    }
    fp.predictions = fp.activations.back().col(0);
    return fp;
}

}  // namespace

Gradients loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& batch_features,
                             const Eigen::VectorXd& batch_targets) {
    const std::size_t n_layers = model.weights.size();
    const double inv_batch = 1.0 / static_cast<double>(batch_features.rows());

    ForwardPass fp = forward(model, batch_features);
    Eigen::VectorXd residual = fp.predictions - batch_targets;

    Gradients g;
    g.loss = residual.squaredNorm() * inv_batch;
    g.dw.resize(n_layers);
    g.db.resize(n_layers);

    Eigen::MatrixXd delta = (2.0 * inv_batch) * residual;
    for (std::size_t l = n_layers; l-- > 0;) {
        g.dw[l] = delta.transpose() * fp.activations[l];
        g.db[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = (delta * model.weights[l])
                        .cwiseProduct((fp.activations[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return g;
}

double batch_loss(const MlpModel& model, const Eigen::MatrixXd& batch_features,
                  const Eigen::VectorXd& batch_targets) {
    ForwardPass fp = forward(model, batch_features);
    return (fp.predictions - batch_targets).squaredNorm() /
           static_cast<double>(batch_features.rows());
}

}  // namespace detail

MlpModel train(const Dataset& dataset, const TrainConfig& config, TrainStats* stats) {
    if (dataset.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (config.batch_size < 1 || config.epochs < 1 || !(config.learning_rate > 0.0)) {
        throw std::invalid_argument("train: bad optimizer settings");
    }

    MlpModel model;
    model.feature_n = config.feature_n;
    model.feature_epsilon = config.feature_epsilon;
    model.config_digest = config.digest();
    model.layer_sizes.push_back(static_cast<int>(dataset.features.cols()));
    model.layer_sizes.insert(model.layer_sizes.end(), kHiddenSizes.begin(), kHiddenSizes.end());
    model.layer_sizes.push_back(1);

    Rng rng(splitmix64(config.rng_seed ^ 0xa11ce5f0d1ull));
    const std::size_t n_layers = model.layer_sizes.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const int in = model.layer_sizes[l];
        const int out = model.layer_sizes[l + 1];
        Eigen::MatrixXd w(out, in);
        const double scale = std::sqrt(2.0 / in);  // fan-in scaling
        for (int r = 0; r < out; ++r) {
            for (int c = 0; c < in; ++c) w(r, c) = scale * rng.normal();
        }
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(Eigen::VectorXd::Zero(out));
    }
    model.validate();

    // Adam state
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    for (std::size_t l = 0; l < n_layers; ++l) {
        mw.emplace_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
        vw.emplace_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
        mb.emplace_back(Eigen::VectorXd::Zero(model.biases[l].size()));
        vb.emplace_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double beta1_t = 1.0, beta2_t = 1.0;

    const Eigen::Index n_samples = dataset.size();
    std::vector<Eigen::Index> perm(n_samples);
    for (Eigen::Index i = 0; i < n_samples; ++i) perm[i] = i;

    Eigen::MatrixXd batch_x;
    Eigen::VectorXd batch_y;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double lr = config.learning_rate;
        if (epoch >= (config.epochs * 85) / 100) lr *= config.lr_decay * config.lr_decay;
        else if (epoch >= (config.epochs * 60) / 100) lr *= config.lr_decay;

        // Fisher-Yates with the training stream
        for (Eigen::Index i = n_samples - 1; i > 0; --i) {
            std::swap(perm[i], perm[rng.uniform_index(static_cast<std::size_t>(i) + 1)]);
        }
        double loss_sum = 0.0;
        for (Eigen::Index start = 0; start < n_samples; start += config.batch_size) {
            const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n_samples - start);
            batch_x.resize(b, dataset.features.cols());
            batch_y.resize(b);
            for (Eigen::Index i = 0; i < b; ++i) {
                batch_x.row(i) = dataset.features.row(perm[start + i]);
                batch_y[i] = dataset.targets[perm[start + i]];
            }

            auto g = detail::loss_and_gradients(model, batch_x, batch_y);
            if (!std::isfinite(g.loss)) {
                throw NumericalError("train: loss diverged at epoch " + std::to_string(epoch));
            }
            loss_sum += g.loss * static_cast<double>(b);

            beta1_t *= beta1;
            beta2_t *= beta2;
            const double step = lr * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
            for (std::size_t l = 0; l < n_layers; ++l) {
                mw[l] = beta1 * mw[l] + (1.0 - beta1) * g.dw[l];
                vw[l] = beta2 * vw[l] + (1.0 - beta2) * g.dw[l].cwiseProduct(g.dw[l]);
                model.weights[l].array() -= step * mw[l].array() / (vw[l].array().sqrt() + adam_eps);
                mb[l] = beta1 * mb[l] + (1.0 - beta1) * g.db[l];
                vb[l] = beta2 * vb[l] + (1.0 - beta2) * g.db[l].cwiseProduct(g.db[l]);
                model.biases[l].array() -= step * mb[l].array() / (vb[l].array().sqrt() + adam_eps);
            }
        }
        if (stats) stats->epoch_loss.push_back(loss_sum / static_cast<double>(n_samples));
    }
    return model;
}

namespace {

double clamp_angle(double v) { return std::clamp(v, 0.0, kPi / 2.0); }

}  // namespace

double predict_angle(const MlpModel& model, std::span<const double> feature_values) {
    if (feature_values.size() != static_cast<std::size_t>(model.input_size())) {
        throw std::invalid_argument("predict_angle: feature length " +
                                    std::to_string(feature_values.size()) +
                                    " does not match model input " +
                                    std::to_string(model.input_size()));
    }
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(feature_values.data(),
                                                          feature_values.size());
    const std::size_t n_layers = model.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::VectorXd z = model.weights[l] * a + model.biases[l];
        if (l + 1 < n_layers) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return clamp_angle(a[0]);
}

double predict_angle(const MlpModel& model, const FeatureVector& feature) {
    return predict_angle(model, std::span<const double>(feature.values));
}

Eigen::VectorXd predict_batch(const MlpModel& model, const Eigen::MatrixXd& features) {
    if (features.cols() != model.input_size()) {
        throw std::invalid_argument("predict_batch: feature width does not match model input");
    }
    Eigen::MatrixXd a = features;
    const std::size_t n_layers = model.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd z = a * model.weights[l].transpose();
        z.rowwise() += model.biases[l].transpose();
        if (l + 1 < n_layers) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a.col(0).cwiseMax(0.0).cwiseMin(kPi / 2.0);
}

namespace {

constexpr const char* kModelMagic = "FLAB-MLP1";

void write_doubles(std::ofstream& os, const double* data, std::size_t count) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

}  // namespace

void save_model(const MlpModel& model, const std::string& path) {
    model.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("save_model: cannot open " + path);

    std::ostringstream header;
    header << kModelMagic << '\n';
    header << "layers:";
    for (int s : model.layer_sizes) header << ' ' << s;
    header << '\n';
    header.precision(17);
    header << "n: " << model.feature_n << '\n';
    header << "epsilon: " << model.feature_epsilon << '\n';
    header << "digest: " << std::hex << model.config_digest << std::dec << '\n';
    header << "end\n";
    os << header.str();

    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        // Eigen stores column-major; serialize row-major.
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = model.weights[l];
        write_doubles(os, w.data(), static_cast<std::size_t>(w.size()));
        write_doubles(os, model.biases[l].data(), static_cast<std::size_t>(model.biases[l].size()));
    }
    if (!os) throw FormatError("save_model: write failed for " + path);
}

MlpModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("load_model: cannot open " + path);

    std::string line;
    if (!std::getline(is, line) || line != kModelMagic) {
        throw FormatError("load_model: bad magic string in " + path);
    }

    MlpModel model;
    bool saw_end = false;
    while (std::getline(is, line)) {
        if (line == "end") {
            saw_end = true;
            break;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "layers:") {
            int v;
            while (ls >> v) model.layer_sizes.push_back(v);
        } else if (key == "n:") {
            ls >> model.feature_n;
        } else if (key == "epsilon:") {
            ls >> model.feature_epsilon;
        } else if (key == "digest:") {
            ls >> std::hex >> model.config_digest;
        } else {
            throw FormatError("load_model: unknown header field '" + key + "'");
        }
    }
    if (!saw_end) throw FormatError("load_model: truncated header in " + path);
    if (model.layer_sizes.size() != kHiddenSizes.size() + 2) {
        throw FormatError("load_model: header declares " + std::to_string(model.layer_sizes.size()) +
                          " layers; expected " + std::to_string(kHiddenSizes.size() + 2));
    }

    for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
        const int in = model.layer_sizes[l];
        const int out = model.layer_sizes[l + 1];
        if (in < 1 || out < 1) throw FormatError("load_model: non-positive layer size");
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(out, in);
        is.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * 8));
        Eigen::VectorXd b(out);
        is.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * 8));
        if (!is) throw FormatError("load_model: truncated weight payload in " + path);
        model.weights.emplace_back(w);
        model.biases.emplace_back(std::move(b));
    }
    char extra;
    if (is.read(&extra, 1)) throw FormatError("load_model: trailing bytes after weights in " + path);
    model.validate();
    return model;
}

std::uint64_t weight_digest(const MlpModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = model.weights[l];
        h = fnv1a64(w.data(), static_cast<std::size_t>(w.size()) * 8, h);
        h = fnv1a64(model.biases[l].data(), static_cast<std::size_t>(model.biases[l].size()) * 8, h);
    }
    return h;
}

}  // namespace flab
