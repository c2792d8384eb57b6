#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flab/errors.hpp"
#include "flab/mlp.hpp"
#include "flab/rng.hpp"

using namespace flab;

namespace {

GradientTable grid_table(int n_dirs, double b) {
    const SphereGrid grid = build_grid(n_dirs);
    GradientTable table;
    for (const auto& d : grid.directions) {
        table.directions.push_back(d);
        table.bvalues.push_back(b);
    }
    return table;
}

Dataset random_dataset(int samples, int width, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    ds.features.resize(samples, width);
    ds.targets.resize(samples);
    for (int i = 0; i < samples; ++i) {
        for (int j = 0; j < width; ++j) ds.features(i, j) = rng.uniform();
        ds.targets[i] = rng.uniform(0.0, kPi / 2.0);
    }
    return ds;
}

MlpModel random_model(int input, std::uint64_t seed) {
    TrainConfig config;
    config.epochs = 1;
    config.batch_size = 4;
    config.rng_seed = seed;
    // one throwaway step initializes a deterministic random model
    Dataset ds = random_dataset(4, input, seed);
    config.learning_rate = 1e-12;
    return train(ds, config);
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("dataset targets follow the closest-fascicle angle") {
    const SphereGrid grid = build_grid(724);
    auto table = grid_table(64, 2000.0);

    VoxelModel single;
    single.f_iso = 0.0;
    single.fascicles.push_back({1.0, 0.002, 0.0004, {0, 0, 1}});
    auto signals = simulate_signal(single, table, NoiseSpec::none(), 0);
    auto fv = compute_feature({0, 0, 1}, signals, table);
    // probe on the fascicle: target 0
    double target = kPi / 2.0;
    for (const auto& f : single.fascicles) {
        target = std::min(target, antipodal_angle_rad({0, 0, 1}, f.orientation));
    }
    CHECK(target == 0.0);

    // two fascicles: the nearer one wins
    const double a = deg2rad(20.0);
    const Vec3 probe{std::sin(a), 0.0, std::cos(a)};
    double t2 = std::min(antipodal_angle_rad(probe, {0, 0, 1}),
                         antipodal_angle_rad(probe, {1, 0, 0}));
    CHECK(t2 == doctest::Approx(deg2rad(20.0)).epsilon(1e-12));
}

TEST_CASE("dataset size is sample_count x directions_per_voxel") {
    const SphereGrid grid = build_grid(100);
    auto table = grid_table(32, 1500.0);
    TrainConfig config;
    config.sample_count = 1000;
    config.directions_per_voxel = 32;
    config.rng_seed = 3;
    Dataset ds = generate_dataset(config, grid, table);
    CHECK(ds.size() == 32000);
    CHECK(ds.features.cols() == 16);
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        CHECK(ds.targets[i] >= 0.0);
        CHECK(ds.targets[i] <= kPi / 2.0);
    }
}

TEST_CASE("dataset generation is deterministic and thread-count independent") {
    const SphereGrid grid = build_grid(64);
    auto table = grid_table(32, 1500.0);
    TrainConfig config;
    config.sample_count = 50;
    config.directions_per_voxel = 4;
    config.rng_seed = 11;
    Dataset a = generate_dataset(config, grid, table);
    config.threads = 4;
    Dataset b = generate_dataset(config, grid, table);
    CHECK(a.features == b.features);
    CHECK(a.targets == b.targets);
}

TEST_CASE("overfitting a 10-sample dataset") {
    Dataset ds = random_dataset(10, 16, 5);
    TrainConfig config;
    config.batch_size = 10;
    config.epochs = 1500;
    config.learning_rate = 3e-3;
    config.rng_seed = 7;
    TrainStats stats;
    MlpModel model = train(ds, config, &stats);
    CHECK(stats.epoch_loss.back() < 1e-3);
}

TEST_CASE("training is bit-reproducible for equal seeds") {
    Dataset ds = random_dataset(256, 16, 9);
    TrainConfig config;
    config.epochs = 3;
    config.batch_size = 64;
    config.rng_seed = 101;
    MlpModel a = train(ds, config);
    MlpModel b = train(ds, config);
    CHECK(weight_digest(a) == weight_digest(b));

    config.rng_seed = 102;
    MlpModel c = train(ds, config);
    CHECK(weight_digest(a) != weight_digest(c));
}

TEST_CASE("training loss is non-increasing on a noiseless dataset") {
    const SphereGrid grid = build_grid(100);
    auto table = grid_table(64, 2000.0);
    TrainConfig config;
    config.sample_count = 125;
    config.directions_per_voxel = 8;  // 1000 samples
    config.noise = false;
    config.epochs = 15;
    config.batch_size = 128;
    config.rng_seed = 21;
    Dataset ds = generate_dataset(config, grid, table);
    REQUIRE(ds.size() == 1000);

    TrainStats stats;
    train(ds, config, &stats);
    REQUIRE(stats.epoch_loss.size() == 15);
    for (std::size_t e = 1; e < stats.epoch_loss.size(); ++e) {
        CHECK(stats.epoch_loss[e] <= stats.epoch_loss[e - 1] * 1.05);
    }
}

TEST_CASE("gradients match central finite differences") {
    Dataset ds = random_dataset(32, 16, 13);
    MlpModel model = random_model(16, 31);

    auto g = detail::loss_and_gradients(model, ds.features, ds.targets);
    REQUIRE(g.dw.size() == 7);

    Rng rng(55);
    const double h = 1e-5;
    for (std::size_t l = 0; l < g.dw.size(); ++l) {
        for (int pick = 0; pick < 10; ++pick) {
            const int r = static_cast<int>(rng.uniform_index(model.weights[l].rows()));
            const int c = static_cast<int>(rng.uniform_index(model.weights[l].cols()));
            MlpModel plus = model, minus = model;
            plus.weights[l](r, c) += h;
            minus.weights[l](r, c) -= h;
            const double numeric = (detail::batch_loss(plus, ds.features, ds.targets) -
                                    detail::batch_loss(minus, ds.features, ds.targets)) /
                                   (2.0 * h);
            const double analytic = g.dw[l](r, c);
            const double rel = std::abs(numeric - analytic) /
                               std::max(1e-8, std::abs(numeric) + std::abs(analytic));
            CHECK(rel <= 1e-4);
        }
        // bias coordinates as well
        for (int pick = 0; pick < 3; ++pick) {
            const int r = static_cast<int>(rng.uniform_index(model.biases[l].size()));
            MlpModel plus = model, minus = model;
            plus.biases[l][r] += h;
            minus.biases[l][r] -= h;
            const double numeric = (detail::batch_loss(plus, ds.features, ds.targets) -
                                    detail::batch_loss(minus, ds.features, ds.targets)) /
                                   (2.0 * h);
            const double rel = std::abs(numeric - g.db[l][r]) /
                               std::max(1e-8, std::abs(numeric) + std::abs(g.db[l][r]));
            CHECK(rel <= 1e-4);
        }
    }
}

TEST_CASE("predictions are clamped and pure") {
    MlpModel model = random_model(16, 17);
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(16);
        for (auto& v : x) v = rng.uniform(-10.0, 10.0);
        const double p = predict_angle(model, x);
        CHECK(p >= 0.0);
        CHECK(p <= kPi / 2.0);
        CHECK(predict_angle(model, x) == p);
    }
}

TEST_CASE("zero-weight model predicts the clamped output bias") {
    MlpModel model = random_model(16, 23);
    for (auto& w : model.weights) w.setZero();
    for (auto& b : model.biases) b.setZero();
    model.biases.back()[0] = 0.3;
    std::vector<double> x(16, 0.7);
    CHECK(predict_angle(model, x) == doctest::Approx(0.3).epsilon(1e-15));

    model.biases.back()[0] = -2.0;
    CHECK(predict_angle(model, x) == 0.0);
    model.biases.back()[0] = 9.0;
    CHECK(predict_angle(model, x) == kPi / 2.0);
}

TEST_CASE("predict_angle validates feature length") {
    MlpModel model = random_model(16, 29);
    std::vector<double> x(15, 0.0);
    CHECK_THROWS_AS(predict_angle(model, x), std::invalid_argument);
}

TEST_CASE("save/load round-trips bit-exactly") {
    MlpModel model = random_model(16, 41);
    const auto path = temp_path("flab_test_model.flab");
    save_model(model, path);
    MlpModel loaded = load_model(path);

    CHECK(weight_digest(model) == weight_digest(loaded));
    CHECK(loaded.feature_n == model.feature_n);
    CHECK(loaded.feature_epsilon == model.feature_epsilon);
    CHECK(loaded.config_digest == model.config_digest);

    Rng rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(16);
        for (auto& v : x) v = rng.uniform(-2.0, 2.0);
        CHECK(predict_angle(model, x) == predict_angle(loaded, x));
    }
    std::filesystem::remove(path);
}

TEST_CASE("load rejects a bad magic string") {
    const auto path = temp_path("flab_bad_magic.flab");
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOT-A-MODEL\nend\n";
    }
    CHECK_THROWS_AS(load_model(path), FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("load rejects layer sizes that break the architecture") {
    MlpModel model = random_model(16, 43);
    const auto path = temp_path("flab_bad_layers.flab");
    save_model(model, path);

    // corrupt the declared hidden sizes in the header
    auto content = [&] {
        std::ifstream is(path, std::ios::binary);
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }();
    auto pos = content.find("30 60 80 80 60 30");
    REQUIRE(pos != std::string::npos);
    content.replace(pos, 2, "31");
    {
        std::ofstream os(path, std::ios::binary);
        os << content;
    }
    CHECK_THROWS_AS(load_model(path), FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("divergent training reports the epoch") {
    Dataset ds = random_dataset(64, 16, 3);
    ds.targets.array() += 1e7;  // huge targets blow up the quadratic loss
    TrainConfig config;
    config.epochs = 50;
    config.batch_size = 16;
    config.learning_rate = 1e150;
    CHECK_THROWS_AS(train(ds, config), NumericalError);
}

}  // TEST_SUITE
