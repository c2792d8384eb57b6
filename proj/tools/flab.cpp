// flab: estimate per-voxel fascicle counts and orientations from
// diffusion-weighted measurements, plus the simulation, training, and
// evaluation commands around that pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "flab/config.hpp"
#include "flab/errors.hpp"
#include "flab/io.hpp"
#include "flab/metrics.hpp"
#include "flab/mlp.hpp"
#include "flab/parallel.hpp"
#include "flab/pipeline.hpp"
#include "flab/postprocess.hpp"
#include "flab/signal.hpp"
#include "flab/sphere.hpp"
#include "flab/tracking.hpp"

namespace fs = std::filesystem;
using namespace flab;

namespace {

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

GradientTable load_table(const std::string& bvec, const std::string& bval) {
    std::vector<std::string> warnings;
    GradientTable table = read_gradient_table(bvec, bval, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return table;
}

PhantomSpec resolve_spec(const std::string& name_or_path) {
    if (name_or_path == "grid15" || name_or_path == "bundles20") {
        return builtin_phantom_spec(name_or_path);
    }
    return load_phantom_spec(name_or_path);
}

struct SimulateArgs {
    std::string spec, bvec, bval, out;
    double noise_snr = 0.0;
    std::uint64_t seed = 0;
    int threads = default_threads();
};

void run_simulate(const SimulateArgs& args) {
    const PhantomSpec spec = resolve_spec(args.spec);
    const GradientTable table = load_table(args.bvec, args.bval);
    const NoiseSpec noise = args.noise_snr > 0.0 ? NoiseSpec::rician(args.noise_snr)
                                                 : NoiseSpec::none();
    const Phantom phantom = build_phantom(spec, table, noise, args.seed, args.threads);

    fs::create_directories(args.out);
    VolumeFile volume;
    volume.nx = phantom.nx;
    volume.ny = phantom.ny;
    volume.nz = phantom.nz;
    volume.m = table.count();
    volume.kind = "dwi";
    volume.units = "normalized";
    volume.data.assign(phantom.signals.begin(), phantom.signals.end());
    write_volume((fs::path(args.out) / "dwi.vol").string(), volume);
    write_truth((fs::path(args.out) / "truth.txt").string(), phantom.nx, phantom.ny, phantom.nz,
                phantom.voxels);
    if (!phantom.pairs.empty()) {
        write_regions((fs::path(args.out) / "seeds.txt").string(), phantom.pairs, false);
        write_regions((fs::path(args.out) / "targets.txt").string(), phantom.pairs, true);
    }
    std::cerr << "simulated " << phantom.voxel_count() << " voxels x " << table.count()
              << " measurements -> " << args.out << "\n";
}

struct TrainArgs {
    std::string config, out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

void run_train(const TrainArgs& args) {
    TrainFileConfig config = load_train_config(args.config);
    if (args.seed_set) config.train.rng_seed = args.seed;
    if (args.threads > 0) config.train.threads = args.threads;

    const GradientTable table = load_table(config.bvec_path, config.bval_path);
    const SphereGrid grid = build_grid(config.grid_size);

    std::cerr << "generating " << config.train.sample_count << " voxels x "
              << config.train.directions_per_voxel << " directions\n";
    const Dataset dataset = generate_dataset(config.train, grid, table);

    std::cerr << "training on " << dataset.size() << " samples for " << config.train.epochs
              << " epochs\n";
    TrainStats stats;
    const MlpModel model = train(dataset, config.train, &stats);
    for (std::size_t e = 0; e < stats.epoch_loss.size(); ++e) {
        std::cerr << "epoch " << e << ": mse " << stats.epoch_loss[e] << "\n";
    }
    save_model(model, args.out);
    std::cerr << "model written to " << args.out << "\n";
}

struct PredictArgs {
    std::string model, dwi, bvec, bval, out;
    int grid_size = 724;
    double threshold_deg = 30.0;
    double fodf_p = 2.0;
    int max_count = 0;
    bool want_fodf = false;
    std::uint64_t seed = 0;
    int threads = default_threads();
};

VolumeFile load_dwi_checked(const std::string& path, const GradientTable& table) {
    VolumeFile volume = read_volume(path);
    if (volume.m != table.count()) {
        throw std::invalid_argument("volume has " + std::to_string(volume.m) +
                                    " measurements per voxel but the gradient table has " +
                                    std::to_string(table.count()) + " entries");
    }
    return volume;
}

void run_predict(const PredictArgs& args) {
    const MlpModel model = load_model(args.model);
    const GradientTable table = load_table(args.bvec, args.bval);
    const VolumeFile volume = load_dwi_checked(args.dwi, table);
    const SphereGrid grid = build_grid(args.grid_size);

    const std::vector<double> signals(volume.data.begin(), volume.data.end());
    PipelineOptions options;
    options.threshold_deg = args.threshold_deg;
    options.fodf_p = args.fodf_p;
    options.max_count = args.max_count;
    options.threads = args.threads;
    options.want_fodf = args.want_fodf;
    const VolumeResult result = predict_volume(model, signals, volume.nx, volume.ny, volume.nz,
                                               table, grid, options);

    fs::create_directories(args.out);
    write_predictions((fs::path(args.out) / "pred.txt").string(), result.predictions);
    if (args.want_fodf) {
        VolumeFile fodf;
        fodf.nx = volume.nx;
        fodf.ny = volume.ny;
        fodf.nz = volume.nz;
        fodf.m = grid.size();
        fodf.kind = "fodf";
        fodf.units = "amplitude";
        fodf.data.assign(result.fodf.begin(), result.fodf.end());
        write_volume((fs::path(args.out) / "fodf.vol").string(), fodf);
    }
    std::cerr << "predictions written to " << args.out << "\n";
}

struct EvaluateArgs {
    std::string pred, truth, out;
    std::uint64_t seed = 0;
};

void run_evaluate(const EvaluateArgs& args) {
    const PredictionVolume pred = read_predictions(args.pred);
    const TruthFile truth = read_truth(args.truth);
    if (pred.voxel_count() != static_cast<int>(truth.voxels.size())) {
        throw std::invalid_argument("prediction volume has " + std::to_string(pred.voxel_count()) +
                                    " voxels but the truth file has " +
                                    std::to_string(truth.voxels.size()));
    }

    std::vector<int> true_counts, predicted_counts;
    for (std::size_t v = 0; v < truth.voxels.size(); ++v) {
        true_counts.push_back(truth.voxels[v].count());
        predicted_counts.push_back(pred.voxels[v].count());
    }
    const CountConfusion confusion = count_metrics(true_counts, predicted_counts);

    double waae_sum[4] = {};
    long waae_n[4] = {};
    for (std::size_t v = 0; v < truth.voxels.size(); ++v) {
        const int k = truth.voxels[v].count();
        if (k < 1 || k > 3) continue;
        std::vector<TrueFascicle> fascicles;
        for (const auto& f : truth.voxels[v].fascicles) {
            fascicles.push_back({f.orientation, f.fraction});
        }
        waae_sum[k] += waae_deg(fascicles, pred.voxels[v].orientations);
        ++waae_n[k];
    }

    std::ostringstream txt, kv;
    txt << "fascicle count detection (one-vs-rest)\n";
    txt << "class  accuracy  sensitivity  specificity\n";
    for (int k = 1; k <= 3; ++k) {
        const auto& r = confusion.per_class[k - 1];
        txt << k << "      " << fmt("%.6f", r.accuracy) << "  " << fmt("%.6f", r.sensitivity)
            << "     " << fmt("%.6f", r.specificity) << "\n";
        kv << "count.k" << k << ".accuracy = " << fmt("%.6f", r.accuracy) << "\n";
        kv << "count.k" << k << ".sensitivity = " << fmt("%.6f", r.sensitivity) << "\n";
        kv << "count.k" << k << ".specificity = " << fmt("%.6f", r.specificity) << "\n";
    }
    txt << "\nconfusion matrix (rows: true count, cols: predicted count)\n";
    for (std::size_t t = 0; t < confusion.matrix.size(); ++t) {
        txt << t << ":";
        for (long c : confusion.matrix[t]) txt << ' ' << c;
        txt << "\n";
    }
    txt << "\norientation error (weighted average angular error, degrees)\n";
    txt << "class  mean      voxels\n";
    for (int k = 1; k <= 3; ++k) {
        const double mean = waae_n[k] ? waae_sum[k] / waae_n[k] : 0.0;
        txt << k << "      " << fmt("%.6f", mean) << "  " << waae_n[k] << "\n";
        kv << "waae.k" << k << ".mean_deg = " << fmt("%.6f", mean) << "\n";
        kv << "waae.k" << k << ".voxels = " << waae_n[k] << "\n";
    }

    write_text_file(args.out + ".txt", txt.str());
    write_text_file(args.out + ".kv", kv.str());
    std::cerr << "report written to " << args.out << ".txt\n";
}

struct DownsampleArgs {
    std::string model, dwi, bvec, bval, out, fractions = "0.25,0.5";
    int trials = 10;
    std::uint64_t seed = 0;
    double threshold_deg = 30.0;
    int max_count = 0;
    int threads = default_threads();
};

void run_downsample(const DownsampleArgs& args) {
    const MlpModel model = load_model(args.model);
    const GradientTable table = load_table(args.bvec, args.bval);
    const VolumeFile volume = load_dwi_checked(args.dwi, table);
    const SphereGrid grid = build_grid(724);

    std::vector<double> fractions;
    std::stringstream ss(args.fractions);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) fractions.push_back(std::stod(token));
    }
    if (fractions.empty()) throw std::invalid_argument("no down-sampling fractions given");

    const std::vector<double> signals(volume.data.begin(), volume.data.end());
    DownsampleOptions options;
    options.threshold_deg = args.threshold_deg;
    options.max_count = args.max_count;
    options.threads = args.threads;
    const DownsampleReport report = downsample_experiment(
        signals, volume.nx * volume.ny * volume.nz, table, model, grid, fractions, args.trials,
        args.seed, options);

    std::ostringstream txt, kv;
    txt << "dominant-peak deviation under measurement down-sampling (degrees)\n";
    txt << "fraction  mean      std       max       samples\n";
    for (const auto& row : report.rows) {
        txt << fmt("%.2f", row.fraction) << "      " << fmt("%.6f", row.mean) << "  "
            << fmt("%.6f", row.stddev) << "  " << fmt("%.6f", row.max) << "  " << row.samples
            << "\n";
        const std::string prefix = "downsample." + fmt("%.2f", row.fraction);
        kv << prefix << ".mean_deg = " << fmt("%.6f", row.mean) << "\n";
        kv << prefix << ".std_deg = " << fmt("%.6f", row.stddev) << "\n";
        kv << prefix << ".max_deg = " << fmt("%.6f", row.max) << "\n";
        kv << prefix << ".samples = " << row.samples << "\n";
    }
    write_text_file(args.out + ".txt", txt.str());
    write_text_file(args.out + ".kv", kv.str());
    std::cerr << "report written to " << args.out << ".txt\n";
}

struct TrackArgs {
    std::string pred, seeds, targets, out;
    double step = 0.5;
    double max_angle_deg = 45.0;
    int max_steps = 1000;
    std::uint64_t seed = 0;
};

void run_track(const TrackArgs& args) {
    const PredictionVolume volume = read_predictions(args.pred);
    const auto seed_groups = read_regions(args.seeds);
    const auto target_groups = read_regions(args.targets);
    if (seed_groups.size() != target_groups.size()) {
        throw std::invalid_argument("seed file has " + std::to_string(seed_groups.size()) +
                                    " pairs but target file has " +
                                    std::to_string(target_groups.size()));
    }

    TrackParams params;
    params.step = args.step;
    params.max_angle_deg = args.max_angle_deg;
    params.max_steps = args.max_steps;

    std::vector<Streamline> all;
    std::vector<std::vector<Streamline>> per_pair;
    for (const auto& seeds : seed_groups) {
        auto lines = track(seeds, volume, params);
        all.insert(all.end(), lines.begin(), lines.end());
        per_pair.push_back(std::move(lines));
    }
    const SuccessReport report = success_ratio(per_pair, target_groups);

    write_streamlines(args.out, all);
    std::ostringstream txt, kv;
    txt << "tractography success ratio (endpoint within 2 voxels of a target)\n";
    for (std::size_t p = 0; p < report.per_pair.size(); ++p) {
        txt << "pair " << p << ": " << fmt("%.6f", report.per_pair[p]) << "\n";
        kv << "success.pair" << p << " = " << fmt("%.6f", report.per_pair[p]) << "\n";
    }
    txt << "mean: " << fmt("%.6f", report.mean) << "\n";
    kv << "success.mean = " << fmt("%.6f", report.mean) << "\n";
    write_text_file(args.out + ".success.txt", txt.str());
    write_text_file(args.out + ".success.kv", kv.str());
    std::cerr << "streamlines written to " << args.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fascicle count and orientation estimation from diffusion MRI"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "generate a digital phantom volume");
    simulate->add_option("--spec", sim.spec, "builtin name (grid15, bundles20) or JSON file")
        ->required();
    simulate->add_option("--bvec", sim.bvec)->required();
    simulate->add_option("--bval", sim.bval)->required();
    simulate->add_option("--noise-snr", sim.noise_snr, "Rician SNR; 0 disables noise");
    simulate->add_option("--seed", sim.seed);
    simulate->add_option("--threads", sim.threads);
    simulate->add_option("--out", sim.out, "output directory")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train a regressor on simulated voxels");
    train_cmd->add_option("--config", tr.config, "JSON training configuration")->required();
    auto* train_seed = train_cmd->add_option("--seed", tr.seed, "overrides the config seed");
    train_cmd->add_option("--threads", tr.threads);
    train_cmd->add_option("--out", tr.out, "model file")->required();

    PredictArgs pr;
    auto* predict = app.add_subcommand("predict", "estimate fascicles for every voxel");
    predict->add_option("--model", pr.model)->required();
    predict->add_option("--dwi", pr.dwi)->required();
    predict->add_option("--bvec", pr.bvec)->required();
    predict->add_option("--bval", pr.bval)->required();
    predict->add_option("--grid", pr.grid_size, "sphere grid size");
    predict->add_option("--threshold", pr.threshold_deg, "candidate threshold, degrees");
    predict->add_option("--fodf-p", pr.fodf_p);
    predict->add_option("--max-count", pr.max_count, "cap on fascicles per voxel; 0 = uncapped");
    predict->add_flag("--fodf", pr.want_fodf, "also write the fODF volume");
    predict->add_option("--seed", pr.seed);
    predict->add_option("--threads", pr.threads);
    predict->add_option("--out", pr.out, "output directory")->required();

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
    evaluate->add_option("--pred", ev.pred)->required();
    evaluate->add_option("--truth", ev.truth)->required();
    evaluate->add_option("--seed", ev.seed);
    evaluate->add_option("--out", ev.out, "report path prefix")->required();

    DownsampleArgs ds;
    auto* downsample = app.add_subcommand("downsample", "dominant-peak robustness experiment");
    downsample->add_option("--model", ds.model)->required();
    downsample->add_option("--dwi", ds.dwi)->required();
    downsample->add_option("--bvec", ds.bvec)->required();
    downsample->add_option("--bval", ds.bval)->required();
    downsample->add_option("--fractions", ds.fractions, "comma-separated removal fractions");
    downsample->add_option("--trials", ds.trials);
    downsample->add_option("--threshold", ds.threshold_deg);
    downsample->add_option("--max-count", ds.max_count);
    downsample->add_option("--seed", ds.seed);
    downsample->add_option("--threads", ds.threads);
    downsample->add_option("--out", ds.out, "report path prefix")->required();

    TrackArgs tk;
    auto* track_cmd = app.add_subcommand("track", "deterministic streamline tractography");
    track_cmd->add_option("--pred", tk.pred)->required();
    track_cmd->add_option("--seeds", tk.seeds)->required();
    track_cmd->add_option("--targets", tk.targets)->required();
    track_cmd->add_option("--step", tk.step, "step size, voxels");
    track_cmd->add_option("--max-angle", tk.max_angle_deg, "turning limit, degrees");
    track_cmd->add_option("--max-steps", tk.max_steps);
    track_cmd->add_option("--seed", tk.seed);
    track_cmd->add_option("--out", tk.out, "streamline file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    tr.seed_set = train_seed->count() > 0;

    try {
        if (app.got_subcommand(simulate)) run_simulate(sim);
        else if (app.got_subcommand(train_cmd)) run_train(tr);
        else if (app.got_subcommand(predict)) run_predict(pr);
        else if (app.got_subcommand(evaluate)) run_evaluate(ev);
        else if (app.got_subcommand(downsample)) run_downsample(ds);
        else if (app.got_subcommand(track_cmd)) run_track(tk);
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
