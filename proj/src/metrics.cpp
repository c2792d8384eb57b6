#include "flab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "flab/errors.hpp"
#include "flab/parallel.hpp"
#include "flab/rng.hpp"

namespace flab {

namespace {

double rate(long num, long den) {
    if (den == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassRates CountConfusion::rates_from_matrix(int k) const {
    long tp = 0, fn = 0, fp = 0, tn = 0;
    const int n = static_cast<int>(matrix.size());
    for (int t = 0; t < n; ++t) {
        for (int p = 0; p < n; ++p) {
            const long c = matrix[t][p];
            if (t == k && p == k) tp += c;
            else if (t == k) fn += c;
            else if (p == k) fp += c;
            else tn += c;
        }
    }
    ClassRates r;
    r.sensitivity = rate(tp, tp + fn);
    r.specificity = rate(tn, tn + fp);
    r.accuracy = rate(tp + tn, tp + fn + fp + tn);
    return r;
}

CountConfusion count_metrics(std::span<const int> true_counts,
                             std::span<const int> predicted_counts) {
    if (true_counts.size() != predicted_counts.size()) {
        throw std::invalid_argument("count_metrics: " + std::to_string(true_counts.size()) +
                                    " true vs " + std::to_string(predicted_counts.size()) +
                                    " predicted counts");
    }
    int max_count = 3;
    for (std::size_t i = 0; i < true_counts.size(); ++i) {
        if (true_counts[i] < 0 || predicted_counts[i] < 0) {
            throw std::invalid_argument("count_metrics: negative count");
        }
        max_count = std::max({max_count, true_counts[i], predicted_counts[i]});
    }

    CountConfusion confusion;
    confusion.matrix.assign(max_count + 1, std::vector<long>(max_count + 1, 0));
    for (std::size_t i = 0; i < true_counts.size(); ++i) {
        ++confusion.matrix[true_counts[i]][predicted_counts[i]];
        ++confusion.total;
    }
    for (int k = 1; k <= 3; ++k) confusion.per_class[k - 1] = confusion.rates_from_matrix(k);
    return confusion;
}

double waae_deg(std::span<const TrueFascicle> truth, std::span<const Vec3> estimated) {
    if (truth.empty()) throw std::invalid_argument("waae: no true fascicles");
    double weight_total = 0.0;
    for (const auto& t : truth) {
        if (t.fraction < 0.0) throw std::invalid_argument("waae: negative fraction");
        weight_total += t.fraction;
    }
    if (weight_total <= 0.0) throw std::invalid_argument("waae: fractions sum to zero");

    double err = 0.0;
    for (const auto& t : truth) {
        double best = 90.0;
        for (const auto& e : estimated) {
            best = std::min(best, angle_between_deg(t.orientation, e, true));
        }
        err += (t.fraction / weight_total) * best;
    }
    return err;
}

int grade_sum(std::span<const int> grades) {
    if (grades.size() != 12) {
        throw std::invalid_argument("grade_sum: expected 12 grades, got " +
                                    std::to_string(grades.size()));
    }
    int sum = 0;
    for (int g : grades) {
        if (g < 1 || g > 3) {
            throw std::invalid_argument("grade_sum: grade " + std::to_string(g) +
                                        " outside {1,2,3}");
        }
        sum += g;
    }
    return sum;
}

namespace {

// Dominant orientation: the extracted peak whose raw minimum has the highest
// fODF amplitude. Returns false when the voxel has no peaks.
bool dominant_peak(const AngleField& smoothed, const SphereGrid& grid,
                   const DownsampleOptions& opt, Vec3* out) {
    FasciclePrediction pred =
        extract_fascicles(smoothed, grid, opt.threshold_deg, opt.max_count);
    if (pred.count() == 0) return false;
    const auto fodf = fodf_from_field(smoothed, opt.fodf_p);
    int best = 0;
    for (int k = 1; k < pred.count(); ++k) {
        if (fodf[pred.raw_minima[k]] > fodf[pred.raw_minima[best]]) best = k;
    }
    *out = pred.orientations[best];
    return true;
}

struct PeakFlag {
    Vec3 peak;
    bool has_peak = false;
};

std::vector<PeakFlag> dominant_peaks_for_table(std::span<const double> signals, int n_voxels,
                                               const GradientTable& table, const MlpModel& model,
                                               const SphereGrid& grid,
                                               const DownsampleOptions& opt) {
    const int m = table.count();
    std::vector<PeakFlag> out(n_voxels);
    parallel_for(n_voxels, opt.threads, [&](std::size_t v) {
        std::span<const double> voxel(signals.data() + v * m, static_cast<std::size_t>(m));
        AngleField field = estimate_field(model, voxel, table, grid);
        AngleField smoothed = smooth_field(field, grid, opt.smooth_iterations, opt.smooth_lambda);
        out[v].has_peak = dominant_peak(smoothed, grid, opt, &out[v].peak);
    });
    return out;
}

}  // namespace

DownsampleReport downsample_experiment(std::span<const double> signals, int n_voxels,
                                       const GradientTable& table, const MlpModel& model,
                                       const SphereGrid& grid, std::span<const double> fractions,
                                       int trials, std::uint64_t rng_seed,
                                       const DownsampleOptions& options) {
    const int m = table.count();
    if (signals.size() != static_cast<std::size_t>(n_voxels) * m) {
        throw std::invalid_argument("downsample: signal buffer does not match voxel count");
    }
    if (trials < 1) throw std::invalid_argument("downsample: trials must be positive");

    const auto reference =
        dominant_peaks_for_table(signals, n_voxels, table, model, grid, options);

    DownsampleReport report;
    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        const double fraction = fractions[fi];
        if (!(fraction >= 0.0 && fraction < 1.0)) {
            throw std::invalid_argument("downsample: fraction must lie in [0, 1)");
        }
        const int remove = static_cast<int>(std::lround(fraction * m));
        if (m - remove < 6) {
            throw std::invalid_argument("downsample: fraction " + std::to_string(fraction) +
                                        " leaves fewer than 6 measurements");
        }

        double sum = 0.0, sum_sq = 0.0, max_dev = 0.0;
        long samples = 0;
        for (int trial = 0; trial < trials; ++trial) {
            // One measurement subset per (fraction, trial), shared across voxels.
            Rng rng(splitmix64(rng_seed ^ (0x9d5f3c1bull + 1000 * fi + trial)));
            std::vector<int> order(m);
            for (int i = 0; i < m; ++i) order[i] = i;
            for (int i = m - 1; i > 0; --i) {
                std::swap(order[i], order[rng.uniform_index(static_cast<std::size_t>(i) + 1)]);
            }
            std::vector<int> kept(order.begin() + remove, order.end());
            std::sort(kept.begin(), kept.end());

            GradientTable sub;
            for (int i : kept) {
                sub.directions.push_back(table.directions[i]);
                sub.bvalues.push_back(table.bvalues[i]);
            }
            std::vector<double> sub_signals(static_cast<std::size_t>(n_voxels) * kept.size());
            for (int v = 0; v < n_voxels; ++v) {
                for (std::size_t i = 0; i < kept.size(); ++i) {
                    sub_signals[v * kept.size() + i] = signals[v * static_cast<std::size_t>(m) + kept[i]];
                }
            }

            const auto subset = dominant_peaks_for_table(sub_signals, n_voxels, sub, model, grid,
                                                         options);
            for (int v = 0; v < n_voxels; ++v) {
                if (!reference[v].has_peak) continue;
                double dev = subset[v].has_peak
                                 ? angle_between_deg(reference[v].peak, subset[v].peak, true)
                                 : 90.0;
                sum += dev;
                sum_sq += dev * dev;
                max_dev = std::max(max_dev, dev);
                ++samples;
            }
        }

        DownsampleRow row;
        row.fraction = fraction;
        row.samples = samples;
        if (samples > 0) {
            row.mean = sum / static_cast<double>(samples);
            double var = sum_sq / static_cast<double>(samples) - row.mean * row.mean;
            row.stddev = std::sqrt(std::max(0.0, var));
            row.max = max_dev;
        }
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace flab
