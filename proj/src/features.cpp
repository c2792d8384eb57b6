#include "flab/features.hpp"

#include <cmath>
#include <stdexcept>

namespace flab {

namespace {

void check_feature_args(std::size_t signal_count, const GradientTable& table, int n,
                        double epsilon) {
    if (signal_count != static_cast<std::size_t>(table.count())) {
        throw std::invalid_argument("compute_feature: signal count does not match table");
    }
    if (n < 2) throw std::invalid_argument("compute_feature: n must be >= 2");
    if (!(epsilon > 0.0)) throw std::invalid_argument("compute_feature: epsilon must be > 0");
}

std::vector<int> diffusion_weighted_rows(const GradientTable& table) {
    std::vector<int> rows;
    for (int i = 0; i < table.count(); ++i) {
        if (!table.is_b0(i)) rows.push_back(i);
    }
    if (rows.empty()) {
        throw std::invalid_argument("compute_feature: no diffusion-weighted measurements "
                                    "(all b-values are ~0)");
    }
    return rows;
}

}  // namespace

FeatureVector compute_feature(const Vec3& u, std::span<const double> signals,
                              const GradientTable& table, int n, double epsilon) {
    check_feature_args(signals.size(), table, n, epsilon);
    const auto rows = diffusion_weighted_rows(table);

    std::vector<double> angles(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        angles[r] = antipodal_angle_rad(table.directions[rows[r]], u);
    }

    FeatureVector fv;
    fv.n = n;
    fv.values.resize(n + 1);
    for (int j = 0; j <= n; ++j) {
        const double theta = j * kPi / (2.0 * n);
        double num = 0.0, den = 0.0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double w = 1.0 / (std::abs(angles[r] - theta) + epsilon);
            num += w * signals[rows[r]];
            den += w;
        }
        fv.values[j] = num / den;
    }
    return fv;
}

FeatureBasis::FeatureBasis(std::span<const Vec3> probes, const GradientTable& table, int n,
                           double epsilon)
    : probe_count_(static_cast<int>(probes.size())), n_(n) {
    check_feature_args(table.count(), table, n, epsilon);
    dw_indices_ = diffusion_weighted_rows(table);
    const int m = static_cast<int>(dw_indices_.size());

    weights_.resize(static_cast<Eigen::Index>(probe_count_) * (n + 1), m);
    std::vector<double> angles(m);
    for (int p = 0; p < probe_count_; ++p) {
        for (int i = 0; i < m; ++i) {
            angles[i] = antipodal_angle_rad(table.directions[dw_indices_[i]], probes[p]);
        }
        for (int j = 0; j <= n; ++j) {
            const double theta = j * kPi / (2.0 * n);
            double den = 0.0;
            Eigen::Index row = static_cast<Eigen::Index>(p) * (n + 1) + j;
            for (int i = 0; i < m; ++i) {
                double w = 1.0 / (std::abs(angles[i] - theta) + epsilon);
                weights_(row, i) = w;
                den += w;
            }
            weights_.row(row) /= den;
        }
    }
}

Eigen::MatrixXd FeatureBasis::apply(std::span<const double> signals) const {
    Eigen::VectorXd s(dw_indices_.size());
    for (std::size_t i = 0; i < dw_indices_.size(); ++i) s[i] = signals[dw_indices_[i]];
    Eigen::VectorXd flat = weights_ * s;
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
               flat.data(), probe_count_, n_ + 1)
        .eval();
}

}  // namespace flab
