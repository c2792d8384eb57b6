#include "flab/dti.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "flab/parallel.hpp"

namespace flab {

DtiFit fit_dti(std::span<const double> signals, const GradientTable& table) {
    DtiFit fit;
    std::vector<int> rows;
    for (int i = 0; i < table.count(); ++i) {
        if (!table.is_b0(i)) rows.push_back(i);
    }
    if (rows.size() < 6) return fit;

    Eigen::MatrixXd design(rows.size(), 6);
    Eigen::VectorXd rhs(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int i = rows[r];
        const Vec3& q = table.directions[i];
        const double b = table.bvalues[i];
        design(r, 0) = b * q.x * q.x;
        design(r, 1) = b * q.y * q.y;
        design(r, 2) = b * q.z * q.z;
        design(r, 3) = 2.0 * b * q.x * q.y;
        design(r, 4) = 2.0 * b * q.x * q.z;
        design(r, 5) = 2.0 * b * q.y * q.z;
        rhs[r] = -std::log(std::max(signals[i], 1e-8));
    }
    Eigen::VectorXd d = design.colPivHouseholderQr().solve(rhs);

    Eigen::Matrix3d tensor;
    tensor << d[0], d[3], d[4], d[3], d[1], d[5], d[4], d[5], d[2];
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(tensor);
    if (solver.info() != Eigen::Success) return fit;

    const Eigen::Vector3d evals = solver.eigenvalues();  // ascending
    const Eigen::Vector3d e1 = solver.eigenvectors().col(2);
    const double mean = evals.mean();
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i) {
        num += (evals[i] - mean) * (evals[i] - mean);
        den += evals[i] * evals[i];
    }
    if (den <= 0.0 || !std::isfinite(den)) return fit;

    fit.principal = canonicalize(normalized(Vec3{e1[0], e1[1], e1[2]}));
    fit.fa = std::sqrt(1.5 * num / den);
    fit.md = mean;
    fit.ok = std::isfinite(fit.fa);
    return fit;
}

PredictionVolume dti_peaks(std::span<const double> signals, int nx, int ny, int nz,
                           const GradientTable& table, double fa_threshold, int threads) {
    PredictionVolume volume;
    volume.nx = nx;
    volume.ny = ny;
    volume.nz = nz;
    volume.voxels.resize(volume.voxel_count());
    const int m = table.count();
    parallel_for(volume.voxel_count(), threads, [&](std::size_t v) {
        std::span<const double> voxel(signals.data() + v * m, static_cast<std::size_t>(m));
        DtiFit fit = fit_dti(voxel, table);
        if (fit.ok && fit.fa >= fa_threshold) {
            volume.voxels[v].orientations = {fit.principal};
            volume.voxels[v].raw_minima = {-1};
        }
    });
    return volume;
}

}  // namespace flab
