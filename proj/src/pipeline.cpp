#include "flab/pipeline.hpp"

#include <stdexcept>

#include "flab/features.hpp"
#include "flab/parallel.hpp"

namespace flab {

VolumeResult predict_volume(const MlpModel& model, std::span<const double> signals, int nx, int ny,
                            int nz, const GradientTable& table, const SphereGrid& grid,
                            const PipelineOptions& options) {
    const int n_voxels = nx * ny * nz;
    const int m = table.count();
    if (signals.size() != static_cast<std::size_t>(n_voxels) * m) {
        throw std::invalid_argument("predict_volume: volume has " +
                                    std::to_string(signals.size()) + " values, expected " +
                                    std::to_string(static_cast<std::size_t>(n_voxels) * m) + " (" +
                                    std::to_string(n_voxels) + " voxels x " + std::to_string(m) +
                                    " measurements)");
    }

    // Features are even in the probe, so only canonical directions are
    // evaluated; the basis is shared by every voxel.
    std::vector<int> canonical;
    std::vector<Vec3> probes;
    for (int i = 0; i < grid.size(); ++i) {
        if (is_canonical(grid.directions[i])) {
            canonical.push_back(i);
            probes.push_back(grid.directions[i]);
        }
    }
    const FeatureBasis basis(probes, table, model.feature_n, model.feature_epsilon);

    VolumeResult result;
    result.predictions.nx = nx;
    result.predictions.ny = ny;
    result.predictions.nz = nz;
    result.predictions.voxels.resize(n_voxels);
    if (options.want_fodf) result.fodf.assign(static_cast<std::size_t>(n_voxels) * grid.size(), 0.0);
    if (options.want_fields) {
        result.raw_field.assign(static_cast<std::size_t>(n_voxels) * grid.size(), 0.0);
        result.smooth_field.assign(static_cast<std::size_t>(n_voxels) * grid.size(), 0.0);
    }

    parallel_for(n_voxels, options.threads, [&](std::size_t v) {
        std::span<const double> voxel(signals.data() + v * m, static_cast<std::size_t>(m));
        Eigen::MatrixXd features = basis.apply(voxel);
        Eigen::VectorXd angles = predict_batch(model, features);

        AngleField field;
        field.values.assign(grid.size(), 0.0);
        for (std::size_t c = 0; c < canonical.size(); ++c) {
            field.values[canonical[c]] = angles[c];
            field.values[grid.antipode[canonical[c]]] = angles[c];
        }
        AngleField smoothed =
            smooth_field(field, grid, options.smooth_iterations, options.smooth_lambda);
        result.predictions.voxels[v] =
            extract_fascicles(smoothed, grid, options.threshold_deg, options.max_count);

        if (options.want_fodf) {
            auto amplitudes = fodf_from_field(smoothed, options.fodf_p);
            std::copy(amplitudes.begin(), amplitudes.end(),
                      result.fodf.begin() + v * grid.size());
        }
        if (options.want_fields) {
            std::copy(field.values.begin(), field.values.end(),
                      result.raw_field.begin() + v * grid.size());
            std::copy(smoothed.values.begin(), smoothed.values.end(),
                      result.smooth_field.begin() + v * grid.size());
        }
    });
    return result;
}

}  // namespace flab
