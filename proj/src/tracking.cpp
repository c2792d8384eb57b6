#include "flab/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace flab {

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::LeftVolume: return "left-volume";
        case Termination::AngleExceeded: return "angle-exceeded";
        case Termination::MaxSteps: return "max-steps";
        case Termination::NoPeak: return "no-peak";
    }
    return "unknown";
}

namespace {

// Voxel containing a continuous coordinate; boundaries at half-integers round
// away from zero.
std::array<int, 3> containing_voxel(const Vec3& p) {
    return {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)),
            static_cast<int>(std::lround(p.z))};
}

struct HalfTrack {
    std::vector<Vec3> points;  // excludes the seed point
    Termination reason = Termination::NoPeak;
};

HalfTrack integrate(const Vec3& seed_center, const Vec3& initial_direction,
                    const PredictionVolume& peaks, const TrackParams& params) {
    HalfTrack half;
    Vec3 pos = seed_center;
    Vec3 dir = initial_direction;
    const double cos_limit = std::cos(deg2rad(params.max_angle_deg));

    for (int step = 0; step < params.max_steps; ++step) {
        const auto v = containing_voxel(pos);
        if (!peaks.in_bounds(v[0], v[1], v[2])) {
            half.reason = Termination::LeftVolume;
            return half;
        }
        const auto& pred = peaks.voxels[peaks.voxel_index(v[0], v[1], v[2])];
        if (pred.orientations.empty()) {
            half.reason = Termination::NoPeak;
            return half;
        }
        const Vec3* best = nullptr;
        double best_dot = -1.0;
        for (const Vec3& peak : pred.orientations) {
            double d = std::abs(dot(peak, dir));
            if (d > best_dot) {
                best_dot = d;
                best = &peak;
            }
        }
        if (best_dot < cos_limit) {
            half.reason = Termination::AngleExceeded;
            return half;
        }
        dir = dot(*best, dir) < 0.0 ? -*best : *best;
        pos = pos + dir * params.step;
        half.points.push_back(pos);
        const auto nv = containing_voxel(pos);
        if (!peaks.in_bounds(nv[0], nv[1], nv[2])) {
            half.reason = Termination::LeftVolume;
            return half;
        }
    }
    half.reason = Termination::MaxSteps;
    return half;
}

}  // namespace

std::vector<Streamline> track(std::span<const std::array<int, 3>> seeds,
                              const PredictionVolume& peaks, const TrackParams& params) {
    if (static_cast<int>(peaks.voxels.size()) != peaks.voxel_count()) {
        throw std::invalid_argument("track: prediction volume size does not match dims");
    }
    std::vector<Streamline> out;
    out.reserve(seeds.size());
    for (const auto& s : seeds) {
        if (!peaks.in_bounds(s[0], s[1], s[2])) {
            throw std::invalid_argument("track: seed (" + std::to_string(s[0]) + "," +
                                        std::to_string(s[1]) + "," + std::to_string(s[2]) +
                                        ") outside volume");
        }
        const Vec3 center{static_cast<double>(s[0]), static_cast<double>(s[1]),
                          static_cast<double>(s[2])};
        Streamline line;
        const auto& pred = peaks.voxels[peaks.voxel_index(s[0], s[1], s[2])];
        if (pred.orientations.empty()) {
            line.points = {center};
            line.forward_reason = Termination::NoPeak;
            line.backward_reason = Termination::NoPeak;
            out.push_back(std::move(line));
            continue;
        }
        const Vec3 first_dir = pred.orientations.front();
        HalfTrack forward = integrate(center, first_dir, peaks, params);
        HalfTrack backward = integrate(center, -first_dir, peaks, params);

        line.points.assign(backward.points.rbegin(), backward.points.rend());
        line.points.push_back(center);
        line.points.insert(line.points.end(), forward.points.begin(), forward.points.end());
        line.forward_reason = forward.reason;
        line.backward_reason = backward.reason;
        out.push_back(std::move(line));
    }
    return out;
}

SuccessReport success_ratio(const std::vector<std::vector<Streamline>>& per_pair_streamlines,
                            const std::vector<std::vector<std::array<int, 3>>>& per_pair_targets,
                            double tolerance) {
    if (per_pair_streamlines.size() != per_pair_targets.size()) {
        throw std::invalid_argument("success_ratio: " + std::to_string(per_pair_streamlines.size()) +
                                    " streamline groups vs " +
                                    std::to_string(per_pair_targets.size()) + " target sets");
    }
    SuccessReport report;
    double total = 0.0;
    for (std::size_t pair = 0; pair < per_pair_streamlines.size(); ++pair) {
        const auto& lines = per_pair_streamlines[pair];
        const auto& targets = per_pair_targets[pair];
        int successes = 0;
        for (const auto& line : lines) {
            bool hit = false;
            for (const Vec3* endpoint : {&line.points.front(), &line.points.back()}) {
                for (const auto& t : targets) {
                    const Vec3 center{static_cast<double>(t[0]), static_cast<double>(t[1]),
                                      static_cast<double>(t[2])};
                    if (norm(*endpoint - center) <= tolerance) {
                        hit = true;
                        break;
                    }
                }
                if (hit) break;
            }
            if (hit) ++successes;
        }
        double ratio = lines.empty() ? 0.0 : static_cast<double>(successes) / lines.size();
        report.per_pair.push_back(ratio);
        total += ratio;
    }
    report.mean = per_pair_streamlines.empty() ? 0.0 : total / per_pair_streamlines.size();
    return report;
}

}  // namespace flab
