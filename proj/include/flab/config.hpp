#pragma once

#include <string>

#include "flab/mlp.hpp"
#include "flab/signal.hpp"

namespace flab {

// Phantom spec from a JSON file; see README for the schema. Builtin names
// ("grid15", "bundles20") are resolved by builtin_phantom_spec.
PhantomSpec load_phantom_spec(const std::string& path);

struct TrainFileConfig {
    TrainConfig train;
    std::string bvec_path;
    std::string bval_path;
    int grid_size = 724;
};

TrainFileConfig load_train_config(const std::string& path);

}  // namespace flab
