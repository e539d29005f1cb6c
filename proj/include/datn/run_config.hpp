#pragma once

#include <iosfwd>
#include <string>

#include "datn/data.hpp"
#include "datn/network.hpp"
#include "datn/training.hpp"

namespace datn {

// Flat key=value run configuration with section prefixes (net., train.,
// data., paths.). Unknown keys and malformed values raise ConfigError naming
// the key. Defaults: lr 5e-4 dropping to 5e-5/5e-6, batch 4, 400 epochs,
// head dilations 1,3.
struct RunConfig {
    uint64_t seed = 0;
    NetworkConfig net;
    TrainConfig train;
    SyntheticSceneSpec data;
    std::string train_dir;
    std::string val_dir;
    std::string out_dir = "out";

    // Propagates the top-level seed into net/train/data.
    void apply_seed(uint64_t s);
    void validate() const;
};

RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);

}  // namespace datn
