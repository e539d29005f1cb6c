#pragma once

#include <string>
#include <vector>

#include "datn/tensor.hpp"

namespace datn {

enum class Background { flat, gradient, cloud };

Background background_from_string(const std::string& name);  // throws ConfigError
std::string background_to_string(Background b);

struct SyntheticSceneSpec {
    int64_t height = 64;
    int64_t width = 64;
    int min_targets = 1;
    int max_targets = 3;
    double sigma_min = 0.7;
    double sigma_max = 2.5;
    double intensity_min = 0.4;
    double intensity_max = 1.0;
    Background background = Background::cloud;
    double noise_sigma = 0.02;
    int clutter_min = 0;
    int clutter_max = 2;
    uint64_t seed = 0;

    void validate() const;
};

struct Sample {
    Tensor image;  // 1×h×w in [0, 1]
    Tensor mask;   // 1×h×w binary
    std::string id;
    int n_targets = 0;
};

// Background plus additive Gaussian-profile targets; the mask covers pixels
// whose target contribution is at least half that target's peak. Pure
// function of its argument: equal specs give bitwise-equal samples.
Sample generate_scene(const SyntheticSceneSpec& spec);

// Deterministic per-index dataset: sample i uses spec.seed ^ i.
std::vector<Sample> generate_dataset(const SyntheticSceneSpec& spec, int count);

// Binary P5 PGM, maxval 255. Loaded values are byte/255; saved values must
// lie in [0, 1] and are rounded half-up to bytes.
Tensor load_pgm(const std::string& path);
void save_pgm(const Tensor& image, const std::string& path);

// Layout root/{images,masks}/<id>.pgm with matching ids; lexicographic order;
// masks binarized at 0.5. Orphans on either side raise an error naming the id.
std::vector<Sample> load_dataset_dir(const std::string& root);

// Writes images/, masks/ and manifest.csv (id,n_targets,seed) under out_dir.
void write_dataset_dir(const std::string& out_dir, const SyntheticSceneSpec& spec, int count);

}  // namespace datn
