#include "datn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace datn {

Background background_from_string(const std::string& name) {
    if (name == "flat") return Background::flat;
    if (name == "gradient") return Background::gradient;
    if (name == "cloud") return Background::cloud;
    throw ConfigError("unknown background '" + name + "' (expected flat, gradient or cloud)");
}

std::string background_to_string(Background b) {
    switch (b) {
        case Background::flat: return "flat";
        case Background::gradient: return "gradient";
        case Background::cloud: return "cloud";
    }
    return "cloud";
}

void SyntheticSceneSpec::validate() const {
    if (height < 8 || width < 8) throw ConfigError("data.size must be >= 8");
    if (min_targets < 0 || max_targets < min_targets) {
        throw ConfigError("data.min_targets/max_targets must satisfy 0 <= min <= max");
    }
    if (sigma_min <= 0.0 || sigma_max < sigma_min) {
        throw ConfigError("data.sigma_min/sigma_max must satisfy 0 < min <= max");
    }
    if (intensity_min < 0.0 || intensity_max > 1.0 || intensity_max < intensity_min) {
        throw ConfigError("data.intensity_min/intensity_max must lie in [0,1], min <= max");
    }
    if (noise_sigma < 0.0) throw ConfigError("data.noise_sigma must be >= 0");
    if (clutter_min < 0 || clutter_max < clutter_min) {
        throw ConfigError("data.clutter_min/clutter_max must satisfy 0 <= min <= max");
    }
    double margin = std::ceil(sigma_max * 1.1774) + 1.0;
    if (2.0 * margin >= static_cast<double>(std::min(height, width))) {
        throw ConfigError("data.sigma_max too large for frame: targets must fit inside");
    }
}

namespace {

// Low-frequency value noise: three octaves of bilinearly interpolated random
// lattices.
std::vector<double> cloud_field(int64_t h, int64_t w, Rng& rng) {
    std::vector<double> field(static_cast<size_t>(h * w), 0.0);
    const int cells[3] = {4, 8, 16};
    const double amp[3] = {0.5, 0.25, 0.125};
    for (int oct = 0; oct < 3; ++oct) {
        int gw = cells[oct] + 1;
        std::vector<double> lattice(static_cast<size_t>(gw * gw));
        for (double& v : lattice) v = rng.uniform();
        for (int64_t y = 0; y < h; ++y) {
            double fy = static_cast<double>(y) / static_cast<double>(h - 1) * cells[oct];
            int64_t y0 = std::min<int64_t>(static_cast<int64_t>(fy), cells[oct] - 1);
            double ty = fy - static_cast<double>(y0);
            for (int64_t x = 0; x < w; ++x) {
                double fx = static_cast<double>(x) / static_cast<double>(w - 1) * cells[oct];
                int64_t x0 = std::min<int64_t>(static_cast<int64_t>(fx), cells[oct] - 1);
                double tx = fx - static_cast<double>(x0);
                double v00 = lattice[static_cast<size_t>(y0 * gw + x0)];
                double v01 = lattice[static_cast<size_t>(y0 * gw + x0 + 1)];
                double v10 = lattice[static_cast<size_t>((y0 + 1) * gw + x0)];
                double v11 = lattice[static_cast<size_t>((y0 + 1) * gw + x0 + 1)];
                double top = v00 + (v01 - v00) * tx;
                double bot = v10 + (v11 - v10) * tx;
                field[static_cast<size_t>(y * w + x)] += amp[oct] * (top + (bot - top) * ty);
            }
        }
    }
    return field;
}

}  // namespace

Sample generate_scene(const SyntheticSceneSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    int64_t h = spec.height, w = spec.width;
    std::vector<double> image(static_cast<size_t>(h * w), 0.0);

    switch (spec.background) {
        case Background::flat: {
            double level = rng.uniform(0.05, 0.35);
            std::fill(image.begin(), image.end(), level);
            break;
        }
        case Background::gradient: {
            double lo = rng.uniform(0.02, 0.2);
            double hi = rng.uniform(0.2, 0.45);
            double angle = rng.uniform(0.0, 6.283185307179586);
            double cr = std::cos(angle), sr = std::sin(angle);
            double diag = std::sqrt(static_cast<double>(h * h + w * w));
            for (int64_t y = 0; y < h; ++y) {
                for (int64_t x = 0; x < w; ++x) {
                    double t = (cr * static_cast<double>(x) + sr * static_cast<double>(y)) / diag + 0.5;
                    image[static_cast<size_t>(y * w + x)] = lo + (hi - lo) * std::clamp(t, 0.0, 1.0);
                }
            }
            break;
        }
        case Background::cloud: {
            std::vector<double> field = cloud_field(h, w, rng);
            for (size_t i = 0; i < image.size(); ++i) image[i] = 0.05 + 0.4 * field[i];
            break;
        }
    }

    // Large dim blobs as background clutter; they never enter the mask.
    int n_clutter = static_cast<int>(rng.uniform_int(spec.clutter_min, spec.clutter_max));
    for (int i = 0; i < n_clutter; ++i) {
        double sigma = rng.uniform(3.0, 8.0);
        double peak = rng.uniform(0.05, 0.25);
        double cy = rng.uniform(0.0, static_cast<double>(h - 1));
        double cx = rng.uniform(0.0, static_cast<double>(w - 1));
        int64_t reach = static_cast<int64_t>(std::ceil(3.0 * sigma));
        for (int64_t y = std::max<int64_t>(0, static_cast<int64_t>(cy) - reach);
             y <= std::min<int64_t>(h - 1, static_cast<int64_t>(cy) + reach); ++y) {
            for (int64_t x = std::max<int64_t>(0, static_cast<int64_t>(cx) - reach);
                 x <= std::min<int64_t>(w - 1, static_cast<int64_t>(cx) + reach); ++x) {
                double dy = static_cast<double>(y) - cy;
                double dx = static_cast<double>(x) - cx;
                image[static_cast<size_t>(y * w + x)] +=
                    peak * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            }
        }
    }

    if (spec.noise_sigma > 0.0) {
        for (double& v : image) v += spec.noise_sigma * rng.normal();
    }

    // Targets: additive Gaussian profiles. A pixel joins the mask when some
    // target contributes at least half its own peak there, i.e. within
    // radius sigma·sqrt(2·ln 2).
    std::vector<double> mask(static_cast<size_t>(h * w), 0.0);
    int n_targets = static_cast<int>(rng.uniform_int(spec.min_targets, spec.max_targets));
    const double half_max_factor = std::sqrt(2.0 * std::log(2.0));
    for (int t = 0; t < n_targets; ++t) {
        double sigma = rng.uniform(spec.sigma_min, spec.sigma_max);
        double peak = rng.uniform(spec.intensity_min, spec.intensity_max);
        double margin = std::ceil(sigma * half_max_factor) + 1.0;
        double cy = rng.uniform(margin, static_cast<double>(h - 1) - margin);
        double cx = rng.uniform(margin, static_cast<double>(w - 1) - margin);
        int64_t reach = static_cast<int64_t>(std::ceil(3.0 * sigma)) + 1;
        double r2_half = 2.0 * std::log(2.0) * sigma * sigma;
        for (int64_t y = std::max<int64_t>(0, static_cast<int64_t>(cy) - reach);
             y <= std::min<int64_t>(h - 1, static_cast<int64_t>(cy) + reach); ++y) {
            for (int64_t x = std::max<int64_t>(0, static_cast<int64_t>(cx) - reach);
                 x <= std::min<int64_t>(w - 1, static_cast<int64_t>(cx) + reach); ++x) {
                double dy = static_cast<double>(y) - cy;
                double dx = static_cast<double>(x) - cx;
                double r2 = dy * dy + dx * dx;
                image[static_cast<size_t>(y * w + x)] +=
                    peak * std::exp(-r2 / (2.0 * sigma * sigma));
                if (r2 <= r2_half) mask[static_cast<size_t>(y * w + x)] = 1.0;
            }
        }
    }

    for (double& v : image) v = std::clamp(v, 0.0, 1.0);

    Sample sample;
    sample.image = Tensor::from({1, h, w}, std::move(image));
    sample.mask = Tensor::from({1, h, w}, std::move(mask));
    sample.n_targets = n_targets;
    return sample;
}

std::vector<Sample> generate_dataset(const SyntheticSceneSpec& spec, int count) {
    std::vector<Sample> out;
    out.reserve(static_cast<size_t>(count));
    char idbuf[32];
    for (int i = 0; i < count; ++i) {
        SyntheticSceneSpec s = spec;
        s.seed = spec.seed ^ static_cast<uint64_t>(i);
        Sample sample = generate_scene(s);
        std::snprintf(idbuf, sizeof(idbuf), "img_%05d", i);
        sample.id = idbuf;
        out.push_back(std::move(sample));
    }
    return out;
}

// ---- PGM io ------------------------------------------------------------------

namespace {

int pgm_get_token(std::istream& is, std::string& token, int64_t& offset) {
    token.clear();
    int c = is.get();
    ++offset;
    // skip whitespace and '#' comments
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') {
                c = is.get();
                ++offset;
            }
        }
        c = is.get();
        ++offset;
    }
    while (c != EOF && !std::isspace(c)) {
        token.push_back(static_cast<char>(c));
        c = is.get();
        ++offset;
    }
    return c;
}

int64_t pgm_parse_int(const std::string& token, const std::string& path, int64_t offset,
                      const char* what) {
    if (token.empty() || token.size() > 9) {
        throw ParseError(path + ": missing or oversized " + what + " near byte " +
                         std::to_string(offset));
    }
    for (char c : token) {
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            throw ParseError(path + ": invalid " + what + " '" + token + "' near byte " +
                             std::to_string(offset));
        }
    }
    return std::stoll(token);
}

}  // namespace

Tensor load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image: " + path);
    int64_t offset = 0;

    char m0 = static_cast<char>(is.get());
    char m1 = static_cast<char>(is.get());
    offset += 2;
    if (is.eof()) throw ParseError(path + ": truncated header at byte 0");
    if (m0 != 'P' || m1 != '5') {
        throw ParseError(path + ": unsupported format '" + std::string{m0, m1} +
                         "' at byte 0 (binary P5 required)");
    }

    std::string token;
    pgm_get_token(is, token, offset);
    int64_t w = pgm_parse_int(token, path, offset, "width");
    pgm_get_token(is, token, offset);
    int64_t h = pgm_parse_int(token, path, offset, "height");
    pgm_get_token(is, token, offset);
    int64_t maxval = pgm_parse_int(token, path, offset, "maxval");
    if (w < 1 || h < 1 || w > 65536 || h > 65536) {
        throw ParseError(path + ": bad dimensions " + std::to_string(w) + "x" +
                         std::to_string(h) + " near byte " + std::to_string(offset));
    }
    if (maxval != 255) {
        throw ParseError(path + ": unsupported maxval " + std::to_string(maxval) +
                         " near byte " + std::to_string(offset) + " (255 required)");
    }
    // the single whitespace after maxval was already consumed by the tokenizer

    std::vector<unsigned char> bytes(static_cast<size_t>(w * h));
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw ParseError(path + ": truncated payload at byte " +
                         std::to_string(offset + is.gcount()) + " (expected " +
                         std::to_string(bytes.size()) + " bytes)");
    }

    Tensor t = Tensor::zeros({1, h, w});
    for (size_t i = 0; i < bytes.size(); ++i) {
        t.data()[i] = static_cast<double>(bytes[i]) / 255.0;
    }
    return t;
}

void save_pgm(const Tensor& image, const std::string& path) {
    int64_t h, w;
    if (image.rank() == 2) {
        h = image.dim(0);
        w = image.dim(1);
    } else if (image.rank() == 3 && image.dim(0) == 1) {
        h = image.dim(1);
        w = image.dim(2);
    } else {
        throw ShapeError("save_pgm expects h×w or 1×h×w, got " + shape_str(image.shape()));
    }
    for (int64_t i = 0; i < image.numel(); ++i) {
        double v = image.data()[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValueError("save_pgm values must lie in [0, 1]");
        }
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open image for writing: " + path);
    os << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> bytes(static_cast<size_t>(h * w));
    for (int64_t i = 0; i < h * w; ++i) {
        bytes[static_cast<size_t>(i)] =
            static_cast<unsigned char>(std::floor(image.data()[i] * 255.0 + 0.5));
    }
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("failed writing image: " + path);
}

std::vector<Sample> load_dataset_dir(const std::string& root) {
    fs::path images_dir = fs::path(root) / "images";
    fs::path masks_dir = fs::path(root) / "masks";
    if (!fs::is_directory(images_dir)) {
        if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root);
        return {};
    }

    std::vector<std::string> image_ids, mask_ids;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (entry.path().extension() == ".pgm") image_ids.push_back(entry.path().stem().string());
    }
    if (fs::is_directory(masks_dir)) {
        for (const auto& entry : fs::directory_iterator(masks_dir)) {
            if (entry.path().extension() == ".pgm") mask_ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(image_ids.begin(), image_ids.end());
    std::sort(mask_ids.begin(), mask_ids.end());

    for (const std::string& id : mask_ids) {
        if (!std::binary_search(image_ids.begin(), image_ids.end(), id)) {
            throw IoError("dataset " + root + ": mask '" + id + "' has no matching image");
        }
    }

    std::vector<Sample> samples;
    samples.reserve(image_ids.size());
    for (const std::string& id : image_ids) {
        fs::path mask_path = masks_dir / (id + ".pgm");
        if (!fs::exists(mask_path)) {
            throw IoError("dataset " + root + ": image '" + id + "' has no matching mask");
        }
        Sample s;
        s.id = id;
        s.image = load_pgm((images_dir / (id + ".pgm")).string());
        s.mask = load_pgm(mask_path.string());
        for (int64_t i = 0; i < s.mask.numel(); ++i) {
            s.mask.data()[i] = s.mask.data()[i] >= 0.5 ? 1.0 : 0.0;
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_dataset_dir(const std::string& out_dir, const SyntheticSceneSpec& spec, int count) {
    fs::path root(out_dir);
    std::error_code ec;
    fs::create_directories(root / "images", ec);
    fs::create_directories(root / "masks", ec);
    if (!fs::is_directory(root / "images") || !fs::is_directory(root / "masks")) {
        throw IoError("cannot create dataset directories under " + out_dir);
    }

    std::ofstream manifest(root / "manifest.csv");
    if (!manifest) throw IoError("cannot write manifest under " + out_dir);
    manifest << "id,n_targets,seed\n";

    std::vector<Sample> samples = generate_dataset(spec, count);
    for (int i = 0; i < count; ++i) {
        const Sample& s = samples[static_cast<size_t>(i)];
        save_pgm(s.image, (root / "images" / (s.id + ".pgm")).string());
        save_pgm(s.mask, (root / "masks" / (s.id + ".pgm")).string());
        manifest << s.id << "," << s.n_targets << ","
                 << (spec.seed ^ static_cast<uint64_t>(i)) << "\n";
    }
    if (!manifest) throw IoError("failed writing manifest under " + out_dir);
}

}  // namespace datn
