#include "datn/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace datn {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int64_t parse_int(const std::string& key, const std::string& value) {
    int64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
    }
    return out;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("key '" + key + "': expected unsigned integer, got '" + value + "'");
    }
    return out;
}

double parse_f64(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        double out = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on") return true;
    if (value == "0" || value == "false" || value == "off") return false;
    throw ConfigError("key '" + key + "': expected boolean (0/1/true/false), got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("key '" + key + "': empty list entry");
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    if (out.empty()) throw ConfigError("key '" + key + "': expected a comma-separated list");
    return out;
}

}  // namespace

void RunConfig::apply_seed(uint64_t s) {
    seed = s;
    net.seed = s;
    train.seed = s;
    data.seed = s;
}

void RunConfig::validate() const {
    net.validate();
    train.validate();
    data.validate();
}

RunConfig parse_run_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" +
                              s + "'");
        }
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");

        if (key == "seed") cfg.apply_seed(parse_u64(key, value));
        else if (key == "net.depth") cfg.net.depth = static_cast<int>(parse_int(key, value));
        else if (key == "net.base_channels") cfg.net.base_channels = parse_int(key, value);
        else if (key == "net.dilations") cfg.net.dilations = parse_int_list(key, value);
        else if (key == "net.use_datrans") cfg.net.use_datrans = parse_bool(key, value);
        else if (key == "net.use_gfem") cfg.net.use_gfem = parse_bool(key, value);
        else if (key == "net.gfem_nonlocal") cfg.net.gfem_nonlocal = parse_bool(key, value);
        else if (key == "net.gfem_se") cfg.net.gfem_se = parse_bool(key, value);
        else if (key == "net.gfem_residual") cfg.net.gfem_residual = parse_bool(key, value);
        else if (key == "net.gfem_reduce") cfg.net.gfem_reduce = parse_int(key, value);
        else if (key == "net.se_ratio") cfg.net.se_ratio = parse_int(key, value);
        else if (key == "net.datrans_in_decoder") cfg.net.datrans_in_decoder = parse_bool(key, value);
        else if (key == "train.lr0") cfg.train.lr0 = parse_f64(key, value);
        else if (key == "train.lr1") cfg.train.lr1 = parse_f64(key, value);
        else if (key == "train.lr2") cfg.train.lr2 = parse_f64(key, value);
        else if (key == "train.drop1_epoch") cfg.train.drop1_epoch = static_cast<int>(parse_int(key, value));
        else if (key == "train.drop2_epoch") cfg.train.drop2_epoch = static_cast<int>(parse_int(key, value));
        else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(parse_int(key, value));
        else if (key == "train.batch_size") cfg.train.batch_size = static_cast<int>(parse_int(key, value));
        else if (key == "data.size") {
            int64_t v = parse_int(key, value);
            cfg.data.height = v;
            cfg.data.width = v;
        }
        else if (key == "data.min_targets") cfg.data.min_targets = static_cast<int>(parse_int(key, value));
        else if (key == "data.max_targets") cfg.data.max_targets = static_cast<int>(parse_int(key, value));
        else if (key == "data.sigma_min") cfg.data.sigma_min = parse_f64(key, value);
        else if (key == "data.sigma_max") cfg.data.sigma_max = parse_f64(key, value);
        else if (key == "data.intensity_min") cfg.data.intensity_min = parse_f64(key, value);
        else if (key == "data.intensity_max") cfg.data.intensity_max = parse_f64(key, value);
        else if (key == "data.background") cfg.data.background = background_from_string(value);
        else if (key == "data.noise_sigma") cfg.data.noise_sigma = parse_f64(key, value);
        else if (key == "data.clutter_min") cfg.data.clutter_min = static_cast<int>(parse_int(key, value));
        else if (key == "data.clutter_max") cfg.data.clutter_max = static_cast<int>(parse_int(key, value));
        else if (key == "paths.train_dir") cfg.train_dir = value;
        else if (key == "paths.val_dir") cfg.val_dir = value;
        else if (key == "paths.out_dir") cfg.out_dir = value;
        else throw ConfigError("unknown key '" + key + "' on line " + std::to_string(line_no));
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    return parse_run_config(in);
}

}  // namespace datn
