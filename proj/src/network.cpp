#include "datn/network.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace datn {

void NetworkConfig::validate() const {
    if (depth < 1) throw ConfigError("net.depth must be >= 1, got " + std::to_string(depth));
    if (base_channels < 1) {
        throw ConfigError("net.base_channels must be >= 1, got " +
                          std::to_string(base_channels));
    }
    if (dilations.empty()) throw ConfigError("net.dilations must list at least one rate");
    for (int d : dilations) {
        if (d < 1) throw ConfigError("net.dilations entries must be positive, got " +
                                     std::to_string(d));
    }
    int64_t m = static_cast<int64_t>(dilations.size());
    if (use_datrans && base_channels % m != 0) {
        throw ConfigError("net.base_channels = " + std::to_string(base_channels) +
                          " must be divisible by the head count " + std::to_string(m));
    }
    if (gfem_reduce < 1) throw ConfigError("net.gfem_reduce must be >= 1");
    if (se_ratio < 1) throw ConfigError("net.se_ratio must be >= 1");
    if (use_gfem && gfem_se) {
        int64_t c = channels_at(depth - 1);
        if (c % se_ratio != 0) {
            throw ConfigError("net.se_ratio = " + std::to_string(se_ratio) +
                              " must divide the bottleneck channels " + std::to_string(c));
        }
    }
    if (use_gfem && !gfem_nonlocal && !gfem_se) {
        throw ConfigError("net.use_gfem requires net.gfem_nonlocal or net.gfem_se");
    }
}

int64_t NetworkConfig::channels_at(int level) const {
    return base_channels * (int64_t{1} << level);
}

Tensor DATransNet::FeatureBlock::forward(const Tensor& x) const {
    if (datrans) return datrans->forward(x);
    return relu(conv->forward(x));
}

void DATransNet::FeatureBlock::collect_params(ParamList& out, const std::string& prefix) const {
    if (datrans) datrans->collect_params(out, prefix);
    if (conv) conv->collect_params(out, prefix + ".conv");
}

DATransNet::FeatureBlock DATransNet::make_block(int64_t c_in, int64_t c_out,
                                                bool allow_datrans, Rng& rng) const {
    FeatureBlock block;
    if (config_.use_datrans && allow_datrans) {
        block.datrans.emplace(c_in, c_out, config_.dilations, rng);
    } else {
        block.conv.emplace(c_in, c_out, 3, 1, 1, rng);
    }
    return block;
}

DATransNet::DATransNet(const NetworkConfig& config) : config_(config) {
    config_.validate();
    Rng rng(config_.seed);

    int64_t c_in = 1;
    for (int level = 0; level < config_.depth; ++level) {
        encoder_.push_back(make_block(c_in, config_.channels_at(level), true, rng));
        c_in = config_.channels_at(level);
    }

    int64_t deepest = config_.channels_at(config_.depth - 1);
    if (config_.use_gfem) {
        GfemOptions opts;
        opts.enable_nonlocal = config_.gfem_nonlocal;
        opts.enable_se = config_.gfem_se;
        opts.nonlocal_residual = config_.gfem_residual;
        opts.nonlocal_reduce = config_.gfem_reduce;
        opts.se_ratio = config_.se_ratio;
        bottleneck_.emplace(deepest, opts, rng);
    }

    for (int level = config_.depth - 1; level >= 0; --level) {
        int64_t c_above = level == config_.depth - 1 ? deepest : config_.channels_at(level + 1);
        int64_t c_here = config_.channels_at(level);
        UpStage stage;
        stage.up_conv = Conv2dLayer(c_above, c_here, 1, 1, 0, rng);
        stage.block = make_block(2 * c_here, c_here, config_.datrans_in_decoder, rng);
        decoder_.push_back(std::move(stage));
    }

    head_ = Conv2dLayer(config_.base_channels, 1, 1, 1, 0, rng);
}

Tensor DATransNet::forward(const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != 1) {
        throw ShapeError("forward expects a 1×h×w image, got " + shape_str(image.shape()));
    }
    int64_t multiple = int64_t{1} << config_.depth;
    if (image.dim(1) % multiple != 0 || image.dim(2) % multiple != 0) {
        throw ShapeError("forward: spatial extents must be divisible by 2^depth = " +
                         std::to_string(multiple) + ", got " + shape_str(image.shape()));
    }

    std::vector<Tensor> skips;
    skips.reserve(encoder_.size());
    Tensor x = image;
    for (const FeatureBlock& stage : encoder_) {
        Tensor f = stage.forward(x);
        skips.push_back(f);
        x = max_pool2(f);
    }

    if (bottleneck_) x = bottleneck_->forward(x);

    for (size_t i = 0; i < decoder_.size(); ++i) {
        const UpStage& stage = decoder_[i];
        Tensor up = stage.up_conv.forward(upsample_nearest2(x));
        Tensor merged = concat({up, skips[skips.size() - 1 - i]}, 0);
        x = stage.block.forward(merged);
    }

    return sigmoid(head_.forward(x));
}

ParamList DATransNet::parameters() const {
    ParamList params;
    for (size_t i = 0; i < encoder_.size(); ++i) {
        encoder_[i].collect_params(params, "enc" + std::to_string(i));
    }
    if (bottleneck_) bottleneck_->collect_params(params, "gfem");
    for (size_t i = 0; i < decoder_.size(); ++i) {
        int level = static_cast<int>(decoder_.size() - 1 - i);
        std::string prefix = "up" + std::to_string(level);
        decoder_[i].up_conv.collect_params(params, prefix + ".upconv");
        decoder_[i].block.collect_params(params, prefix);
    }
    head_.collect_params(params, "head");
    return params;
}

int64_t DATransNet::param_count() const {
    int64_t n = 0;
    for (const NamedParam& p : parameters()) n += p.tensor.numel();
    return n;
}

// ---- checkpoint io -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'A', 'T', 'N'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw CheckpointError("truncated checkpoint: " + path);
    }
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& is, const std::string& path) {
    uint64_t lo = get_u32(is, path);
    uint64_t hi = get_u32(is, path);
    return lo | (hi << 32);
}

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<uint32_t>(entries.size()));
    for (const CheckpointEntry& e : entries) {
        put_u32(os, static_cast<uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_u32(os, static_cast<uint32_t>(e.shape.size()));
        for (int64_t d : e.shape) put_u64(os, static_cast<uint64_t>(d));
        for (float v : e.values) put_f32(os, v);
    }
    if (!os) throw IoError("failed writing checkpoint: " + path);
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw CheckpointError("bad checkpoint magic in " + path);
    }
    uint32_t version = get_u32(is, path);
    if (version != kVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " in " + path);
    }
    uint32_t count = get_u32(is, path);
    std::vector<CheckpointEntry> entries;
    entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        uint32_t name_len = get_u32(is, path);
        e.name.resize(name_len);
        if (!is.read(e.name.data(), name_len)) {
            throw CheckpointError("truncated checkpoint name in " + path);
        }
        uint32_t rank = get_u32(is, path);
        int64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            int64_t ext = static_cast<int64_t>(get_u64(is, path));
            e.shape.push_back(ext);
            numel *= ext;
        }
        e.values.resize(static_cast<size_t>(numel));
        for (int64_t v = 0; v < numel; ++v) {
            uint32_t bits = get_u32(is, path);
            float f;
            std::memcpy(&f, &bits, 4);
            e.values[static_cast<size_t>(v)] = f;
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void DATransNet::save_checkpoint(const std::string& path) const {
    std::vector<CheckpointEntry> entries;
    for (const NamedParam& p : parameters()) {
        CheckpointEntry e;
        e.name = p.name;
        e.shape = p.tensor.shape();
        e.values.reserve(static_cast<size_t>(p.tensor.numel()));
        for (double v : p.tensor.vec()) e.values.push_back(static_cast<float>(v));
        entries.push_back(std::move(e));
    }
    write_checkpoint(path, entries);
}

void DATransNet::load_checkpoint(const std::string& path) {
    std::vector<CheckpointEntry> entries = read_checkpoint(path);
    ParamList params = parameters();
    if (entries.size() != params.size()) {
        throw CheckpointError("checkpoint " + path + " holds " +
                              std::to_string(entries.size()) + " tensors, network expects " +
                              std::to_string(params.size()));
    }
    for (size_t i = 0; i < params.size(); ++i) {
        const CheckpointEntry& e = entries[i];
        NamedParam& p = params[i];
        if (e.name != p.name) {
            throw CheckpointError("checkpoint tensor '" + e.name + "' does not match expected '" +
                                  p.name + "' in " + path);
        }
        if (e.shape != p.tensor.shape()) {
            throw CheckpointError("checkpoint tensor '" + e.name + "' has shape " +
                                  shape_str(e.shape) + ", network expects " +
                                  shape_str(p.tensor.shape()));
        }
        for (size_t v = 0; v < e.values.size(); ++v) {
            p.tensor.data()[v] = static_cast<double>(e.values[v]);
        }
    }
}

}  // namespace datn
