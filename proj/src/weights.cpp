#include "pyrflow/weights.hpp"

#include <cmath>
#include <random>
#include <set>

#include <zlib.h>

#include "byte_io.hpp"
#include "pyrflow/error.hpp"

namespace pyrflow {

namespace {

constexpr char kMagic[4] = {'P', 'R', 'F', 'W'};

void add_conv(std::vector<ParamSpec>& specs, const std::string& name, int c_out, int c_in, int k) {
    specs.push_back({name + ".weight", {c_out, c_in, k, k}, c_in * k * k});
    specs.push_back({name + ".bias", {c_out}, 0});
}

// Three stride-2 stages of two 3x3 convs; the quarter-resolution tap is the
// output of stage 2, so stages 2 and 3 carry the full output width.
void add_encoder(std::vector<ParamSpec>& specs, const std::string& prefix, int out) {
    const int narrow = std::max(1, out / 2);
    add_conv(specs, prefix + ".stage1.conv1", narrow, 3, 3);
    add_conv(specs, prefix + ".stage1.conv2", narrow, narrow, 3);
    add_conv(specs, prefix + ".stage2.conv1", out, narrow, 3);
    add_conv(specs, prefix + ".stage2.conv2", out, out, 3);
    add_conv(specs, prefix + ".stage3.conv1", out, out, 3);
    add_conv(specs, prefix + ".stage3.conv2", out, out, 3);
}

}  // namespace

void ModelConfig::validate() const {
    if (feature_dim < 1 || hidden_dim < 1 || context_dim < 1) {
        throw ConfigError("feature, hidden and context dims must be >= 1");
    }
    if (motion_dim < 4 || motion_dim % 2 != 0) {
        throw ConfigError("motion dim must be even and >= 4 (fused channels + 2 flow channels)");
    }
    if (corr_levels < 1) throw ConfigError("corr_levels must be >= 1");
    if (corr_radius < 0) throw ConfigError("corr_radius must be >= 0");
}

std::vector<ParamSpec> parameter_specs(const ModelConfig& config) {
    config.validate();
    std::vector<ParamSpec> specs;
    add_encoder(specs, "fnet", config.feature_dim);
    add_encoder(specs, "cnet", config.hidden_dim + config.context_dim);

    const int fused = config.motion_dim - 2;
    add_conv(specs, "update.motion.corr", 2 * fused, config.corr_channels(), 1);
    add_conv(specs, "update.motion.flow", fused / 2, 2, 3);
    add_conv(specs, "update.motion.fuse", fused, 2 * fused + fused / 2, 3);

    const int gru_in = config.hidden_dim + config.gru_input_dim();
    add_conv(specs, "update.gru.z", config.hidden_dim, gru_in, 3);
    add_conv(specs, "update.gru.r", config.hidden_dim, gru_in, 3);
    add_conv(specs, "update.gru.q", config.hidden_dim, gru_in, 3);

    add_conv(specs, "update.flow_head.conv1", config.hidden_dim, config.hidden_dim, 3);
    add_conv(specs, "update.flow_head.conv2", 2, config.hidden_dim, 3);
    add_conv(specs, "update.mask_head.conv1", config.hidden_dim, config.hidden_dim, 3);
    add_conv(specs, "update.mask_head.conv2", kMaskChannels, config.hidden_dim, 1);
    return specs;
}

ModelWeights::ModelWeights(ModelConfig config) : config_(config) { config_.validate(); }

const Tensor& ModelWeights::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ArchiveError("weight archive has no entry '" + name + "'");
    return it->second;
}

Tensor& ModelWeights::mutable_entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ArchiveError("weight archive has no entry '" + name + "'");
    return it->second;
}

void ModelWeights::set(const std::string& name, Tensor value) { entries_[name] = std::move(value); }

void ModelWeights::validate() const {
    const auto specs = parameter_specs(config_);
    std::set<std::string> expected;
    for (const auto& spec : specs) {
        expected.insert(spec.name);
        const Tensor& t = get(spec.name);
        if (t.dims() != spec.dims) {
            throw ArchiveError("entry '" + spec.name + "' has dims " + t.shape_string() +
                               ", architecture expects " + Tensor(spec.dims).shape_string());
        }
    }
    for (const auto& [name, t] : entries_) {
        if (!expected.count(name)) throw ArchiveError("unexpected archive entry '" + name + "'");
    }
}

std::vector<std::uint8_t> ModelWeights::serialize() const {
    detail::ByteWriter w;
    w.put_bytes(kMagic, 4);
    w.put<std::uint16_t>(kWeightsVersion);
    for (int v : {config_.feature_dim, config_.hidden_dim, config_.context_dim, config_.motion_dim,
                  config_.corr_levels, config_.corr_radius}) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(entries_.size()));
    std::uint64_t offset = 0;
    for (const auto& [name, t] : entries_) {
        w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
        w.put_bytes(name.data(), name.size());
        w.put<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
        for (int d : t.dims()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
        w.put<std::uint64_t>(offset);
        offset += t.size() * sizeof(float);
    }
    for (const auto& [name, t] : entries_) {
        for (float v : t.data()) w.put<float>(v);
    }
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(0L, w.bytes().data(), static_cast<uInt>(w.bytes().size())));
    w.put<std::uint32_t>(crc);
    return std::move(w.bytes());
}

ModelWeights ModelWeights::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 + 2 + 4) throw ArchiveError("weight archive truncated");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ArchiveError("bad weight archive magic");
    const std::size_t body = bytes.size() - 4;
    detail::ByteReader tail(bytes.subspan(body));
    const auto stored_crc = tail.get<std::uint32_t>();
    const auto actual_crc = static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(body)));
    if (stored_crc != actual_crc) throw ArchiveError("weight archive checksum mismatch");

    struct Record {
        std::string name;
        std::vector<int> dims;
        std::uint64_t offset;
    };
    try {
        detail::ByteReader r(bytes.first(body));
        r.seek(4);
        const auto version = r.get<std::uint16_t>();
        if (version != kWeightsVersion) {
            throw ArchiveError("unsupported weight archive version " + std::to_string(version));
        }
        ModelConfig cfg;
        for (int* field : {&cfg.feature_dim, &cfg.hidden_dim, &cfg.context_dim, &cfg.motion_dim,
                           &cfg.corr_levels, &cfg.corr_radius}) {
            *field = static_cast<int>(r.get<std::uint32_t>());
        }
        ModelWeights weights(cfg);
        const auto count = r.get<std::uint32_t>();
        std::vector<Record> records;
        for (std::uint32_t i = 0; i < count; ++i) {
            Record rec;
            rec.name = r.get_string(r.get<std::uint16_t>());
            const int rank = r.get<std::uint8_t>();
            for (int k = 0; k < rank; ++k) rec.dims.push_back(static_cast<int>(r.get<std::uint32_t>()));
            rec.offset = r.get<std::uint64_t>();
            records.push_back(std::move(rec));
        }
        const std::size_t blob_start = r.position();
        std::uint64_t expected_offset = 0;
        for (auto& rec : records) {
            if (rec.offset != expected_offset) throw ArchiveError("manifest offset mismatch for '" + rec.name + "'");
            std::size_t n = 1;
            for (int d : rec.dims) n *= static_cast<std::size_t>(d);
            r.seek(blob_start + rec.offset);
            std::vector<float> data(n);
            for (float& v : data) v = r.get<float>();
            expected_offset += n * sizeof(float);
            weights.set(rec.name, Tensor(rec.dims, std::move(data)));
        }
        if (blob_start + expected_offset != body) throw ArchiveError("trailing bytes in weight archive");
        weights.validate();
        return weights;
    } catch (const LengthError& e) {
        throw ArchiveError(std::string("weight archive truncated: ") + e.what());
    } catch (const ShapeError& e) {
        throw ArchiveError(std::string("weight archive malformed: ") + e.what());
    }
}

std::uint32_t ModelWeights::checksum() const {
    const auto bytes = serialize();
    detail::ByteReader tail(std::span<const std::uint8_t>(bytes).subspan(bytes.size() - 4));
    return tail.get<std::uint32_t>();
}

void ModelWeights::save(const std::filesystem::path& path) const { detail::write_file(path.string(), serialize()); }

ModelWeights ModelWeights::load(const std::filesystem::path& path) {
    return deserialize(detail::read_file(path.string()));
}

ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed) {
    ModelWeights weights(config);
    std::mt19937_64 rng(seed);
    for (const auto& spec : parameter_specs(config)) {
        Tensor t(spec.dims);
        if (spec.fan_in > 0) {
            const float bound = static_cast<float>(std::sqrt(6.0 / spec.fan_in));
            for (float& v : t.data()) {
                // 24 high bits -> [0,1), exact in float.
                const float unit = static_cast<float>(rng() >> 40) * 0x1.0p-24f;
                v = bound * (2.0f * unit - 1.0f);
            }
        }
        weights.set(spec.name, std::move(t));
    }
    return weights;
}

ModelWeights zero_weights(const ModelConfig& config) {
    ModelWeights weights(config);
    for (const auto& spec : parameter_specs(config)) weights.set(spec.name, Tensor(spec.dims));
    return weights;
}

}  // namespace pyrflow
