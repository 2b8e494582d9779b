#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pyrflow/tensor_ops.hpp"

namespace pyrflow {

/// Network widths and correlation lookup geometry.
///
/// The defaults are a desk-scale configuration; a full-size one is
/// {256, 128, 128, 128, 4, 4}.
struct ModelConfig {
    int feature_dim = 64;   // D, correlation feature channels
    int hidden_dim = 48;    // Dh, GRU state channels
    int context_dim = 16;   // Dc, context channels fed to every GRU step
    int motion_dim = 34;    // Dm, motion features including the 2 raw flow channels
    int corr_levels = 4;    // L
    int corr_radius = 4;    // r

    /// Throws ConfigError on any non-positive width or odd motion width.
    void validate() const;
    int corr_channels() const { return corr_levels * (2 * corr_radius + 1) * (2 * corr_radius + 1); }
    int gru_input_dim() const { return context_dim + motion_dim; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr int kUpsampleFactor = 4;
inline constexpr int kMaskChannels = 9 * kUpsampleFactor * kUpsampleFactor;

struct ParamSpec {
    std::string name;
    std::vector<int> dims;
    int fan_in = 0;  // 0 for biases
};

/// Every tensor the architecture reads, in archive order. Update-block
/// parameters ("update.*") appear once and serve both pyramid levels.
std::vector<ParamSpec> parameter_specs(const ModelConfig& config);

/// Named tensor archive for the encoders and the shared update block.
class ModelWeights {
public:
    explicit ModelWeights(ModelConfig config = {});

    const ModelConfig& config() const noexcept { return config_; }
    /// Throws ArchiveError when the entry is missing.
    const Tensor& get(const std::string& name) const;
    Tensor& mutable_entry(const std::string& name);
    void set(const std::string& name, Tensor value);
    const std::map<std::string, Tensor>& entries() const noexcept { return entries_; }

    /// Checks that the entries are exactly parameter_specs(config()).
    void validate() const;

    /// Archive layout, little-endian throughout:
    ///   "PRFW" | u16 version | 6 x u32 config (D, Dh, Dc, Dm, L, r)
    ///   | u32 count | count x { u16 name_len, name, u8 rank, rank x u32 dim, u64 offset }
    ///   | float32 blobs (offsets relative to the first blob byte)
    ///   | u32 CRC-32 of every preceding byte
    std::vector<std::uint8_t> serialize() const;
    static ModelWeights deserialize(std::span<const std::uint8_t> bytes);
    std::uint32_t checksum() const;

    void save(const std::filesystem::path& path) const;
    static ModelWeights load(const std::filesystem::path& path);

    friend bool operator==(const ModelWeights&, const ModelWeights&) = default;

private:
    ModelConfig config_;
    std::map<std::string, Tensor> entries_;
};

inline constexpr std::uint16_t kWeightsVersion = 1;

/// Seeded fan-in uniform initialization: weights in [-sqrt(6/fan_in),
/// sqrt(6/fan_in)), biases zero. Bitwise reproducible for a given seed.
ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed);

/// Same archive with every entry set to zero.
ModelWeights zero_weights(const ModelConfig& config);

}  // namespace pyrflow
