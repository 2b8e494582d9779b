#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pyrflow/flow_field.hpp"
#include "pyrflow/image_io.hpp"

namespace pyrflow {

enum class FlowFileFormat { MiddleburyFlo, KittiPng16 };

inline constexpr float kFloMagic = 202021.25f;
/// Middlebury marks unknown flow with values above this magnitude.
inline constexpr float kFloUnknownThreshold = 1e9f;

/// Encodes: float magic, int32 width, int32 height, then row-major (u,v)
/// float pairs, all little-endian. Throws ValidationError if the field has
/// invalid pixels (the container has no mask).
std::vector<std::uint8_t> write_flo(const FlowField& flow);
/// Throws FormatError on a bad magic and LengthError on a short payload.
/// Non-finite or "unknown" (>1e9) vectors come back invalid and zeroed.
FlowField read_flo(std::span<const std::uint8_t> bytes);

void save_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField load_flo(const std::filesystem::path& path);

inline constexpr double kKittiScale = 64.0;
inline constexpr int kKittiOffset = 1 << 15;

/// Decodes (u_enc, v_enc, valid) planes: u = (u_enc - 2^15) / 64.
FlowField read_kitti_png(const Image16& planes);
/// Rounds to nearest; out-of-range values clamp to [0, 65535] and are
/// counted in `clamped` when given. Invalid pixels encode as zeros.
Image16 write_kitti_png(const FlowField& flow, std::size_t* clamped = nullptr);

void save_kitti_png(const std::filesystem::path& path, const FlowField& flow, std::size_t* clamped = nullptr);
FlowField load_kitti_png(const std::filesystem::path& path);

FlowField load_flow(const std::filesystem::path& path, FlowFileFormat format);
void save_flow(const std::filesystem::path& path, const FlowField& flow, FlowFileFormat format);

/// The 55-entry Middlebury color wheel (RY 15, YG 6, GC 4, CB 11, BM 13, MR 6).
const std::array<std::array<std::uint8_t, 3>, 55>& color_wheel();

/// Middlebury flow coloring. Magnitudes are divided by max_norm (default: the
/// largest valid magnitude in the field); invalid pixels are black.
Image8 flow_to_color(const FlowField& flow, std::optional<float> max_norm = std::nullopt);

}  // namespace pyrflow
