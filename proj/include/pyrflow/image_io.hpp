#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pyrflow/tensor_ops.hpp"

namespace pyrflow {

/// Channel-planar raster (channels, height, width), width fastest.
template <typename Sample>
struct Raster {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<Sample> data;

    Raster() = default;
    Raster(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w) {}

    Sample& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    Sample at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    friend bool operator==(const Raster&, const Raster&) = default;
};

using Image8 = Raster<std::uint8_t>;
using Image16 = Raster<std::uint16_t>;

/// 8-bit PNG (gray or RGB; palette/alpha are expanded/stripped, 16-bit
/// reduced), binary PGM (P5) or PPM (P6), chosen by extension.
Image8 read_image8(const std::filesystem::path& path);
/// PNG when the extension is .png, PPM/PGM otherwise.
void write_image8(const std::filesystem::path& path, const Image8& image);

/// 16-bit RGB PNG, samples kept verbatim.
Image16 read_png16(const std::filesystem::path& path);
void write_png16(const std::filesystem::path& path, const Image16& image);

/// Tensor[3,H,W] with values in [0,255]; gray input is replicated.
Tensor image_to_tensor(const Image8& image);

}  // namespace pyrflow
