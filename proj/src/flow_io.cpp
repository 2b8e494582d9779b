#include "pyrflow/flow_io.hpp"

#include <algorithm>
#include <cmath>

#include "byte_io.hpp"
#include "pyrflow/error.hpp"

namespace pyrflow {

std::vector<std::uint8_t> write_flo(const FlowField& flow) {
    if (flow.valid_count() != flow.pixel_count()) {
        throw ValidationError(".flo has no validity mask; field has invalid pixels");
    }
    detail::ByteWriter w;
    w.put<float>(kFloMagic);
    w.put<std::int32_t>(flow.width());
    w.put<std::int32_t>(flow.height());
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            w.put<float>(flow.u(y, x));
            w.put<float>(flow.v(y, x));
        }
    }
    return std::move(w.bytes());
}

FlowField read_flo(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    if (bytes.size() < 4) throw LengthError(".flo shorter than its magic");
    if (r.get<float>() != kFloMagic) throw FormatError("bad .flo magic");
    const auto width = r.get<std::int32_t>();
    const auto height = r.get<std::int32_t>();
    if (width < 1 || height < 1) throw FormatError("bad .flo dims");
    const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 8;
    if (r.remaining() < need) throw LengthError("truncated .flo payload");
    if (r.remaining() > need) throw FormatError("trailing bytes after .flo payload");

    FlowField flow(height, width);
    bool any_invalid = false;
    std::vector<std::uint8_t> mask(flow.pixel_count(), 1);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const float u = r.get<float>();
            const float v = r.get<float>();
            const bool ok = std::isfinite(u) && std::isfinite(v) && std::fabs(u) <= kFloUnknownThreshold &&
                            std::fabs(v) <= kFloUnknownThreshold;
            if (ok) {
                flow.u(y, x) = u;
                flow.v(y, x) = v;
            } else {
                mask[static_cast<std::size_t>(y) * width + x] = 0;
                any_invalid = true;
            }
        }
    }
    if (any_invalid) flow.set_mask(std::move(mask));
    return flow;
}

void save_flo(const std::filesystem::path& path, const FlowField& flow) {
    detail::write_file(path.string(), write_flo(flow));
}

FlowField load_flo(const std::filesystem::path& path) { return read_flo(detail::read_file(path.string())); }

FlowField read_kitti_png(const Image16& planes) {
    if (planes.channels != 3) throw ShapeError("KITTI flow needs 3 planes (u, v, valid)");
    FlowField flow(planes.height, planes.width);
    std::vector<std::uint8_t>& mask = flow.mask();
    for (int y = 0; y < planes.height; ++y) {
        for (int x = 0; x < planes.width; ++x) {
            const bool valid = planes.at(2, y, x) != 0;
            mask[static_cast<std::size_t>(y) * planes.width + x] = valid ? 1 : 0;
            if (!valid) continue;
            flow.u(y, x) = static_cast<float>((planes.at(0, y, x) - kKittiOffset) / kKittiScale);
            flow.v(y, x) = static_cast<float>((planes.at(1, y, x) - kKittiOffset) / kKittiScale);
        }
    }
    return flow;
}

Image16 write_kitti_png(const FlowField& flow, std::size_t* clamped) {
    Image16 planes(3, flow.height(), flow.width());
    std::size_t clamp_count = 0;
    auto encode = [&](float value) -> std::uint16_t {
        const double raw = std::round(static_cast<double>(value) * kKittiScale + kKittiOffset);
        if (raw < 0.0 || raw > 65535.0) ++clamp_count;
        return static_cast<std::uint16_t>(std::clamp(raw, 0.0, 65535.0));
    };
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            if (!flow.valid(y, x)) continue;
            planes.at(0, y, x) = encode(flow.u(y, x));
            planes.at(1, y, x) = encode(flow.v(y, x));
            planes.at(2, y, x) = 1;
        }
    }
    if (clamped) *clamped = clamp_count;
    return planes;
}

void save_kitti_png(const std::filesystem::path& path, const FlowField& flow, std::size_t* clamped) {
    write_png16(path, write_kitti_png(flow, clamped));
}

FlowField load_kitti_png(const std::filesystem::path& path) { return read_kitti_png(read_png16(path)); }

FlowField load_flow(const std::filesystem::path& path, FlowFileFormat format) {
    return format == FlowFileFormat::MiddleburyFlo ? load_flo(path) : load_kitti_png(path);
}

void save_flow(const std::filesystem::path& path, const FlowField& flow, FlowFileFormat format) {
    if (format == FlowFileFormat::MiddleburyFlo) {
        save_flo(path, flow);
    } else {
        save_kitti_png(path, flow);
    }
}

const std::array<std::array<std::uint8_t, 3>, 55>& color_wheel() {
    static const auto wheel = [] {
        std::array<std::array<std::uint8_t, 3>, 55> w{};
        constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
        auto u8 = [](int v) { return static_cast<std::uint8_t>(v); };
        int k = 0;
        for (int i = 0; i < RY; ++i) w[k++] = {255, u8(255 * i / RY), 0};
        for (int i = 0; i < YG; ++i) w[k++] = {u8(255 - 255 * i / YG), 255, 0};
        for (int i = 0; i < GC; ++i) w[k++] = {0, 255, u8(255 * i / GC)};
        for (int i = 0; i < CB; ++i) w[k++] = {0, u8(255 - 255 * i / CB), 255};
        for (int i = 0; i < BM; ++i) w[k++] = {u8(255 * i / BM), 0, 255};
        for (int i = 0; i < MR; ++i) w[k++] = {255, 0, u8(255 - 255 * i / MR)};
        return w;
    }();
    return wheel;
}

Image8 flow_to_color(const FlowField& flow, std::optional<float> max_norm) {
    const int h = flow.height(), w = flow.width();
    float norm = 0.0f;
    if (max_norm) {
        norm = *max_norm;
    } else {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (flow.valid(y, x)) norm = std::max(norm, std::hypot(flow.u(y, x), flow.v(y, x)));
            }
        }
    }
    if (!(norm > 0.0f)) norm = 1.0f;

    const auto& wheel = color_wheel();
    const int ncols = static_cast<int>(wheel.size());
    Image8 img(3, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!flow.valid(y, x)) continue;
            const float fx = flow.u(y, x) / norm;
            const float fy = flow.v(y, x) / norm;
            const float rad = std::sqrt(fx * fx + fy * fy);
            const float a = std::atan2(-fy, -fx) / static_cast<float>(M_PI);
            const float fk = (a + 1.0f) / 2.0f * static_cast<float>(ncols - 1);
            const int k0 = static_cast<int>(fk);
            const int k1 = (k0 + 1) % ncols;
            const float f = fk - static_cast<float>(k0);
            for (int b = 0; b < 3; ++b) {
                const float col0 = wheel[k0][b] / 255.0f;
                const float col1 = wheel[k1][b] / 255.0f;
                float col = (1.0f - f) * col0 + f * col1;
                if (rad <= 1.0f) {
                    col = 1.0f - rad * (1.0f - col);
                } else {
                    col *= 0.75f;
                }
                img.at(b, y, x) = static_cast<std::uint8_t>(255.0f * col);
            }
        }
    }
    return img;
}

}  // namespace pyrflow
