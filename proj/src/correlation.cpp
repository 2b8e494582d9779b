#include "pyrflow/correlation.hpp"

#include <cmath>
#include <string>

#include "pyrflow/error.hpp"

namespace pyrflow {

CorrelationVolume build_corr_volume(const Tensor& f1, const Tensor& f2) {
    if (f1.rank() != 3 || f2.rank() != 3) throw ShapeError("correlation features must be rank 3");
    if (f1.channels() != f2.channels()) {
        throw ShapeError("feature dim mismatch: " + f1.shape_string() + " vs " + f2.shape_string());
    }
    const int d = f1.channels();
    const int h1 = f1.height(), w1 = f1.width(), h2 = f2.height(), w2 = f2.width();
    const std::size_t n1 = static_cast<std::size_t>(h1) * w1;
    const std::size_t n2 = static_cast<std::size_t>(h2) * w2;
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));

    CorrelationVolume vol{Tensor({static_cast<int>(n1), h2, w2}), h1, w1, d};
    float* out = vol.values.data().data();
    const float* a = f1.data().data();
    const float* b = f2.data().data();
    for (std::size_t p = 0; p < n1; ++p) {
        float* row = out + p * n2;
        // Feature-major accumulation keeps the inner loop contiguous.
        for (int c = 0; c < d; ++c) {
            const float ac = a[c * n1 + p];
            const float* bc = b + c * n2;
            for (std::size_t q = 0; q < n2; ++q) row[q] += ac * bc[q];
        }
        for (std::size_t q = 0; q < n2; ++q) row[q] *= scale;
    }
    return vol;
}

int max_pyramid_levels(int target_height, int target_width) {
    int m = std::min(target_height, target_width);
    int levels = 1;
    while (m >= 2) {
        m = (m + 1) / 2;
        ++levels;
    }
    return levels;
}

CorrelationPyramid::CorrelationPyramid(CorrelationVolume volume, int levels)
    : source_height_(volume.source_height),
      source_width_(volume.source_width),
      feature_dim_(volume.feature_dim) {
    if (levels < 1) throw ConfigError("correlation pyramid needs at least one level");
    const int limit = max_pyramid_levels(volume.values.height(), volume.values.width());
    if (levels > limit) {
        throw ConfigError("correlation pyramid of " + std::to_string(levels) + " levels exceeds " +
                          std::to_string(limit) + " allowed for target grid " +
                          volume.values.shape_string());
    }
    levels_.reserve(static_cast<std::size_t>(levels));
    levels_.push_back(std::move(volume.values));
    for (int l = 1; l < levels; ++l) levels_.push_back(avg_pool2(levels_.back()));
}

std::size_t CorrelationPyramid::element_count() const {
    std::size_t n = 0;
    for (const Tensor& t : levels_) n += t.size();
    return n;
}

LookupField lookup(const CorrelationPyramid& pyramid, const FlowField& flow, int radius) {
    const int h1 = pyramid.source_height(), w1 = pyramid.source_width();
    if (flow.height() != h1 || flow.width() != w1) {
        throw ShapeError("lookup flow dims must equal source dims");
    }
    if (radius < 0) throw ConfigError("lookup radius must be >= 0");
    const int span = 2 * radius + 1;
    const int levels = pyramid.level_count();
    LookupField out{Tensor({lookup_channels(levels, radius), h1, w1}), radius, levels};

    for (int l = 0; l < levels; ++l) {
        const Tensor& level = pyramid.level(l);
        const int lh = level.height(), lw = level.width();
        const float inv = 1.0f / static_cast<float>(1 << l);
        for (int y = 0; y < h1; ++y) {
            for (int x = 0; x < w1; ++x) {
                const float* slice = level.plane(y * w1 + x);
                const float cx = (static_cast<float>(x) + flow.u(y, x)) * inv;
                const float cy = (static_cast<float>(y) + flow.v(y, x)) * inv;
                for (int dy = -radius; dy <= radius; ++dy) {
                    for (int dx = -radius; dx <= radius; ++dx) {
                        const int ch = l * span * span + (dy + radius) * span + (dx + radius);
                        out.values.at(ch, y, x) = bilinear_at(slice, lh, lw, cx + static_cast<float>(dx),
                                                              cy + static_cast<float>(dy));
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace pyrflow
