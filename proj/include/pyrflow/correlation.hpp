#pragma once

#include <cstddef>
#include <vector>

#include "pyrflow/flow_field.hpp"
#include "pyrflow/tensor_ops.hpp"

namespace pyrflow {

/// All-pairs similarity between two feature maps. values is
/// Tensor[H1*W1, H2, W2]: channel p = y1*W1 + x1 holds the similarity of
/// source pixel p with every target pixel.
struct CorrelationVolume {
    Tensor values;
    int source_height = 0;
    int source_width = 0;
    int feature_dim = 0;

    /// H1*W1*H2*W2; grows quadratically with resolution.
    std::size_t element_count() const { return values.size(); }
};

/// Entry (p, q) = <f1(p), f2(q)> / sqrt(D).
CorrelationVolume build_corr_volume(const Tensor& f1, const Tensor& f2);

/// Largest level count build_pyramid accepts for a target grid: pooling
/// continues until the smaller target dim reaches 1.
int max_pyramid_levels(int target_height, int target_width);

class CorrelationPyramid {
public:
    /// Level 0 is the volume; level l+1 is avg_pool2 of level l over the
    /// target dims. Throws ConfigError when `levels` exceeds
    /// max_pyramid_levels.
    CorrelationPyramid(CorrelationVolume volume, int levels);

    int level_count() const { return static_cast<int>(levels_.size()); }
    const Tensor& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }
    int source_height() const { return source_height_; }
    int source_width() const { return source_width_; }
    int feature_dim() const { return feature_dim_; }
    /// Stored values summed over all levels.
    std::size_t element_count() const;

private:
    std::vector<Tensor> levels_;
    int source_height_;
    int source_width_;
    int feature_dim_;
};

inline CorrelationPyramid build_pyramid(CorrelationVolume volume, int levels) {
    return CorrelationPyramid(std::move(volume), levels);
}

/// Sampled correlation window around each displaced source pixel.
///
/// Channel order: level-major, then offset rows (dy = -r..r), then offset
/// columns (dx = -r..r), i.e. channel = l*(2r+1)^2 + (dy+r)*(2r+1) + (dx+r).
struct LookupField {
    Tensor values;  // [L*(2r+1)^2, H1, W1]
    int radius = 0;
    int levels = 0;
};

inline int lookup_channels(int levels, int radius) {
    return levels * (2 * radius + 1) * (2 * radius + 1);
}

/// For source pixel p, level l and offset d, samples level l of p's slice at
/// (p + flow(p)) / 2^l + d with zero border.
LookupField lookup(const CorrelationPyramid& pyramid, const FlowField& flow, int radius);

}  // namespace pyrflow
