#pragma once

#include <cstddef>
#include <vector>

#include "pyrflow/flow_field.hpp"
#include "pyrflow/tensor_ops.hpp"
#include "pyrflow/weights.hpp"

namespace pyrflow {

inline constexpr int kDefaultIterations = 12;

/// Replicate padding added on the bottom and right edges.
struct PadSpec {
    int bottom = 0;
    int right = 0;
    friend bool operator==(const PadSpec&, const PadSpec&) = default;
};

struct PaddedImage {
    Tensor image;
    PadSpec pad;
};

/// Pads a rank-3 image to the next multiple of 8 in both dims.
PaddedImage pad_to_multiple8(const Tensor& image);
Tensor crop_pad(const Tensor& padded, const PadSpec& pad);
FlowField crop_pad(const FlowField& padded, const PadSpec& pad);

/// Bilinear 2x upsampling (half-pixel aligned, edge clamped) with values
/// doubled, used to seed the quarter-resolution level from the eighth.
FlowField upsample2x_init(const FlowField& flow);

/// Maps [0,255] pixels to [-1,1].
Tensor normalize_image(const Tensor& image);

struct FlowOptions {
    int iterations = kDefaultIterations;  // per pyramid level
};

struct LevelTrace {
    int stride = 0;  // 8 or 4
    int height = 0;
    int width = 0;
    std::vector<FlowField> iterates;  // flow after each update
    std::size_t corr_volume_elements = 0;   // (h*w)^2
    std::size_t corr_pyramid_elements = 0;  // summed over correlation levels
    double seconds = 0.0;
    /// Archive tensors the update block read at this level.
    std::vector<const Tensor*> update_parameters;
};

struct InferenceTrace {
    std::vector<LevelTrace> levels;  // eighth, then quarter
    PadSpec pad;
    double seconds = 0.0;
};

struct FlowEstimate {
    FlowField flow;
    InferenceTrace trace;
};

/// Two-level coarse-to-fine estimate from image1 to image2 (Tensor[3,H,W],
/// pixel values in [0,255]). The eighth level starts from zero flow; its
/// result, upsampled 2x, seeds the quarter level; the quarter result is
/// convex-upsampled 4x and cropped back to H x W.
FlowEstimate estimate_flow(const Tensor& image1, const Tensor& image2, const ModelWeights& weights,
                           const FlowOptions& options = {});

}  // namespace pyrflow
