#pragma once

// Scalar reference implementations. Each one recomputes its result with
// straight nested loops and double accumulation where it matters, without
// calling into the production kernels, so the two can be compared.

#include <cstdint>
#include <vector>

#include "pyrflow/flow_field.hpp"
#include "pyrflow/tensor_ops.hpp"
#include "pyrflow/weights.hpp"

namespace pyrflow::oracle {

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding);
Tensor relu(const Tensor& t);

/// Sum of the in-frame corner values weighted by the tent kernel.
double bilinear(const Tensor& t, int channel, double x, double y);
Tensor avg_pool2(const Tensor& t);

/// Tensor[H1*W1, H2, W2] of <f1(p), f2(q)> / sqrt(D).
Tensor corr_volume(const Tensor& f1, const Tensor& f2);
/// Pyramid built from the oracle volume, sampled pixel by pixel.
Tensor lookup(const Tensor& volume, int source_height, int source_width, const FlowField& flow, int levels,
              int radius);

/// GRU on a single pixel, where each 3x3 convolution reduces to its center
/// tap. h and x are channel vectors.
std::vector<double> gru_pixel(const std::vector<double>& h, const std::vector<double>& x, const ModelWeights& w);

Tensor convex_upsample(const Tensor& flow, const Tensor& mask, int factor);
FlowField upsample2x(const FlowField& flow);

struct Trunk {
    Tensor quarter;
    Tensor eighth;
};
/// Encoder "fnet" or "cnet" as written-out conv/relu layers.
Trunk encoder(const Tensor& normalized_image, const ModelWeights& w, const char* prefix);

Tensor motion(const Tensor& lookup, const FlowField& flow, const ModelWeights& w);
Tensor gru(const Tensor& h, const Tensor& x, const ModelWeights& w);
Tensor flow_head(const Tensor& h, const ModelWeights& w);
Tensor mask_head(const Tensor& h, const ModelWeights& w);

/// Full two-level estimate recomputed step by step from the oracle pieces.
FlowField estimate_flow(const Tensor& image1, const Tensor& image2, const ModelWeights& w, int iterations);

/// Deterministic test signals.
Tensor random_tensor(std::vector<int> dims, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f);
FlowField random_flow(int height, int width, std::uint64_t seed, float magnitude);
/// Smooth RGB texture in [0,255], sampled at (x - shift_x, y - shift_y), so
/// texture(shift)(p + shift) == texture(0)(p).
Tensor bandlimited_texture(int height, int width, double shift_x, double shift_y);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace pyrflow::oracle
