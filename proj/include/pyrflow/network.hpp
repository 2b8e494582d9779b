#pragma once

#include <vector>

#include "pyrflow/correlation.hpp"
#include "pyrflow/flow_field.hpp"
#include "pyrflow/tensor_ops.hpp"
#include "pyrflow/weights.hpp"

namespace pyrflow {

/// Feature maps at strides 8 and 4 from one trunk; the stride-4 map is the
/// stage-2 tap of the same trunk that produces the stride-8 map.
struct PyramidFeatures {
    Tensor eighth;   // [D, H/8, W/8]
    Tensor quarter;  // [D, H/4, W/4]
};

struct ContextLevel {
    Tensor hidden_init;  // [Dh,.,.], tanh of the first Dh trunk channels
    Tensor context;      // [Dc,.,.], relu of the remaining channels
};

struct PyramidContext {
    ContextLevel eighth;
    ContextLevel quarter;
};

/// `image` is Tensor[3,H,W] normalized to [-1,1], H and W divisible by 8.
PyramidFeatures feature_encode(const Tensor& image, const ModelWeights& weights);
PyramidContext context_encode(const Tensor& image1, const ModelWeights& weights);

/// 2-D convolution bound to one archive entry pair (<name>.weight, <name>.bias),
/// "same" padding.
class ConvLayer {
public:
    ConvLayer(const ModelWeights& weights, const std::string& name, int stride = 1);
    Tensor operator()(const Tensor& input) const;
    const Tensor& weight() const { return *weight_; }
    const Tensor& bias() const { return *bias_; }

private:
    const Tensor* weight_;
    const Tensor* bias_;
    int stride_;
};

/// The recurrent refinement unit: motion encoder, ConvGRU, flow head and
/// upsample-mask head. It holds references into one archive; every pyramid
/// level runs through the same instance.
class UpdateBlock {
public:
    explicit UpdateBlock(const ModelWeights& weights);

    /// [Dm,h,w]: fused corr/flow features followed by the raw flow.
    Tensor motion(const LookupField& corr, const FlowField& flow) const;
    Tensor gru(const Tensor& hidden, const Tensor& input) const;
    Tensor flow_delta(const Tensor& hidden) const;
    Tensor upsample_mask(const Tensor& hidden) const;

    /// Addresses of the bound archive tensors, in a fixed order.
    std::vector<const Tensor*> parameters() const;

private:
    const ModelConfig* config_;
    ConvLayer motion_corr_, motion_flow_, motion_fuse_;
    ConvLayer gru_z_, gru_r_, gru_q_;
    ConvLayer flow1_, flow2_;
    ConvLayer mask1_, mask2_;
};

Tensor motion_encode(const LookupField& corr, const FlowField& flow, const ModelWeights& weights);

/// z = sigmoid(conv[h;x]), r = sigmoid(conv[h;x]), q = tanh(conv[r*h;x]),
/// h' = (1-z)*h + z*q.
Tensor gru_step(const Tensor& hidden, const Tensor& input, const ModelWeights& weights);

Tensor flow_head(const Tensor& hidden, const ModelWeights& weights);

/// Raw logits, kMaskChannels = 9 * 4 * 4 channels.
Tensor mask_head(const Tensor& hidden, const ModelWeights& weights);

/// Each fine pixel (factor*y + sy, factor*x + sx) is the softmax-weighted
/// combination of the 3x3 coarse neighborhood of (y, x), replicate padded,
/// scaled by `factor`. Logit for tap k = (dy+1)*3 + (dx+1) at subpixel
/// (sy, sx) sits in channel k*factor^2 + sy*factor + sx.
Tensor convex_upsample(const Tensor& flow, const Tensor& mask_logits, int factor = kUpsampleFactor);

}  // namespace pyrflow
