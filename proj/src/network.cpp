#include "pyrflow/network.hpp"

#include <algorithm>
#include <string>

#include "pyrflow/error.hpp"

namespace pyrflow {

namespace {

struct TrunkOutput {
    Tensor quarter;
    Tensor eighth;
};

TrunkOutput run_trunk(const Tensor& image, const ModelWeights& w, const std::string& prefix) {
    if (image.rank() != 3 || image.channels() != 3) {
        throw ShapeError("encoder input must be Tensor[3,H,W], got " + image.shape_string());
    }
    if (image.height() % 8 != 0 || image.width() % 8 != 0) {
        throw ShapeError("encoder input dims must be divisible by 8, got " + image.shape_string());
    }
    Tensor x = relu(ConvLayer(w, prefix + ".stage1.conv1", 2)(image));
    x = relu(ConvLayer(w, prefix + ".stage1.conv2")(x));
    x = relu(ConvLayer(w, prefix + ".stage2.conv1", 2)(x));
    x = relu(ConvLayer(w, prefix + ".stage2.conv2")(x));
    Tensor quarter = x;
    x = relu(ConvLayer(w, prefix + ".stage3.conv1", 2)(x));
    x = relu(ConvLayer(w, prefix + ".stage3.conv2")(x));
    return {std::move(quarter), std::move(x)};
}

ContextLevel split_context(const Tensor& trunk, int hidden_dim) {
    return {tanh(slice_channels(trunk, 0, hidden_dim)),
            relu(slice_channels(trunk, hidden_dim, trunk.channels()))};
}

}  // namespace

PyramidFeatures feature_encode(const Tensor& image, const ModelWeights& weights) {
    auto out = run_trunk(image, weights, "fnet");
    return {std::move(out.eighth), std::move(out.quarter)};
}

PyramidContext context_encode(const Tensor& image1, const ModelWeights& weights) {
    auto out = run_trunk(image1, weights, "cnet");
    const int dh = weights.config().hidden_dim;
    return {split_context(out.eighth, dh), split_context(out.quarter, dh)};
}

ConvLayer::ConvLayer(const ModelWeights& weights, const std::string& name, int stride)
    : weight_(&weights.get(name + ".weight")), bias_(&weights.get(name + ".bias")), stride_(stride) {
    if (weight_->rank() != 4 || bias_->rank() != 1 || bias_->dim(0) != weight_->dim(0)) {
        throw ArchiveError("malformed conv entry '" + name + "'");
    }
}

Tensor ConvLayer::operator()(const Tensor& input) const {
    return conv2d(input, *weight_, bias_->data(), stride_, weight_->dim(2) / 2);
}

UpdateBlock::UpdateBlock(const ModelWeights& w)
    : config_(&w.config()),
      motion_corr_(w, "update.motion.corr"),
      motion_flow_(w, "update.motion.flow"),
      motion_fuse_(w, "update.motion.fuse"),
      gru_z_(w, "update.gru.z"),
      gru_r_(w, "update.gru.r"),
      gru_q_(w, "update.gru.q"),
      flow1_(w, "update.flow_head.conv1"),
      flow2_(w, "update.flow_head.conv2"),
      mask1_(w, "update.mask_head.conv1"),
      mask2_(w, "update.mask_head.conv2") {}

Tensor UpdateBlock::motion(const LookupField& corr, const FlowField& flow) const {
    const Tensor& c = corr.values;
    if (c.channels() != config_->corr_channels()) {
        throw ShapeError("lookup has " + std::to_string(c.channels()) + " channels, model expects " +
                         std::to_string(config_->corr_channels()));
    }
    if (c.height() != flow.height() || c.width() != flow.width()) {
        throw ShapeError("motion_encode: corr and flow spatial dims differ");
    }
    const Tensor flow_t = flow.to_tensor();
    const Tensor corr_feat = relu(motion_corr_(c));
    const Tensor flow_feat = relu(motion_flow_(flow_t));
    const Tensor fused = relu(motion_fuse_(concat_channels({&corr_feat, &flow_feat})));
    return concat_channels({&fused, &flow_t});
}

Tensor UpdateBlock::gru(const Tensor& h, const Tensor& x) const {
    if (h.rank() != 3 || h.channels() != config_->hidden_dim) throw ShapeError("gru: bad hidden state shape");
    if (x.rank() != 3 || x.channels() != config_->gru_input_dim()) throw ShapeError("gru: bad input shape");
    const Tensor hx = concat_channels({&h, &x});
    const Tensor z = sigmoid(gru_z_(hx));
    const Tensor r = sigmoid(gru_r_(hx));
    Tensor rh = r;
    for (std::size_t i = 0; i < rh.size(); ++i) rh.data()[i] *= h.data()[i];
    const Tensor q = tanh(gru_q_(concat_channels({&rh, &x})));
    Tensor out = h;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const float zi = z.data()[i];
        out.data()[i] = (1.0f - zi) * h.data()[i] + zi * q.data()[i];
    }
    return out;
}

Tensor UpdateBlock::flow_delta(const Tensor& h) const {
    if (h.rank() != 3 || h.channels() != config_->hidden_dim) throw ShapeError("flow_head: bad hidden shape");
    return flow2_(relu(flow1_(h)));
}

Tensor UpdateBlock::upsample_mask(const Tensor& h) const {
    if (h.rank() != 3 || h.channels() != config_->hidden_dim) throw ShapeError("mask_head: bad hidden shape");
    return mask2_(relu(mask1_(h)));
}

std::vector<const Tensor*> UpdateBlock::parameters() const {
    std::vector<const Tensor*> out;
    for (const ConvLayer* layer : {&motion_corr_, &motion_flow_, &motion_fuse_, &gru_z_, &gru_r_, &gru_q_,
                                   &flow1_, &flow2_, &mask1_, &mask2_}) {
        out.push_back(&layer->weight());
        out.push_back(&layer->bias());
    }
    return out;
}

Tensor motion_encode(const LookupField& corr, const FlowField& flow, const ModelWeights& weights) {
    return UpdateBlock(weights).motion(corr, flow);
}

Tensor gru_step(const Tensor& hidden, const Tensor& input, const ModelWeights& weights) {
    return UpdateBlock(weights).gru(hidden, input);
}

Tensor flow_head(const Tensor& hidden, const ModelWeights& weights) {
    return UpdateBlock(weights).flow_delta(hidden);
}

Tensor mask_head(const Tensor& hidden, const ModelWeights& weights) {
    return UpdateBlock(weights).upsample_mask(hidden);
}

Tensor convex_upsample(const Tensor& flow, const Tensor& mask_logits, int factor) {
    if (factor < 1 || mask_logits.rank() != 3 || mask_logits.channels() != 9 * factor * factor) {
        throw ConfigError("convex_upsample: mask must have 9*factor^2 channels");
    }
    if (flow.rank() != 3 || flow.channels() != 2) throw ShapeError("convex_upsample: flow must be [2,h,w]");
    const int h = flow.height(), w = flow.width();
    if (mask_logits.height() != h || mask_logits.width() != w) {
        throw ShapeError("convex_upsample: mask and flow spatial dims differ");
    }
    const int sub = factor * factor;
    const float scale = static_cast<float>(factor);
    Tensor out({2, h * factor, w * factor});
    float logits[9];
    float neighbors[2][9];
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int k = 0; k < 9; ++k) {
                const int ny = std::clamp(y + k / 3 - 1, 0, h - 1);
                const int nx = std::clamp(x + k % 3 - 1, 0, w - 1);
                neighbors[0][k] = scale * flow.at(0, ny, nx);
                neighbors[1][k] = scale * flow.at(1, ny, nx);
            }
            for (int sy = 0; sy < factor; ++sy) {
                for (int sx = 0; sx < factor; ++sx) {
                    for (int k = 0; k < 9; ++k) logits[k] = mask_logits.at(k * sub + sy * factor + sx, y, x);
                    const auto weights = softmax(logits);
                    for (int c = 0; c < 2; ++c) {
                        float acc = 0.0f;
                        for (int k = 0; k < 9; ++k) acc += weights[k] * neighbors[c][k];
                        out.at(c, y * factor + sy, x * factor + sx) = acc;
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace pyrflow
