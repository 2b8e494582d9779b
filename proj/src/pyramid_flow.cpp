#include "pyrflow/pyramid_flow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "pyrflow/correlation.hpp"
#include "pyrflow/error.hpp"
#include "pyrflow/network.hpp"

namespace pyrflow {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

int round_up8(int n) { return (n + 7) / 8 * 8; }

float clamped_bilinear(const Tensor& plane, float x, float y) {
    const int h = plane.height(), w = plane.width();
    x = std::clamp(x, 0.0f, static_cast<float>(w - 1));
    y = std::clamp(y, 0.0f, static_cast<float>(h - 1));
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const float ax = x - static_cast<float>(x0), ay = y - static_cast<float>(y0);
    const float top = (1.0f - ax) * plane.at(0, y0, x0) + ax * plane.at(0, y0, x1);
    const float bottom = (1.0f - ax) * plane.at(0, y1, x0) + ax * plane.at(0, y1, x1);
    return (1.0f - ay) * top + ay * bottom;
}

void run_level(const Tensor& f1, const Tensor& f2, const ContextLevel& ctx, const UpdateBlock& update,
               const ModelConfig& cfg, int iterations, FlowField& flow, Tensor& hidden, LevelTrace& trace) {
    const auto start = Clock::now();
    CorrelationVolume volume = build_corr_volume(f1, f2);
    trace.corr_volume_elements = volume.element_count();
    const CorrelationPyramid pyramid(std::move(volume), cfg.corr_levels);
    trace.corr_pyramid_elements = pyramid.element_count();
    trace.height = f1.height();
    trace.width = f1.width();
    trace.update_parameters = update.parameters();

    hidden = ctx.hidden_init;
    for (int it = 0; it < iterations; ++it) {
        const LookupField corr = lookup(pyramid, flow, cfg.corr_radius);
        const Tensor motion = update.motion(corr, flow);
        const Tensor input = concat_channels({&ctx.context, &motion});
        hidden = update.gru(hidden, input);
        const Tensor delta = update.flow_delta(hidden);
        for (int y = 0; y < flow.height(); ++y) {
            for (int x = 0; x < flow.width(); ++x) {
                flow.u(y, x) += delta.at(0, y, x);
                flow.v(y, x) += delta.at(1, y, x);
            }
        }
        trace.iterates.push_back(flow);
    }
    trace.seconds = seconds_since(start);
}

}  // namespace

PaddedImage pad_to_multiple8(const Tensor& image) {
    if (image.rank() != 3) throw ShapeError("pad_to_multiple8 expects a rank-3 image");
    const int c = image.channels(), h = image.height(), w = image.width();
    const int ph = round_up8(h), pw = round_up8(w);
    PaddedImage out{Tensor({c, ph, pw}), {ph - h, pw - w}};
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < ph; ++y) {
            for (int x = 0; x < pw; ++x) {
                out.image.at(ch, y, x) = image.at(ch, std::min(y, h - 1), std::min(x, w - 1));
            }
        }
    }
    return out;
}

Tensor crop_pad(const Tensor& padded, const PadSpec& pad) {
    if (padded.rank() != 3) throw ShapeError("crop_pad expects a rank-3 tensor");
    const int h = padded.height() - pad.bottom, w = padded.width() - pad.right;
    if (pad.bottom < 0 || pad.right < 0 || h < 1 || w < 1) throw ShapeError("crop_pad: pad exceeds tensor");
    Tensor out({padded.channels(), h, w});
    for (int ch = 0; ch < padded.channels(); ++ch) {
        for (int y = 0; y < h; ++y) {
            const float* src = padded.data().data() + (static_cast<std::size_t>(ch) * padded.height() + y) * padded.width();
            std::copy_n(src, w, &out.at(ch, y, 0));
        }
    }
    return out;
}

FlowField crop_pad(const FlowField& padded, const PadSpec& pad) {
    FlowField out(crop_pad(padded.u_plane(), pad), crop_pad(padded.v_plane(), pad));
    if (padded.has_mask()) {
        std::vector<std::uint8_t>& mask = out.mask();
        for (int y = 0; y < out.height(); ++y) {
            for (int x = 0; x < out.width(); ++x) {
                mask[static_cast<std::size_t>(y) * out.width() + x] = padded.valid(y, x) ? 1 : 0;
            }
        }
    }
    return out;
}

FlowField upsample2x_init(const FlowField& flow) {
    const int h = flow.height(), w = flow.width();
    FlowField out(2 * h, 2 * w);
    for (int y = 0; y < 2 * h; ++y) {
        const float sy = (static_cast<float>(y) + 0.5f) * 0.5f - 0.5f;
        for (int x = 0; x < 2 * w; ++x) {
            const float sx = (static_cast<float>(x) + 0.5f) * 0.5f - 0.5f;
            out.u(y, x) = 2.0f * clamped_bilinear(flow.u_plane(), sx, sy);
            out.v(y, x) = 2.0f * clamped_bilinear(flow.v_plane(), sx, sy);
        }
    }
    return out;
}

Tensor normalize_image(const Tensor& image) {
    Tensor out = image;
    for (float& v : out.data()) v = 2.0f * (v / 255.0f) - 1.0f;
    return out;
}

FlowEstimate estimate_flow(const Tensor& image1, const Tensor& image2, const ModelWeights& weights,
                           const FlowOptions& options) {
    const auto start = Clock::now();
    if (image1.rank() != 3 || image1.channels() != 3 || image1.dims() != image2.dims()) {
        throw ShapeError("estimate_flow needs two Tensor[3,H,W] images of equal dims, got " +
                         image1.shape_string() + " and " + image2.shape_string());
    }
    if (options.iterations < 1) throw ConfigError("iterations must be >= 1");
    weights.validate();
    const ModelConfig& cfg = weights.config();

    const PaddedImage p1 = pad_to_multiple8(image1);
    const PaddedImage p2 = pad_to_multiple8(image2);
    const int ph = p1.image.height(), pw = p1.image.width();
    for (int stride : {8, 4}) {
        const int limit = max_pyramid_levels(ph / stride, pw / stride);
        if (cfg.corr_levels > limit) {
            throw ConfigError("corr_levels " + std::to_string(cfg.corr_levels) + " too deep for the 1/" +
                              std::to_string(stride) + " grid of a " + std::to_string(ph) + "x" +
                              std::to_string(pw) + " padded image (max " + std::to_string(limit) + ")");
        }
    }

    const Tensor n1 = normalize_image(p1.image);
    const Tensor n2 = normalize_image(p2.image);
    const PyramidFeatures feat1 = feature_encode(n1, weights);
    const PyramidFeatures feat2 = feature_encode(n2, weights);
    const PyramidContext ctx = context_encode(n1, weights);
    const UpdateBlock update(weights);

    FlowEstimate result;
    result.trace.pad = p1.pad;
    result.trace.levels.resize(2);
    LevelTrace& coarse = result.trace.levels[0];
    LevelTrace& fine = result.trace.levels[1];
    coarse.stride = 8;
    fine.stride = 4;

    Tensor hidden;
    FlowField flow(feat1.eighth.height(), feat1.eighth.width());
    run_level(feat1.eighth, feat2.eighth, ctx.eighth, update, cfg, options.iterations, flow, hidden, coarse);

    flow = upsample2x_init(flow);
    run_level(feat1.quarter, feat2.quarter, ctx.quarter, update, cfg, options.iterations, flow, hidden, fine);

    const Tensor full = convex_upsample(flow.to_tensor(), update.upsample_mask(hidden), kUpsampleFactor);
    result.flow = crop_pad(FlowField::from_tensor(full), p1.pad);
    if (!result.flow.u_plane().all_finite() || !result.flow.v_plane().all_finite()) {
        throw InvariantError("estimate_flow produced non-finite flow");
    }
    result.trace.seconds = seconds_since(start);
    return result;
}

}  // namespace pyrflow
