#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pyrflow/data_pipeline.hpp"
#include "pyrflow/error.hpp"
#include "pyrflow/pyramid_flow.hpp"

using namespace pyrflow;

namespace {

ModelConfig small_config(int levels = 2) {
    ModelConfig c;
    c.feature_dim = 12;
    c.hidden_dim = 8;
    c.context_dim = 4;
    c.motion_dim = 10;
    c.corr_levels = levels;
    c.corr_radius = 2;
    return c;
}

// Content periodic with period 32 in both axes, so an integer shift of (8,8)
// is an exact translation of the whole frame.
Tensor periodic_image(int h, int w, int shift_x, int shift_y) {
    Tensor t({3, h, w});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int px = ((x - shift_x) % 32 + 32) % 32, py = ((y - shift_y) % 32 + 32) % 32;
                t.at(c, y, x) = static_cast<float>((px * 37 + py * 11 + c * 53) % 256);
            }
        }
    }
    return t;
}

}  // namespace

TEST(Padding, Examples) {
    const PaddedImage a = pad_to_multiple8(Tensor({3, 64, 96}, 1.0f));
    EXPECT_EQ(a.pad, (PadSpec{0, 0}));
    EXPECT_EQ(a.image.dims(), (std::vector<int>{3, 64, 96}));
    const PaddedImage b = pad_to_multiple8(oracle::random_tensor({3, 65, 96}, 1));
    EXPECT_EQ(b.pad, (PadSpec{7, 0}));
    EXPECT_EQ(b.image.dims(), (std::vector<int>{3, 72, 96}));
    for (int y = 65; y < 72; ++y) EXPECT_EQ(b.image.at(1, y, 10), b.image.at(1, 64, 10));
}

TEST(Padding, CropInvertsPad) {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const int h = static_cast<int>(rng.uniform_int(1, 40)), w = static_cast<int>(rng.uniform_int(1, 40));
        const Tensor x = oracle::random_tensor({3, h, w}, 100 + t);
        const PaddedImage p = pad_to_multiple8(x);
        EXPECT_EQ(p.image.height() % 8, 0);
        EXPECT_EQ(p.image.width() % 8, 0);
        EXPECT_EQ(crop_pad(p.image, p.pad), x);
    }
    FlowField f = oracle::random_flow(5, 6, 3, 2.0f);
    f.mask()[7] = 0;
    const PaddedImage p = pad_to_multiple8(f.to_tensor());
    FlowField padded = FlowField::from_tensor(p.image);
    std::vector<std::uint8_t> pm(padded.pixel_count(), 1);
    pm[1 * 8 + 1] = 0;
    padded.set_mask(pm);
    const FlowField back = crop_pad(padded, p.pad);
    EXPECT_EQ(back.u_plane(), f.u_plane());
    EXPECT_FALSE(back.valid(1, 1));
    EXPECT_EQ(back.valid_count(), 29u);
}

TEST(Upsample2x, ConstantAndZero) {
    FlowField f(3, 5);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 5; ++x) f.u(y, x) = 1.25f, f.v(y, x) = -0.5f;
    }
    const FlowField up = upsample2x_init(f);
    ASSERT_EQ(up.height(), 6);
    ASSERT_EQ(up.width(), 10);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 10; ++x) {
            EXPECT_FLOAT_EQ(up.u(y, x), 2.5f);
            EXPECT_FLOAT_EQ(up.v(y, x), -1.0f);
        }
    }
    const FlowField still = upsample2x_init(FlowField(2, 2));
    EXPECT_EQ(still, FlowField(4, 4));
}

TEST(Upsample2x, MatchesScalarOracle) {
    const FlowField f = oracle::random_flow(4, 4, 5, 3.0f);
    const FlowField got = upsample2x_init(f), want = oracle::upsample2x(f);
    EXPECT_LE(oracle::max_abs_diff(got.u_plane(), want.u_plane()), 1e-6);
    EXPECT_LE(oracle::max_abs_diff(got.v_plane(), want.v_plane()), 1e-6);
}

TEST(Normalize, MapsToUnitRange) {
    const Tensor t({1, 1, 3}, std::vector<float>{0.0f, 127.5f, 255.0f});
    const Tensor n = normalize_image(t);
    EXPECT_FLOAT_EQ(n.data()[0], -1.0f);
    EXPECT_NEAR(n.data()[1], 0.0f, 1e-7);
    EXPECT_FLOAT_EQ(n.data()[2], 1.0f);
}

TEST(EstimateFlow, TraceContract) {
    const ModelWeights w = init_weights(small_config(), 6);
    const Tensor a = oracle::random_tensor({3, 64, 96}, 7, 0.0f, 255.0f);
    const Tensor b = oracle::random_tensor({3, 64, 96}, 8, 0.0f, 255.0f);
    const FlowEstimate e = estimate_flow(a, b, w);
    EXPECT_EQ(e.flow.height(), 64);
    EXPECT_EQ(e.flow.width(), 96);
    ASSERT_EQ(e.trace.levels.size(), 2u);
    EXPECT_EQ(e.trace.levels[0].iterates.size(), 12u);
    EXPECT_EQ(e.trace.levels[1].iterates.size(), 12u);
    EXPECT_EQ(e.trace.levels[0].iterates[0].height(), 8);
    EXPECT_EQ(e.trace.levels[1].iterates[11].width(), 24);
    const std::size_t v8 = 8 * 12, v4 = 16 * 24;
    EXPECT_EQ(e.trace.levels[0].corr_volume_elements, v8 * v8);
    EXPECT_EQ(e.trace.levels[1].corr_volume_elements, v4 * v4);
    EXPECT_EQ(e.trace.levels[1].corr_volume_elements, 16 * e.trace.levels[0].corr_volume_elements);
    EXPECT_GT(e.trace.levels[0].corr_pyramid_elements, e.trace.levels[0].corr_volume_elements);
    EXPECT_EQ(e.trace.levels[0].update_parameters, e.trace.levels[1].update_parameters);
    EXPECT_EQ(estimate_flow(a, b, w).flow, e.flow);
}

TEST(EstimateFlow, IterationOption) {
    const ModelWeights w = init_weights(small_config(), 9);
    const Tensor a = oracle::random_tensor({3, 16, 16}, 10, 0.0f, 255.0f);
    const FlowEstimate e = estimate_flow(a, a, w, FlowOptions{3});
    EXPECT_EQ(e.trace.levels[0].iterates.size(), 3u);
    EXPECT_THROW(estimate_flow(a, a, w, FlowOptions{0}), ConfigError);
}

TEST(EstimateFlow, OutputDimsMatchInputForSmallFrames) {
    const ModelWeights w = init_weights(small_config(2), 11);
    for (auto [h, wd] : {std::pair{16, 16}, {17, 23}, {16, 40}, {31, 19}, {24, 17}}) {
        const Tensor a = oracle::random_tensor({3, h, wd}, 12, 0.0f, 255.0f);
        const Tensor b = oracle::random_tensor({3, h, wd}, 13, 0.0f, 255.0f);
        const FlowEstimate e = estimate_flow(a, b, w, FlowOptions{2});
        EXPECT_EQ(e.flow.height(), h);
        EXPECT_EQ(e.flow.width(), wd);
        EXPECT_TRUE(e.flow.u_plane().all_finite());
    }
}

TEST(EstimateFlow, Errors) {
    const ModelWeights w = init_weights(small_config(), 14);
    EXPECT_THROW(estimate_flow(Tensor({3, 16, 16}), Tensor({3, 16, 24}), w), ShapeError);
    EXPECT_THROW(estimate_flow(Tensor({1, 16, 16}), Tensor({1, 16, 16}), w), ShapeError);
    // 16x16 gives a 2x2 grid at 1/8; four correlation levels do not fit.
    const ModelWeights deep = init_weights(small_config(4), 15);
    EXPECT_THROW(estimate_flow(Tensor({3, 16, 16}), Tensor({3, 16, 16}), deep), ConfigError);
    ModelWeights broken = init_weights(small_config(), 16);
    broken.set("update.gru.q.bias", Tensor({3}));
    EXPECT_THROW(estimate_flow(Tensor({3, 16, 16}), Tensor({3, 16, 16}), broken), ArchiveError);
}

TEST(EstimateFlow, PeriodicTranslationMatchesPipelineOracle) {
    // Damped flow head: per-step updates of a few pixels rather than tens.
    ModelWeights w = init_weights(small_config(3), 17);
    for (float& v : w.mutable_entry("update.flow_head.conv2.weight").data()) v *= 0.05f;
    const Tensor a = periodic_image(32, 64, 0, 0);
    const Tensor b = periodic_image(32, 64, 8, 8);
    const FlowEstimate e = estimate_flow(a, b, w);
    const FlowField ref = oracle::estimate_flow(a, b, w, kDefaultIterations);
    EXPECT_LE(oracle::max_abs_diff(e.flow.u_plane(), ref.u_plane()), 1e-4);
    EXPECT_LE(oracle::max_abs_diff(e.flow.v_plane(), ref.v_plane()), 1e-4);
    double largest = 0.0;
    for (float v : ref.u_plane().data()) largest = std::max(largest, std::fabs(double(v)));
    EXPECT_LT(largest, 40.0);
}

TEST(EstimateFlow, PaddedInputMatchesOracle) {
    const ModelWeights w = init_weights(small_config(2), 18);
    const Tensor a = oracle::bandlimited_texture(21, 27, 0.0, 0.0);
    const Tensor b = oracle::bandlimited_texture(21, 27, 0.5, 1.0);
    const FlowEstimate e = estimate_flow(a, b, w, FlowOptions{4});
    const FlowField ref = oracle::estimate_flow(a, b, w, 4);
    EXPECT_EQ(e.trace.pad, (PadSpec{3, 5}));
    EXPECT_LE(oracle::max_abs_diff(e.flow.u_plane(), ref.u_plane()), 1e-4);
    EXPECT_LE(oracle::max_abs_diff(e.flow.v_plane(), ref.v_plane()), 1e-4);
}
