#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pyrflow/error.hpp"
#include "pyrflow/network.hpp"
#include "pyrflow/pyramid_flow.hpp"

using namespace pyrflow;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.feature_dim = 8;
    c.hidden_dim = 8;
    c.context_dim = 4;
    c.motion_dim = 10;
    c.corr_levels = 2;
    c.corr_radius = 1;
    return c;
}

// Weights with nonzero biases so bias handling is exercised.
ModelWeights busy_weights(const ModelConfig& c, std::uint64_t seed) {
    ModelWeights w = init_weights(c, seed);
    std::uint64_t s = seed * 1000;
    for (const auto& spec : parameter_specs(c)) {
        if (spec.fan_in == 0) w.set(spec.name, oracle::random_tensor(spec.dims, ++s, -0.2f, 0.2f));
    }
    return w;
}

}  // namespace

TEST(Encoders, ZeroWeightsGiveZeroMaps) {
    const ModelConfig c = tiny_config();
    const ModelWeights w = zero_weights(c);
    const Tensor img({3, 16, 24});
    const PyramidFeatures f = feature_encode(img, w);
    EXPECT_EQ(f.eighth.dims(), (std::vector<int>{8, 2, 3}));
    EXPECT_EQ(f.quarter.dims(), (std::vector<int>{8, 4, 6}));
    for (float v : f.eighth.data()) EXPECT_EQ(v, 0.0f);
    for (float v : f.quarter.data()) EXPECT_EQ(v, 0.0f);
    const PyramidContext ctx = context_encode(oracle::random_tensor({3, 16, 24}, 1), w);
    for (const ContextLevel* l : {&ctx.eighth, &ctx.quarter}) {
        EXPECT_EQ(l->hidden_init.channels(), 8);
        EXPECT_EQ(l->context.channels(), 4);
        for (float v : l->hidden_init.data()) EXPECT_EQ(v, 0.0f);
        for (float v : l->context.data()) EXPECT_EQ(v, 0.0f);
    }
}

TEST(Encoders, ShapeContract) {
    const ModelWeights w = init_weights(tiny_config(), 2);
    EXPECT_THROW(feature_encode(Tensor({3, 12, 16}), w), ShapeError);
    EXPECT_THROW(feature_encode(Tensor({1, 16, 16}), w), ShapeError);
    const PyramidFeatures f = feature_encode(oracle::random_tensor({3, 32, 8}, 3), w);
    EXPECT_EQ(f.eighth.dims(), (std::vector<int>{8, 4, 1}));
    EXPECT_EQ(f.quarter.dims(), (std::vector<int>{8, 8, 2}));
}

TEST(Encoders, MatchCompositionOracle) {
    const ModelConfig c = tiny_config();
    const ModelWeights w = busy_weights(c, 4);
    const Tensor img = oracle::random_tensor({3, 32, 32}, 5);
    const PyramidFeatures f = feature_encode(img, w);
    const oracle::Trunk t = oracle::encoder(img, w, "fnet");
    EXPECT_LE(oracle::max_abs_diff(f.eighth, t.eighth), 1e-5);
    EXPECT_LE(oracle::max_abs_diff(f.quarter, t.quarter), 1e-5);

    const PyramidContext ctx = context_encode(img, w);
    const oracle::Trunk ct = oracle::encoder(img, w, "cnet");
    for (int ch = 0; ch < 12; ++ch) {
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 4; ++x) {
                const double raw = ct.eighth.at(ch, y, x);
                if (ch < 8) {
                    EXPECT_NEAR(ctx.eighth.hidden_init.at(ch, y, x), std::tanh(raw), 1e-5);
                } else {
                    EXPECT_NEAR(ctx.eighth.context.at(ch - 8, y, x), std::max(0.0, raw), 1e-5);
                }
            }
        }
    }
}

TEST(Encoders, ActivationRanges) {
    ModelWeights w = init_weights(tiny_config(), 6);
    for (const auto& [name, t] : w.entries()) {
        if (name.rfind("cnet.", 0) == 0) {
            Tensor scaled = t;
            for (float& v : scaled.data()) v *= 8.0f;
            w.set(name, scaled);
        }
    }
    const PyramidContext ctx = context_encode(oracle::random_tensor({3, 16, 16}, 7), w);
    for (const ContextLevel* l : {&ctx.eighth, &ctx.quarter}) {
        for (float v : l->hidden_init.data()) EXPECT_TRUE(v >= -1.0f && v <= 1.0f);
        for (float v : l->context.data()) EXPECT_GE(v, 0.0f);
    }
}

TEST(Motion, ZeroAndShapes) {
    const ModelConfig c = tiny_config();
    const LookupField corr{Tensor({c.corr_channels(), 3, 5}), c.corr_radius, c.corr_levels};
    const Tensor m = motion_encode(corr, FlowField(3, 5), zero_weights(c));
    EXPECT_EQ(m.dims(), (std::vector<int>{c.motion_dim, 3, 5}));
    for (float v : m.data()) EXPECT_EQ(v, 0.0f);
    EXPECT_THROW(motion_encode(corr, FlowField(3, 4), zero_weights(c)), ShapeError);
    const LookupField wrong{Tensor({5, 3, 5}), 1, 1};
    EXPECT_THROW(motion_encode(wrong, FlowField(3, 5), zero_weights(c)), ShapeError);
}

TEST(Motion, MatchesOracleAndKeepsRawFlow) {
    const ModelConfig c = tiny_config();
    const ModelWeights w = busy_weights(c, 8);
    const LookupField corr{oracle::random_tensor({c.corr_channels(), 4, 5}, 9), c.corr_radius, c.corr_levels};
    const FlowField flow = oracle::random_flow(4, 5, 10, 3.0f);
    const Tensor m = motion_encode(corr, flow, w);
    EXPECT_LE(oracle::max_abs_diff(m, oracle::motion(corr.values, flow, w)), 1e-5);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 5; ++x) {
            EXPECT_EQ(m.at(c.motion_dim - 2, y, x), flow.u(y, x));
            EXPECT_EQ(m.at(c.motion_dim - 1, y, x), flow.v(y, x));
        }
    }
}

TEST(Gru, ZeroWeightsHalveState) {
    const ModelConfig c = tiny_config();
    const ModelWeights w = zero_weights(c);
    const Tensor h0 = oracle::random_tensor({c.hidden_dim, 3, 4}, 11, -0.9f, 0.9f);
    const Tensor x = oracle::random_tensor({c.gru_input_dim(), 3, 4}, 12);
    Tensor h = h0;
    for (int n = 1; n <= 6; ++n) {
        h = gru_step(h, x, w);
        for (std::size_t i = 0; i < h.size(); ++i) ASSERT_EQ(h.data()[i], h0.data()[i] / float(1 << n)) << n;
    }
}

TEST(Gru, StaysInsideUnitInterval) {
    const ModelConfig c = tiny_config();
    ModelWeights w = init_weights(c, 13);
    for (const auto& [name, t] : w.entries()) {
        Tensor scaled = t;
        for (float& v : scaled.data()) v *= 20.0f;
        w.set(name, scaled);
    }
    Tensor h = oracle::random_tensor({c.hidden_dim, 4, 4}, 14, -0.999f, 0.999f);
    const Tensor x = oracle::random_tensor({c.gru_input_dim(), 4, 4}, 15, -50.0f, 50.0f);
    for (int n = 0; n < 10; ++n) {
        h = gru_step(h, x, w);
        for (float v : h.data()) ASSERT_TRUE(v >= -1.0f && v <= 1.0f);
    }
}

TEST(Gru, SinglePixelMatchesScalarOracle) {
    const ModelConfig c = tiny_config();
    const ModelWeights w = busy_weights(c, 16);
    const Tensor h = oracle::random_tensor({c.hidden_dim, 1, 1}, 17, -0.9f, 0.9f);
    const Tensor x = oracle::random_tensor({c.gru_input_dim(), 1, 1}, 18, -2.0f, 2.0f);
    const Tensor got = gru_step(h, x, w);
    const auto want = oracle::gru_pixel(std::vector<double>(h.data().begin(), h.data().end()),
                                        std::vector<double>(x.data().begin(), x.data().end()), w);
    for (int i = 0; i < c.hidden_dim; ++i) EXPECT_NEAR(got.data()[i], want[i], 1e-6);
    const Tensor h2 = oracle::random_tensor({c.hidden_dim, 3, 5}, 19, -0.9f, 0.9f);
    const Tensor x2 = oracle::random_tensor({c.gru_input_dim(), 3, 5}, 20);
    EXPECT_LE(oracle::max_abs_diff(gru_step(h2, x2, w), oracle::gru(h2, x2, w)), 1e-5);
    EXPECT_THROW(gru_step(h2, h2, w), ShapeError);
}

TEST(Heads, ZeroWeightsAndShapes) {
    const ModelConfig c = tiny_config();
    const Tensor h = oracle::random_tensor({c.hidden_dim, 3, 4}, 21);
    const Tensor d = flow_head(h, zero_weights(c));
    EXPECT_EQ(d.dims(), (std::vector<int>{2, 3, 4}));
    for (float v : d.data()) EXPECT_EQ(v, 0.0f);
    const Tensor m = mask_head(h, zero_weights(c));
    EXPECT_EQ(m.channels(), 144);
    for (float v : m.data()) EXPECT_EQ(v, 0.0f);

    const ModelWeights w = busy_weights(c, 22);
    EXPECT_LE(oracle::max_abs_diff(flow_head(h, w), oracle::flow_head(h, w)), 1e-5);
    EXPECT_LE(oracle::max_abs_diff(mask_head(h, w), oracle::mask_head(h, w)), 1e-5);
    EXPECT_THROW(flow_head(Tensor({3, 2, 2}), w), ShapeError);
}

TEST(ConvexUpsample, UniformWeightsAverageNeighborhood) {
    const Tensor flow = oracle::random_tensor({2, 3, 3}, 23);
    const Tensor up = convex_upsample(flow, Tensor({144, 3, 3}), 4);
    double mean = 0.0;
    for (int i = 0; i < 9; ++i) mean += flow.data()[i];
    for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) EXPECT_NEAR(up.at(0, 4 + sy, 4 + sx), 4.0 * mean / 9.0, 1e-5);
    }
}

TEST(ConvexUpsample, CenterOneHotIsNearestNeighbor) {
    const Tensor flow = oracle::random_tensor({2, 3, 4}, 24);
    Tensor mask({144, 3, 4}, -30.0f);
    for (int ch = 4 * 16; ch < 5 * 16; ++ch) {
        for (int y = 0; y < 3; ++y) {
            for (int x = 0; x < 4; ++x) mask.at(ch, y, x) = 30.0f;
        }
    }
    const Tensor up = convex_upsample(flow, mask, 4);
    ASSERT_EQ(up.dims(), (std::vector<int>{2, 12, 16}));
    for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < 12; ++y) {
            for (int x = 0; x < 16; ++x) EXPECT_NEAR(up.at(c, y, x), 4.0f * flow.at(c, y / 4, x / 4), 1e-5);
        }
    }
}

TEST(ConvexUpsample, RandomMatchesOracle) {
    const Tensor flow = oracle::random_tensor({2, 3, 3}, 25, -4.0f, 4.0f);
    const Tensor mask = oracle::random_tensor({144, 3, 3}, 26, -3.0f, 3.0f);
    EXPECT_LE(oracle::max_abs_diff(convex_upsample(flow, mask, 4), oracle::convex_upsample(flow, mask, 4)), 1e-5);
    EXPECT_THROW(convex_upsample(flow, Tensor({100, 3, 3}), 4), ConfigError);
    EXPECT_THROW(convex_upsample(flow, Tensor({144, 3, 2}), 4), ShapeError);
}

TEST(UpdateBlock, BindsArchiveTensors) {
    const ModelWeights w = init_weights(tiny_config(), 27);
    const UpdateBlock block(w);
    const auto params = block.parameters();
    EXPECT_EQ(params.size(), 20u);
    for (const Tensor* p : params) {
        bool found = false;
        for (const auto& [name, t] : w.entries()) found = found || (&t == p && name.rfind("update.", 0) == 0);
        EXPECT_TRUE(found);
    }
}
