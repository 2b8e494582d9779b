#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "pyrflow/error.hpp"
#include "pyrflow/tensor_ops.hpp"

using namespace pyrflow;

TEST(Tensor, RejectsBadConstruction) {
    EXPECT_THROW(Tensor({0, 2, 2}), ShapeError);
    EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), ShapeError);
    EXPECT_THROW(Tensor({1, 1, 1}, std::vector<float>{NAN}), ValidationError);
    EXPECT_THROW(Tensor({1, 1, 1}, std::vector<float>{INFINITY}), ValidationError);
    const Tensor t({2, 3, 4}, 1.5f);
    EXPECT_EQ(t.size(), 24u);
    EXPECT_EQ(t.channels(), 2);
    EXPECT_EQ(t.height(), 3);
    EXPECT_EQ(t.width(), 4);
}

TEST(Conv2d, IdentityKernel) {
    const Tensor x = oracle::random_tensor({1, 4, 5}, 1);
    const Tensor k({1, 1, 1, 1}, 1.0f);
    const float bias[1] = {0.0f};
    EXPECT_EQ(conv2d(x, k, bias), x);
}

TEST(Conv2d, OnesKernelOnOnes) {
    const Tensor x({1, 3, 3}, 1.0f);
    const Tensor k({1, 1, 3, 3}, 1.0f);
    const float bias[1] = {0.0f};
    const Tensor y = conv2d(x, k, bias);
    ASSERT_EQ(y.dims(), (std::vector<int>{1, 1, 1}));
    EXPECT_EQ(y.at(0, 0, 0), 9.0f);
}

TEST(Conv2d, MatchesDirectOracle) {
    const Tensor x = oracle::random_tensor({2, 5, 7}, 2);
    const Tensor k = oracle::random_tensor({4, 2, 3, 3}, 3);
    const Tensor b = oracle::random_tensor({4}, 4);
    for (int stride : {1, 2, 3}) {
        for (int pad : {0, 1, 2}) {
            const Tensor got = conv2d(x, k, b.data(), stride, pad);
            const Tensor want = oracle::conv2d(x, k, b, stride, pad);
            ASSERT_EQ(got.dims(), want.dims());
            EXPECT_LE(oracle::max_abs_diff(got, want), 1e-5) << "stride " << stride << " pad " << pad;
        }
    }
}

TEST(Conv2d, OutputDimsFloor) {
    const Tensor x({1, 8, 9});
    const Tensor k({2, 1, 3, 3});
    const std::vector<float> b(2, 0.0f);
    EXPECT_EQ(conv2d(x, k, b, 2, 1).dims(), (std::vector<int>{2, 4, 5}));
    EXPECT_EQ(conv2d(x, k, b, 3, 0).dims(), (std::vector<int>{2, 2, 3}));
}

TEST(Conv2d, Errors) {
    const Tensor x({2, 4, 4});
    const std::vector<float> b(1, 0.0f);
    EXPECT_THROW(conv2d(x, Tensor({1, 3, 3, 3}), b), ShapeError);       // channel mismatch
    EXPECT_THROW(conv2d(x, Tensor({1, 2, 2, 2}), b), ShapeError);       // even kernel
    EXPECT_THROW(conv2d(x, Tensor({1, 2, 5, 5}), b), ShapeError);       // too large without padding
    EXPECT_THROW(conv2d(x, Tensor({1, 2, 3, 3}), b, 0), ShapeError);    // stride
    EXPECT_THROW(conv2d(x, Tensor({1, 2, 3, 3}), std::vector<float>(2)), ShapeError);
    Tensor k({1, 2, 1, 1});
    k.data()[0] = NAN;
    EXPECT_THROW(conv2d(x, k, b), ValidationError);
}

TEST(Conv2d, Linearity) {
    const Tensor a = oracle::random_tensor({3, 6, 6}, 10);
    const Tensor b = oracle::random_tensor({3, 6, 6}, 11);
    const Tensor k = oracle::random_tensor({2, 3, 3, 3}, 12);
    const std::vector<float> zero(2, 0.0f);
    const float s = 1.7f, t = -0.6f;
    Tensor mix({3, 6, 6});
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = s * a.data()[i] + t * b.data()[i];
    const Tensor lhs = conv2d(mix, k, zero, 1, 1);
    const Tensor ca = conv2d(a, k, zero, 1, 1), cb = conv2d(b, k, zero, 1, 1);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        EXPECT_NEAR(lhs.data()[i], s * ca.data()[i] + t * cb.data()[i], 1e-4);
    }
}

TEST(Conv2d, BitwiseDeterministic) {
    const Tensor x = oracle::random_tensor({4, 9, 9}, 20);
    const Tensor k = oracle::random_tensor({5, 4, 3, 3}, 21);
    const std::vector<float> b(5, 0.25f);
    EXPECT_EQ(conv2d(x, k, b, 2, 1), conv2d(x, k, b, 2, 1));
}

TEST(Bilinear, IntegerCoordinatesExact) {
    const Tensor t = oracle::random_tensor({2, 4, 5}, 30);
    std::vector<Point2> pts;
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 5; ++x) pts.push_back({float(x), float(y)});
    }
    const Tensor s = bilinear_sample(t, pts);
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 20; ++i) EXPECT_EQ(s.data()[c * 20 + i], t.at(c, i / 5, i % 5));
    }
}

TEST(Bilinear, BlockMidpoint) {
    const Tensor t({1, 2, 2}, std::vector<float>{0, 2, 4, 6});
    const Point2 p[1] = {{0.5f, 0.5f}};
    EXPECT_FLOAT_EQ(bilinear_sample(t, p).data()[0], 3.0f);
}

TEST(Bilinear, ZeroBorder) {
    const Tensor t({1, 2, 2}, 1.0f);
    const Point2 p[4] = {{-0.5f, 0.0f}, {1.5f, 1.0f}, {-3.0f, -3.0f}, {0.5f, 2.0f}};
    const Tensor s = bilinear_sample(t, p);
    EXPECT_FLOAT_EQ(s.data()[0], 0.5f);
    EXPECT_FLOAT_EQ(s.data()[1], 0.5f);
    EXPECT_FLOAT_EQ(s.data()[2], 0.0f);
    EXPECT_FLOAT_EQ(s.data()[3], 0.0f);
}

TEST(Bilinear, MatchesScalarOracle) {
    const Tensor t = oracle::random_tensor({1, 8, 8}, 31);
    const Tensor c = oracle::random_tensor({2, 100}, 32, -1.5f, 8.5f);
    std::vector<Point2> pts;
    for (int i = 0; i < 100; ++i) pts.push_back({c.data()[i], c.data()[100 + i]});
    const Tensor s = bilinear_sample(t, pts);
    for (int i = 0; i < 100; ++i) EXPECT_NEAR(s.data()[i], oracle::bilinear(t, 0, pts[i].x, pts[i].y), 1e-6);
}

TEST(Bilinear, Continuity) {
    const Tensor t = oracle::random_tensor({1, 6, 6}, 33);
    const Tensor c = oracle::random_tensor({2, 200}, 34, -1.0f, 6.0f);
    for (int i = 0; i < 200; ++i) {
        const float x = c.data()[i], y = c.data()[200 + i];
        const float a = bilinear_at(t.plane(0), 6, 6, x, y);
        const float b = bilinear_at(t.plane(0), 6, 6, x + 1e-6f, y - 1e-6f);
        EXPECT_LE(std::fabs(a - b), 1e-4 * 2.0);
    }
}

TEST(AvgPool2, Examples) {
    const Tensor t({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    EXPECT_EQ(avg_pool2(t).data()[0], 2.5f);
    const Tensor c({2, 5, 3}, 0.7f);
    const Tensor p = avg_pool2(c);
    EXPECT_EQ(p.dims(), (std::vector<int>{2, 3, 2}));
    for (float v : p.data()) EXPECT_FLOAT_EQ(v, 0.7f);
}

TEST(AvgPool2, MatchesOracleOnOddDims) {
    const Tensor t = oracle::random_tensor({3, 5, 5}, 40);
    EXPECT_EQ(avg_pool2(t), oracle::avg_pool2(t));
    const Tensor r = oracle::random_tensor({1, 7, 4}, 41);
    EXPECT_EQ(avg_pool2(r), oracle::avg_pool2(r));
}

TEST(AvgPool2, PreservesMeanOnEvenDims) {
    const Tensor t = oracle::random_tensor({1, 8, 6}, 42);
    const Tensor p = avg_pool2(t);
    const double m0 = std::accumulate(t.data().begin(), t.data().end(), 0.0) / t.size();
    const double m1 = std::accumulate(p.data().begin(), p.data().end(), 0.0) / p.size();
    EXPECT_NEAR(m0, m1, 1e-6);
}

TEST(Activations, Examples) {
    const std::vector<float> eq(9, 0.3f);
    for (float v : softmax(eq)) EXPECT_NEAR(v, 1.0 / 9.0, 1e-7);
    // 1000 + ln2 is not representable in float; compare against the stored gap.
    const std::vector<float> big = {1000.0f, 1000.0f + std::log(2.0f)};
    const double gap = double(big[1]) - double(big[0]);
    const auto s = softmax(big);
    EXPECT_NEAR(s[0], 1.0 / (1.0 + std::exp(gap)), 1e-6);
    EXPECT_NEAR(s[1], 1.0 / (1.0 + std::exp(-gap)), 1e-6);
    EXPECT_NEAR(s[1], 2.0 / 3.0, 1e-4);
    const std::vector<float> exact = {0.0f, std::log(2.0f)};
    EXPECT_NEAR(softmax(exact)[1], 2.0 / 3.0, 1e-6);
    EXPECT_EQ(sigmoid(Tensor({1}, 0.0f)).data()[0], 0.5f);
    EXPECT_EQ(pyrflow::tanh(Tensor({1}, 0.0f)).data()[0], 0.0f);
    EXPECT_EQ(relu(Tensor({1}, -1.0f)).data()[0], 0.0f);
}

TEST(Activations, SoftmaxSumsToOne) {
    const Tensor r = oracle::random_tensor({50}, 50, -30.0f, 30.0f);
    for (int n = 1; n <= 50; n += 7) {
        const auto s = softmax(r.data().subspan(0, n));
        double sum = 0.0;
        for (float v : s) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
            sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(Channels, ConcatAndSlice) {
    const Tensor a = oracle::random_tensor({2, 3, 4}, 60);
    const Tensor b = oracle::random_tensor({3, 3, 4}, 61);
    const Tensor ab = concat_channels({&a, &b});
    EXPECT_EQ(ab.channels(), 5);
    EXPECT_EQ(slice_channels(ab, 0, 2), a);
    EXPECT_EQ(slice_channels(ab, 2, 5), b);
    const Tensor c({1, 2, 4});
    EXPECT_THROW(concat_channels({&a, &c}), ShapeError);
    EXPECT_THROW(slice_channels(a, 1, 3), ShapeError);
}
