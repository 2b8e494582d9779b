#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace pyrflow::oracle {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Tensor conv_named(const Tensor& in, const ModelWeights& w, const std::string& name, int stride = 1) {
    const Tensor& k = w.get(name + ".weight");
    return conv2d(in, k, w.get(name + ".bias"), stride, k.dim(2) / 2);
}

Tensor stack(const Tensor& a, const Tensor& b) {
    Tensor out({a.channels() + b.channels(), a.height(), a.width()});
    for (int c = 0; c < out.channels(); ++c) {
        for (int y = 0; y < a.height(); ++y) {
            for (int x = 0; x < a.width(); ++x) {
                out.at(c, y, x) = c < a.channels() ? a.at(c, y, x) : b.at(c - a.channels(), y, x);
            }
        }
    }
    return out;
}

Tensor channels(const Tensor& t, int begin, int end) {
    Tensor out({end - begin, t.height(), t.width()});
    for (int c = begin; c < end; ++c) {
        for (int y = 0; y < t.height(); ++y) {
            for (int x = 0; x < t.width(); ++x) out.at(c - begin, y, x) = t.at(c, y, x);
        }
    }
    return out;
}

Tensor flow_tensor(const FlowField& f) {
    Tensor t({2, f.height(), f.width()});
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) {
            t.at(0, y, x) = f.u(y, x);
            t.at(1, y, x) = f.v(y, x);
        }
    }
    return t;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding) {
    const int c_out = kernel.dim(0), c_in = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    const int h = input.height(), w = input.width();
    const int oh = (h + 2 * padding - kh) / stride + 1, ow = (w + 2 * padding - kw) / stride + 1;
    Tensor out({c_out, oh, ow});
    for (int co = 0; co < c_out; ++co) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float acc = bias.data()[co];
                for (int ci = 0; ci < c_in; ++ci) {
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = oy * stride - padding + ky, ix = ox * stride - padding + kx;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += kernel.at(co, ci, ky, kx) * input.at(ci, iy, ix);
                        }
                    }
                }
                out.at(co, oy, ox) = acc;
            }
        }
    }
    return out;
}

Tensor relu(const Tensor& t) {
    Tensor out = t;
    for (float& v : out.data()) v = std::max(v, 0.0f);
    return out;
}

double bilinear(const Tensor& t, int channel, double x, double y) {
    const double fx = std::floor(x), fy = std::floor(y);
    double acc = 0.0;
    for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
            const double xi = fx + i, yj = fy + j;
            const double weight = std::max(0.0, 1.0 - std::fabs(x - xi)) * std::max(0.0, 1.0 - std::fabs(y - yj));
            if (weight == 0.0 || xi < 0 || yj < 0 || xi >= t.width() || yj >= t.height()) continue;
            acc += weight * t.at(channel, static_cast<int>(yj), static_cast<int>(xi));
        }
    }
    return acc;
}

Tensor avg_pool2(const Tensor& t) {
    Tensor out({t.channels(), (t.height() + 1) / 2, (t.width() + 1) / 2});
    for (int c = 0; c < t.channels(); ++c) {
        for (int oy = 0; oy < out.height(); ++oy) {
            for (int ox = 0; ox < out.width(); ++ox) {
                double sum = 0.0;
                int n = 0;
                for (int y = 2 * oy; y < std::min(2 * oy + 2, t.height()); ++y) {
                    for (int x = 2 * ox; x < std::min(2 * ox + 2, t.width()); ++x) {
                        sum += t.at(c, y, x);
                        ++n;
                    }
                }
                out.at(c, oy, ox) = static_cast<float>(sum / n);
            }
        }
    }
    return out;
}

Tensor corr_volume(const Tensor& f1, const Tensor& f2) {
    const int d = f1.channels();
    Tensor out({f1.height() * f1.width(), f2.height(), f2.width()});
    for (int y1 = 0; y1 < f1.height(); ++y1) {
        for (int x1 = 0; x1 < f1.width(); ++x1) {
            for (int y2 = 0; y2 < f2.height(); ++y2) {
                for (int x2 = 0; x2 < f2.width(); ++x2) {
                    double dot = 0.0;
                    for (int c = 0; c < d; ++c) dot += static_cast<double>(f1.at(c, y1, x1)) * f2.at(c, y2, x2);
                    out.at(y1 * f1.width() + x1, y2, x2) = static_cast<float>(dot / std::sqrt(static_cast<double>(d)));
                }
            }
        }
    }
    return out;
}

Tensor lookup(const Tensor& volume, int source_height, int source_width, const FlowField& flow, int levels,
              int radius) {
    std::vector<Tensor> pyramid{volume};
    for (int l = 1; l < levels; ++l) pyramid.push_back(oracle::avg_pool2(pyramid.back()));
    const int span = 2 * radius + 1;
    Tensor out({levels * span * span, source_height, source_width});
    for (int y = 0; y < source_height; ++y) {
        for (int x = 0; x < source_width; ++x) {
            const int p = y * source_width + x;
            for (int l = 0; l < levels; ++l) {
                const double scale = std::pow(2.0, l);
                const double cx = (x + static_cast<double>(flow.u(y, x))) / scale;
                const double cy = (y + static_cast<double>(flow.v(y, x))) / scale;
                for (int dy = -radius; dy <= radius; ++dy) {
                    for (int dx = -radius; dx <= radius; ++dx) {
                        const int ch = (l * span + dy + radius) * span + dx + radius;
                        out.at(ch, y, x) = static_cast<float>(bilinear(pyramid[l], p, cx + dx, cy + dy));
                    }
                }
            }
        }
    }
    return out;
}

std::vector<double> gru_pixel(const std::vector<double>& h, const std::vector<double>& x, const ModelWeights& w) {
    const int dh = static_cast<int>(h.size()), dx = static_cast<int>(x.size());
    auto gate = [&](const std::string& name, const std::vector<double>& first, int o) {
        const Tensor& k = w.get(name + ".weight");
        double acc = w.get(name + ".bias").data()[o];
        for (int i = 0; i < dh; ++i) acc += k.at(o, i, 1, 1) * first[i];
        for (int i = 0; i < dx; ++i) acc += k.at(o, dh + i, 1, 1) * x[i];
        return acc;
    };
    std::vector<double> z(dh), r(dh), rh(dh), out(dh);
    for (int o = 0; o < dh; ++o) {
        z[o] = sigmoid(gate("update.gru.z", h, o));
        r[o] = sigmoid(gate("update.gru.r", h, o));
        rh[o] = r[o] * h[o];
    }
    for (int o = 0; o < dh; ++o) {
        const double q = std::tanh(gate("update.gru.q", rh, o));
        out[o] = (1.0 - z[o]) * h[o] + z[o] * q;
    }
    return out;
}

Tensor convex_upsample(const Tensor& flow, const Tensor& mask, int factor) {
    const int h = flow.height(), w = flow.width();
    Tensor out({2, h * factor, w * factor});
    for (int oy = 0; oy < h * factor; ++oy) {
        for (int ox = 0; ox < w * factor; ++ox) {
            const int y = oy / factor, x = ox / factor, sy = oy % factor, sx = ox % factor;
            double logits[9], peak = -INFINITY;
            for (int k = 0; k < 9; ++k) {
                logits[k] = mask.at(k * factor * factor + sy * factor + sx, y, x);
                peak = std::max(peak, logits[k]);
            }
            double total = 0.0;
            for (double& l : logits) total += (l = std::exp(l - peak));
            for (int c = 0; c < 2; ++c) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = std::clamp(y + dy, 0, h - 1), nx = std::clamp(x + dx, 0, w - 1);
                        acc += logits[(dy + 1) * 3 + dx + 1] / total * factor * flow.at(c, ny, nx);
                    }
                }
                out.at(c, oy, ox) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

FlowField upsample2x(const FlowField& flow) {
    const int h = flow.height(), w = flow.width();
    FlowField out(2 * h, 2 * w);
    auto sample = [&](const Tensor& plane, double x, double y) {
        x = std::clamp(x, 0.0, w - 1.0);
        y = std::clamp(y, 0.0, h - 1.0);
        const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
        const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
        const double ax = x - x0, ay = y - y0;
        return (1 - ay) * ((1 - ax) * plane.at(0, y0, x0) + ax * plane.at(0, y0, x1)) +
               ay * ((1 - ax) * plane.at(0, y1, x0) + ax * plane.at(0, y1, x1));
    };
    for (int y = 0; y < 2 * h; ++y) {
        for (int x = 0; x < 2 * w; ++x) {
            const double sx = x / 2.0 - 0.25, sy = y / 2.0 - 0.25;
            out.u(y, x) = static_cast<float>(2.0 * sample(flow.u_plane(), sx, sy));
            out.v(y, x) = static_cast<float>(2.0 * sample(flow.v_plane(), sx, sy));
        }
    }
    return out;
}

Trunk encoder(const Tensor& image, const ModelWeights& w, const char* prefix) {
    const std::string p = prefix;
    Tensor x = oracle::relu(conv_named(image, w, p + ".stage1.conv1", 2));
    x = oracle::relu(conv_named(x, w, p + ".stage1.conv2"));
    x = oracle::relu(conv_named(x, w, p + ".stage2.conv1", 2));
    x = oracle::relu(conv_named(x, w, p + ".stage2.conv2"));
    Trunk t;
    t.quarter = x;
    x = oracle::relu(conv_named(x, w, p + ".stage3.conv1", 2));
    t.eighth = oracle::relu(conv_named(x, w, p + ".stage3.conv2"));
    return t;
}

Tensor motion(const Tensor& corr, const FlowField& flow, const ModelWeights& w) {
    const Tensor ft = flow_tensor(flow);
    const Tensor c = oracle::relu(conv_named(corr, w, "update.motion.corr"));
    const Tensor f = oracle::relu(conv_named(ft, w, "update.motion.flow"));
    const Tensor fused = oracle::relu(conv_named(stack(c, f), w, "update.motion.fuse"));
    return stack(fused, ft);
}

Tensor gru(const Tensor& h, const Tensor& x, const ModelWeights& w) {
    const Tensor hx = stack(h, x);
    const Tensor zl = conv_named(hx, w, "update.gru.z");
    const Tensor rl = conv_named(hx, w, "update.gru.r");
    Tensor rh = h;
    for (std::size_t i = 0; i < rh.size(); ++i) rh.data()[i] = static_cast<float>(sigmoid(rl.data()[i]) * h.data()[i]);
    const Tensor ql = conv_named(stack(rh, x), w, "update.gru.q");
    Tensor out = h;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double z = sigmoid(zl.data()[i]);
        out.data()[i] = static_cast<float>((1.0 - z) * h.data()[i] + z * std::tanh(static_cast<double>(ql.data()[i])));
    }
    return out;
}

Tensor flow_head(const Tensor& h, const ModelWeights& w) {
    return conv_named(oracle::relu(conv_named(h, w, "update.flow_head.conv1")), w, "update.flow_head.conv2");
}

Tensor mask_head(const Tensor& h, const ModelWeights& w) {
    return conv_named(oracle::relu(conv_named(h, w, "update.mask_head.conv1")), w, "update.mask_head.conv2");
}

FlowField estimate_flow(const Tensor& image1, const Tensor& image2, const ModelWeights& w, int iterations) {
    const ModelConfig& cfg = w.config();
    const int h = image1.height(), wd = image1.width();
    const int ph = (h + 7) / 8 * 8, pw = (wd + 7) / 8 * 8;
    auto prepare = [&](const Tensor& img) {
        Tensor out({3, ph, pw});
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < ph; ++y) {
                for (int x = 0; x < pw; ++x) {
                    out.at(c, y, x) = 2.0f * (img.at(c, std::min(y, h - 1), std::min(x, wd - 1)) / 255.0f) - 1.0f;
                }
            }
        }
        return out;
    };
    const Tensor n1 = prepare(image1), n2 = prepare(image2);
    const Trunk a = encoder(n1, w, "fnet"), b = encoder(n2, w, "fnet"), ctx = encoder(n1, w, "cnet");

    FlowField flow(a.eighth.height(), a.eighth.width());
    Tensor hidden;
    for (int level = 0; level < 2; ++level) {
        const Tensor& f1 = level == 0 ? a.eighth : a.quarter;
        const Tensor& f2 = level == 0 ? b.eighth : b.quarter;
        const Tensor& c = level == 0 ? ctx.eighth : ctx.quarter;
        if (level == 1) flow = upsample2x(flow);
        const Tensor volume = corr_volume(f1, f2);
        hidden = channels(c, 0, cfg.hidden_dim);
        for (float& v : hidden.data()) v = std::tanh(v);
        const Tensor context = oracle::relu(channels(c, cfg.hidden_dim, c.channels()));
        for (int it = 0; it < iterations; ++it) {
            const Tensor corr = lookup(volume, f1.height(), f1.width(), flow, cfg.corr_levels, cfg.corr_radius);
            const Tensor m = motion(corr, flow, w);
            hidden = gru(hidden, stack(context, m), w);
            const Tensor delta = flow_head(hidden, w);
            for (int y = 0; y < flow.height(); ++y) {
                for (int x = 0; x < flow.width(); ++x) {
                    flow.u(y, x) += delta.at(0, y, x);
                    flow.v(y, x) += delta.at(1, y, x);
                }
            }
        }
    }
    const Tensor full = convex_upsample(flow_tensor(flow), mask_head(hidden, w), kUpsampleFactor);
    FlowField out(h, wd);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < wd; ++x) {
            out.u(y, x) = full.at(0, y, x);
            out.v(y, x) = full.at(1, y, x);
        }
    }
    return out;
}

Tensor random_tensor(std::vector<int> dims, std::uint64_t seed, float lo, float hi) {
    Tensor t(std::move(dims));
    std::mt19937_64 rng(seed);
    for (float& v : t.data()) v = lo + (hi - lo) * static_cast<float>(rng() >> 40) * 0x1.0p-24f;
    return t;
}

FlowField random_flow(int height, int width, std::uint64_t seed, float magnitude) {
    return FlowField::from_tensor(random_tensor({2, height, width}, seed, -magnitude, magnitude));
}

Tensor bandlimited_texture(int height, int width, double shift_x, double shift_y) {
    Tensor t({3, height, width});
    const double two_pi = 2.0 * M_PI;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double px = x - shift_x, py = y - shift_y;
                const double v = 0.5 + 0.2 * std::sin(two_pi * (px / 23.0 + py / 31.0) + c) +
                                 0.15 * std::cos(two_pi * (px / 17.0 - py / 13.0) + 0.5 * c) +
                                 0.1 * std::sin(two_pi * py / 11.0 + 2.0 * c);
                t.at(c, y, x) = static_cast<float>(255.0 * v);
            }
        }
    }
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.dims() != b.dims()) throw std::invalid_argument("max_abs_diff: dims differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(static_cast<double>(a.data()[i]) - b.data()[i]));
    return m;
}

}  // namespace pyrflow::oracle
