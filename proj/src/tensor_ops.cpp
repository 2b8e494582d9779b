#include "pyrflow/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pyrflow/error.hpp"

namespace pyrflow {

namespace {

std::size_t checked_count(const std::vector<int>& dims) {
    if (dims.empty() || dims.size() > 4) {
        throw ShapeError("tensor rank must be 1..4, got " + std::to_string(dims.size()));
    }
    std::size_t n = 1;
    for (int d : dims) {
        if (d < 1) throw ShapeError("tensor extents must be >= 1");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void require_rank3(const Tensor& t, const char* what) {
    if (t.rank() != 3) {
        throw ShapeError(std::string(what) + ": expected rank-3 tensor, got " + t.shape_string());
    }
}

}  // namespace

Tensor::Tensor(std::vector<int> dims, float fill) : dims_(std::move(dims)) {
    data_.assign(checked_count(dims_), fill);
}

Tensor::Tensor(std::vector<int> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
    if (checked_count(dims_) != data_.size()) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match dims " + shape_string());
    }
    if (!all_finite()) throw ValidationError("tensor data contains NaN or Inf");
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
    os << ']';
    return os.str();
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias, int stride,
              int padding) {
    require_rank3(input, "conv2d input");
    if (kernel.rank() != 4) throw ShapeError("conv2d kernel must be rank 4, got " + kernel.shape_string());
    const int c_out = kernel.dim(0), c_in = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    const int h = input.height(), w = input.width();
    if (c_in != input.channels()) {
        throw ShapeError("conv2d channel mismatch: input " + input.shape_string() + " kernel " +
                         kernel.shape_string());
    }
    if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("conv2d kernel extents must be odd");
    if (stride < 1 || padding < 0) throw ShapeError("conv2d stride must be >= 1, padding >= 0");
    if (h + 2 * padding < kh || w + 2 * padding < kw) throw ShapeError("conv2d input smaller than kernel");
    if (bias.size() != static_cast<std::size_t>(c_out)) throw ShapeError("conv2d bias length mismatch");
    if (!kernel.all_finite()) throw ValidationError("conv2d kernel contains NaN or Inf");

    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (w + 2 * padding - kw) / stride + 1;
    Tensor out({c_out, oh, ow});

    for (int co = 0; co < c_out; ++co) {
        float* dst = out.plane(co);
        std::fill(dst, dst + static_cast<std::size_t>(oh) * ow, bias[co]);
        for (int ci = 0; ci < c_in; ++ci) {
            const float* src = input.plane(ci);
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const float wv = kernel.at(co, ci, ky, kx);
                    // Output columns whose tap stays inside the input row.
                    const int ox_lo = std::max(0, (padding - kx + stride - 1) / stride);
                    const int last = w - 1 + padding - kx;
                    const int ox_hi = last < 0 ? 0 : std::min(ow, last / stride + 1);
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= h) continue;
                        const float* row = src + static_cast<std::size_t>(iy) * w;
                        float* orow = dst + static_cast<std::size_t>(oy) * ow;
                        if (stride == 1) {
                            const int off = kx - padding;
                            for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += wv * row[ox + off];
                        } else {
                            for (int ox = ox_lo; ox < ox_hi; ++ox) {
                                orow[ox] += wv * row[ox * stride - padding + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

float bilinear_at(const float* plane, int height, int width, float x, float y) {
    if (!(x > -1.0f && y > -1.0f && x < static_cast<float>(width) && y < static_cast<float>(height))) {
        return 0.0f;
    }
    const float fx = std::floor(x), fy = std::floor(y);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const float ax = x - fx, ay = y - fy;
    auto px = [&](int yy, int xx) -> float {
        if (xx < 0 || yy < 0 || xx >= width || yy >= height) return 0.0f;
        return plane[static_cast<std::size_t>(yy) * width + xx];
    };
    const float top = (1.0f - ax) * px(y0, x0) + ax * px(y0, x0 + 1);
    const float bottom = (1.0f - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1);
    return (1.0f - ay) * top + ay * bottom;
}

Tensor bilinear_sample(const Tensor& input, std::span<const Point2> coords) {
    require_rank3(input, "bilinear_sample input");
    const int c = input.channels();
    const int n = std::max<int>(1, static_cast<int>(coords.size()));
    Tensor out({c, n});
    if (coords.empty()) return out;
    for (int ch = 0; ch < c; ++ch) {
        const float* plane = input.plane(ch);
        for (std::size_t i = 0; i < coords.size(); ++i) {
            out.data()[static_cast<std::size_t>(ch) * n + i] =
                bilinear_at(plane, input.height(), input.width(), coords[i].x, coords[i].y);
        }
    }
    return out;
}

Tensor avg_pool2(const Tensor& input) {
    require_rank3(input, "avg_pool2 input");
    const int c = input.channels(), h = input.height(), w = input.width();
    const int oh = (h + 1) / 2, ow = (w + 1) / 2;
    Tensor out({c, oh, ow});
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < oh; ++oy) {
            const int y1 = std::min(2 * oy + 2, h);
            for (int ox = 0; ox < ow; ++ox) {
                const int x1 = std::min(2 * ox + 2, w);
                float sum = 0.0f;
                int count = 0;
                for (int y = 2 * oy; y < y1; ++y) {
                    for (int x = 2 * ox; x < x1; ++x) {
                        sum += input.at(ch, y, x);
                        ++count;
                    }
                }
                out.at(ch, oy, ox) = sum / static_cast<float>(count);
            }
        }
    }
    return out;
}

std::vector<float> softmax(std::span<const float> logits) {
    std::vector<float> out(logits.size());
    if (logits.empty()) return out;
    const float peak = *std::max_element(logits.begin(), logits.end());
    float total = 0.0f;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (float& v : out) v /= total;
    return out;
}

Tensor sigmoid(Tensor t) {
    for (float& v : t.data()) v = 1.0f / (1.0f + std::exp(-v));
    return t;
}

Tensor tanh(Tensor t) {
    for (float& v : t.data()) v = std::tanh(v);
    return t;
}

Tensor relu(Tensor t) {
    for (float& v : t.data()) v = v > 0.0f ? v : 0.0f;
    return t;
}

Tensor concat_channels(std::initializer_list<const Tensor*> parts) {
    if (parts.size() == 0) throw ShapeError("concat_channels: no inputs");
    const Tensor& first = **parts.begin();
    require_rank3(first, "concat_channels");
    int total = 0;
    for (const Tensor* p : parts) {
        require_rank3(*p, "concat_channels");
        if (p->height() != first.height() || p->width() != first.width()) {
            throw ShapeError("concat_channels: spatial dims differ " + p->shape_string() + " vs " +
                             first.shape_string());
        }
        total += p->channels();
    }
    Tensor out({total, first.height(), first.width()});
    auto dst = out.data().begin();
    for (const Tensor* p : parts) dst = std::copy(p->data().begin(), p->data().end(), dst);
    return out;
}

Tensor slice_channels(const Tensor& t, int begin, int end) {
    require_rank3(t, "slice_channels");
    if (begin < 0 || end > t.channels() || begin >= end) throw ShapeError("slice_channels: bad range");
    Tensor out({end - begin, t.height(), t.width()});
    const std::size_t plane = static_cast<std::size_t>(t.height()) * t.width();
    std::copy(t.data().begin() + begin * plane, t.data().begin() + end * plane, out.data().begin());
    return out;
}

}  // namespace pyrflow
