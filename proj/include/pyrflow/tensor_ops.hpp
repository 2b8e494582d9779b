#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pyrflow {

/// Dense row-major float array, width fastest. Rank 1..4.
///
/// Rank-3 tensors are read as (channels, height, width); rank-4 kernels as
/// (out channels, in channels, kernel height, kernel width).
class Tensor {
public:
    Tensor() = default;
    /// Zero-filled tensor of the given extents.
    explicit Tensor(std::vector<int> dims, float fill = 0.0f);
    /// Takes ownership of `data`; throws ShapeError on a size mismatch and
    /// ValidationError on NaN/Inf.
    Tensor(std::vector<int> dims, std::vector<float> data);

    const std::vector<int>& dims() const noexcept { return dims_; }
    int rank() const noexcept { return static_cast<int>(dims_.size()); }
    int dim(int i) const { return dims_.at(static_cast<std::size_t>(i)); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    int channels() const { return dim(rank() - 3); }
    int height() const { return dim(rank() - 2); }
    int width() const { return dim(rank() - 1); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    float* plane(int c) { return data_.data() + static_cast<std::size_t>(c) * height() * width(); }
    const float* plane(int c) const {
        return data_.data() + static_cast<std::size_t>(c) * height() * width();
    }

    float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    const float& at(int c, int y, int x) const { return data_[index(c, y, x)]; }
    float& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    const float& at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    bool all_finite() const noexcept;
    std::string shape_string() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * dims_[1] + y) * dims_[2] + x;
    }
    std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + y) * dims_[3] + x;
    }

    std::vector<int> dims_;
    std::vector<float> data_;
};

/// Sample position in pixel units; (0,0) is the top-left pixel center.
struct Point2 {
    float x = 0.0f;
    float y = 0.0f;
};

/// Direct-summation 2-D convolution with zero padding.
///
/// Every output element is accumulated as bias, then input channels in
/// ascending order, then kernel rows, then kernel columns. The order is fixed
/// so results are bitwise reproducible.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias,
              int stride = 1, int padding = 0);

/// Bilinear interpolation at each coordinate; neighbors outside the frame
/// contribute zero. Returns Tensor[C, coords.size()].
Tensor bilinear_sample(const Tensor& input, std::span<const Point2> coords);

/// Single-channel bilinear read with zero border (the scalar kernel behind
/// bilinear_sample).
float bilinear_at(const float* plane, int height, int width, float x, float y);

/// Non-overlapping 2x2 mean; odd trailing rows/columns average only the
/// cells present.
Tensor avg_pool2(const Tensor& input);

std::vector<float> softmax(std::span<const float> logits);
Tensor sigmoid(Tensor t);
Tensor tanh(Tensor t);
Tensor relu(Tensor t);

/// Stacks rank-3 tensors with equal spatial dims along the channel axis.
Tensor concat_channels(std::initializer_list<const Tensor*> parts);
/// Channels [begin, end) of a rank-3 tensor.
Tensor slice_channels(const Tensor& t, int begin, int end);

}  // namespace pyrflow
