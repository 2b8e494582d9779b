#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pyrflow/tensor_ops.hpp"

namespace pyrflow {

/// Per-pixel displacement (u right, v down) in pixels of its own grid, with an
/// optional validity mask (nonzero = valid). Without a mask every pixel is
/// valid.
class FlowField {
public:
    FlowField() = default;
    FlowField(int height, int width);
    /// u and v are Tensor[1,H,W]; the mask, if given, has H*W entries.
    FlowField(Tensor u, Tensor v, std::optional<std::vector<std::uint8_t>> valid = std::nullopt);

    /// From / to a Tensor[2,H,W] holding (u, v) planes.
    static FlowField from_tensor(const Tensor& uv);
    Tensor to_tensor() const;

    int height() const { return u_.empty() ? 0 : u_.height(); }
    int width() const { return u_.empty() ? 0 : u_.width(); }
    std::size_t pixel_count() const { return u_.size(); }

    float& u(int y, int x) { return u_.at(0, y, x); }
    float u(int y, int x) const { return u_.at(0, y, x); }
    float& v(int y, int x) { return v_.at(0, y, x); }
    float v(int y, int x) const { return v_.at(0, y, x); }
    const Tensor& u_plane() const { return u_; }
    const Tensor& v_plane() const { return v_; }

    bool has_mask() const { return valid_.has_value(); }
    bool valid(int y, int x) const {
        return !valid_ || (*valid_)[static_cast<std::size_t>(y) * width() + x] != 0;
    }
    /// Creates an all-valid mask on first use.
    std::vector<std::uint8_t>& mask();
    const std::optional<std::vector<std::uint8_t>>& mask_opt() const { return valid_; }
    void set_mask(std::vector<std::uint8_t> valid);
    void clear_mask() { valid_.reset(); }
    std::size_t valid_count() const;

    friend bool operator==(const FlowField&, const FlowField&) = default;

private:
    Tensor u_;
    Tensor v_;
    std::optional<std::vector<std::uint8_t>> valid_;
};

}  // namespace pyrflow
