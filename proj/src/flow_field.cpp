#include "pyrflow/flow_field.hpp"

#include <algorithm>

#include "pyrflow/error.hpp"

namespace pyrflow {

FlowField::FlowField(int height, int width) : u_({1, height, width}), v_({1, height, width}) {}

FlowField::FlowField(Tensor u, Tensor v, std::optional<std::vector<std::uint8_t>> valid)
    : u_(std::move(u)), v_(std::move(v)), valid_(std::move(valid)) {
    if (u_.rank() != 3 || u_.channels() != 1 || u_.dims() != v_.dims()) {
        throw ShapeError("flow planes must be matching Tensor[1,H,W], got " + u_.shape_string() +
                         " and " + v_.shape_string());
    }
    if (valid_ && valid_->size() != u_.size()) throw ShapeError("flow mask size mismatch");
}

FlowField FlowField::from_tensor(const Tensor& uv) {
    if (uv.rank() != 3 || uv.channels() != 2) {
        throw ShapeError("flow tensor must be [2,H,W], got " + uv.shape_string());
    }
    return FlowField(slice_channels(uv, 0, 1), slice_channels(uv, 1, 2));
}

Tensor FlowField::to_tensor() const { return concat_channels({&u_, &v_}); }

std::vector<std::uint8_t>& FlowField::mask() {
    if (!valid_) valid_.emplace(pixel_count(), std::uint8_t{1});
    return *valid_;
}

void FlowField::set_mask(std::vector<std::uint8_t> valid) {
    if (valid.size() != pixel_count()) throw ShapeError("flow mask size mismatch");
    valid_ = std::move(valid);
}

std::size_t FlowField::valid_count() const {
    if (!valid_) return pixel_count();
    return static_cast<std::size_t>(
        std::count_if(valid_->begin(), valid_->end(), [](std::uint8_t m) { return m != 0; }));
}

}  // namespace pyrflow
