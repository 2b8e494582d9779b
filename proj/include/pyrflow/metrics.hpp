#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pyrflow/flow_field.hpp"
#include "pyrflow/tensor_ops.hpp"

namespace pyrflow {

using Mask = std::vector<std::uint8_t>;

/// Pixels valid in both fields (missing masks count as all-valid).
Mask joint_valid(const FlowField& pred, const FlowField& gt);

/// Per-pixel endpoint error, Tensor[1,H,W]; excluded pixels hold 0.
Tensor epe_map(const FlowField& pred, const FlowField& gt, const Mask& valid);

/// Mean endpoint error over valid pixels. Throws EmptyDomainError when no
/// pixel is valid.
double aepe(const FlowField& pred, const FlowField& gt, const Mask& valid);

inline constexpr double kOutlierAbsolute = 3.0;
inline constexpr double kOutlierRelative = 0.05;

/// Percentage of valid pixels with epe > 3 px and epe > 5% of |gt|.
double fl_all(const FlowField& pred, const FlowField& gt, const Mask& valid);

/// Thresholds t_i = i*step for i = 1..count, weights 1 - (i-1)/count.
struct WaucConfig {
    int count = 100;
    double step = 0.05;
};

/// Weighted area under the inlier-rate curve, in percent.
double wauc(const FlowField& pred, const FlowField& gt, const Mask& valid, const WaucConfig& config = {});

/// Region partitions; ranges are lower-inclusive: [0,10), [10,60), [60,inf).
inline constexpr std::array<double, 2> kRegionEdges = {10.0, 60.0};
inline constexpr std::array<const char*, 3> kVelocityRegions = {"s0-10", "s10-60", "s60+"};
inline constexpr std::array<const char*, 3> kDistanceRegions = {"d0-10", "d10-60", "d60+"};

/// Index 0..2 of `value` within kRegionEdges.
int region_bucket(double value);

/// Valid pixels partitioned by ground-truth speed.
std::array<Mask, 3> velocity_masks(const FlowField& gt, const Mask& valid);

/// Exact Euclidean distance from each pixel to the nearest occlusion
/// boundary pixel (a pixel whose occlusion label differs from a 4-neighbor).
/// All +inf when there is no boundary.
std::vector<double> occlusion_boundary_distance(const Mask& occ, int height, int width);

/// Valid pixels partitioned by distance to the occlusion boundary; with no
/// boundary every valid pixel lands in d60+.
std::array<Mask, 3> occlusion_distance_masks(const Mask& occ, int height, int width, const Mask& valid);

struct RegionStat {
    double aepe = 0.0;  // 0 when count == 0
    std::size_t count = 0;
    friend bool operator==(const RegionStat&, const RegionStat&) = default;
};

struct EvalReport {
    double aepe = 0.0;     // px
    double fl_all = 0.0;   // percent
    double wauc = 0.0;     // percent
    std::size_t pixel_count = 0;
    std::map<std::string, RegionStat> regions;  // s-regions always, d-regions with an occlusion mask
};

EvalReport evaluate(const FlowField& pred, const FlowField& gt, const Mask& valid,
                    const std::optional<Mask>& occ = std::nullopt, const WaucConfig& wauc_config = {});

/// Frame-mean of each metric. Region AEPEs average over frames where the
/// region is non-empty; counts are summed.
EvalReport aggregate(const std::vector<EvalReport>& frames);

/// "key=value" lines, one per field.
std::string to_key_value(const EvalReport& report);

/// JSON document: {"frames": [{"name":..., ...}], "aggregate": {...}}.
std::string reports_to_json(const std::vector<std::pair<std::string, EvalReport>>& frames,
                            const EvalReport& aggregate);

}  // namespace pyrflow
