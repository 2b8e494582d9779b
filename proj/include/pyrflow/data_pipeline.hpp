#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pyrflow/flow_field.hpp"
#include "pyrflow/tensor_ops.hpp"

namespace pyrflow {

/// Seeded generator with portable bounded draws (the standard distributions
/// are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);
    std::uint64_t next() { return engine_(); }
    /// [0, 1)
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Inclusive range [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 engine_;
};

struct DatasetSpec {
    std::string name;
    std::size_t size = 0;    // samples in the dataset
    std::size_t weight = 0;  // replication factor per epoch
};

/// Fine-tuning mix: 50 x Sintel clean, 50 x Sintel final, 500 x KITTI,
/// 2 x HD1K, 1 x VIPER, with the given dataset sizes.
std::vector<DatasetSpec> standard_mix(std::size_t sintel_clean, std::size_t sintel_final, std::size_t kitti,
                                      std::size_t hd1k, std::size_t viper);

struct ScheduleEntry {
    std::size_t dataset = 0;  // index into the spec list
    std::size_t index = 0;    // sample index within that dataset
    friend auto operator<=>(const ScheduleEntry&, const ScheduleEntry&) = default;
};

/// One epoch: every sample of dataset d appears weight_d times, then a
/// seeded Fisher-Yates shuffle. Throws ConfigError when the epoch is empty.
std::vector<ScheduleEntry> build_schedule(const std::vector<DatasetSpec>& specs, std::uint64_t seed);

/// "dataset_name index" per line.
std::string export_schedule(const std::vector<ScheduleEntry>& schedule, const std::vector<DatasetSpec>& specs);

struct ViperFilter {
    double max_flow = 300.0;  // strictly greater magnitudes are dropped
    int max_row = 700;        // rows >= max_row are dropped
};

/// Invalidates pixels with |flow| > max_flow or row >= max_row. Flow values
/// are untouched; only the mask changes.
FlowField viper_sanitize(FlowField gt, const ViperFilter& filter = {});

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Applied in order brightness, contrast, saturation, hue; clamped to [0,1]
/// after each step. A step whose sampled value is neutral is skipped.
struct PhotometricParams {
    Range brightness{-0.2, 0.2};     // additive offset
    Range contrast{0.6, 1.4};        // factor around the mean gray level
    Range saturation{0.6, 1.4};      // factor around each pixel's gray level
    Range hue{-0.5 / 3.14, 0.5 / 3.14};  // shift in turns of the hue circle
};

struct SpatialParams {
    double min_log2_scale = -0.2;
    double max_log2_scale = 0.5;
    double max_log2_stretch = 0.2;
    double stretch_probability = 0.8;
    int crop_height = 0;  // resampled frames smaller than this are redrawn
    int crop_width = 0;
    int max_retries = 32;
};

struct EraseParams {
    double probability = 0.5;
    int min_rects = 1;
    int max_rects = 3;
    int min_side = 50;
    int max_side = 100;
};

struct AugmentParams {
    PhotometricParams photometric;
    SpatialParams spatial;
    EraseParams erase;
    std::uint64_t seed = 0;

    /// Throws ConfigError on inverted ranges, probabilities outside [0,1] or
    /// non-positive sizes.
    void validate() const;
};

/// Crop presets used for pretraining and fine-tuning.
struct CropSize {
    int height;
    int width;
};
inline constexpr CropSize kCropChairs{368, 496};
inline constexpr CropSize kCropThings{384, 512};
inline constexpr CropSize kCropFinetune{320, 608};

/// Image pair (Tensor[3,H,W], values in [0,1]) and the ground truth flow.
struct FlowSample {
    Tensor image1;
    Tensor image2;
    FlowField flow;
};

struct PhotometricDraw {
    double brightness = 0.0;
    double contrast = 1.0;
    double saturation = 1.0;
    double hue = 0.0;
};

PhotometricDraw sample_photometric(const PhotometricParams& params, std::uint64_t seed);
Tensor apply_photometric(const Tensor& image, const PhotometricDraw& draw);
/// The same draw is applied to both images.
std::pair<Tensor, Tensor> photometric_augment(const Tensor& image1, const Tensor& image2,
                                              const PhotometricParams& params, std::uint64_t seed);

struct SpatialDraw {
    double scale_x = 1.0;
    double scale_y = 1.0;
};

/// Draws scales until the resampled frame covers the crop size; throws
/// ValidationError after max_retries failures.
SpatialDraw sample_spatial(const SpatialParams& params, int height, int width, std::uint64_t seed);
/// Resamples to round(H*sy) x round(W*sx) with edge-clamped bilinear
/// interpolation; flow values are multiplied by the realized per-axis
/// ratios. A resampled flow pixel is valid only if every source pixel with
/// nonzero weight was valid.
FlowSample apply_spatial(const FlowSample& sample, const SpatialDraw& draw);
FlowSample spatial_augment(const FlowSample& sample, const SpatialParams& params, std::uint64_t seed);

struct EraseRect {
    int x0, y0, x1, y1;  // half-open
};

struct EraseResult {
    Tensor image;
    std::vector<EraseRect> rects;  // empty when the erase branch was not taken
};

/// With the configured probability, fills 1-3 rectangles of image2 with its
/// pre-erase mean color.
EraseResult occlusion_erase(const Tensor& image2, const EraseParams& params, std::uint64_t seed);

struct CropResult {
    FlowSample sample;
    int y0 = 0;
    int x0 = 0;
};

/// Seeded uniform top-left; all planes cropped congruently.
CropResult random_crop(const FlowSample& sample, int crop_height, int crop_width, std::uint64_t seed);

/// Datasets, augmentation and VIPER settings read from a key=value file:
///
///   seed = 7
///   [dataset sintel_clean]
///   size = 1041
///   weight = 50
///   [photometric]      brightness = -0.2 0.2   (also contrast, saturation, hue)
///   [spatial]          min_log2_scale, max_log2_scale, max_log2_stretch,
///                      stretch_probability, crop_height, crop_width, max_retries
///   [erase]            probability, min_rects, max_rects, min_side, max_side
///   [viper]            max_flow, max_row
///
/// '#' starts a comment. Unknown keys are rejected.
struct PipelineConfig {
    std::vector<DatasetSpec> datasets;
    AugmentParams augment;
    ViperFilter viper;
    std::uint64_t seed = 0;
};

PipelineConfig parse_pipeline_config(std::string_view text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

}  // namespace pyrflow
