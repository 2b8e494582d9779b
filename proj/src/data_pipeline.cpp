#include "pyrflow/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pyrflow/error.hpp"

namespace pyrflow {

namespace {

// Independent random streams per augmentation family.
enum Stream : std::uint64_t {
    kScheduleStream = 1,
    kPhotometricStream = 2,
    kSpatialStream = 3,
    kEraseStream = 4,
    kCropStream = 5,
};

void require_image(const Tensor& image, const char* what) {
    if (image.rank() != 3 || image.channels() != 3) {
        throw ShapeError(std::string(what) + " must be Tensor[3,H,W], got " + image.shape_string());
    }
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

double gray(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const double delta = mx - mn;
    v = mx;
    s = mx > 0.0 ? delta / mx : 0.0;
    if (delta <= 0.0) {
        h = 0.0;
        return;
    }
    if (mx == r) {
        h = (g - b) / delta;
    } else if (mx == g) {
        h = 2.0 + (b - r) / delta;
    } else {
        h = 4.0 + (r - g) / delta;
    }
    h /= 6.0;
    h -= std::floor(h);
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    const double h6 = (h - std::floor(h)) * 6.0;
    const int sector = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: r = v, g = t, b = p; break;
        case 1: r = q, g = v, b = p; break;
        case 2: r = p, g = v, b = t; break;
        case 3: r = p, g = q, b = v; break;
        case 4: r = t, g = p, b = v; break;
        default: r = v, g = p, b = q; break;
    }
}

struct BilinearTap {
    int x0, x1, y0, y1;
    float ax, ay;
};

BilinearTap clamped_tap(double x, double y, int width, int height) {
    x = std::clamp(x, 0.0, static_cast<double>(width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height - 1));
    BilinearTap t;
    t.x0 = static_cast<int>(x);
    t.y0 = static_cast<int>(y);
    t.x1 = std::min(t.x0 + 1, width - 1);
    t.y1 = std::min(t.y0 + 1, height - 1);
    t.ax = static_cast<float>(x - t.x0);
    t.ay = static_cast<float>(y - t.y0);
    return t;
}

float sample_plane(const Tensor& t, int c, const BilinearTap& p) {
    const float top = (1.0f - p.ax) * t.at(c, p.y0, p.x0) + p.ax * t.at(c, p.y0, p.x1);
    const float bottom = (1.0f - p.ax) * t.at(c, p.y1, p.x0) + p.ax * t.at(c, p.y1, p.x1);
    return (1.0f - p.ay) * top + p.ay * bottom;
}

Tensor crop_tensor(const Tensor& t, int y0, int x0, int h, int w) {
    Tensor out({t.channels(), h, w});
    for (int c = 0; c < t.channels(); ++c) {
        for (int y = 0; y < h; ++y) std::copy_n(&t.at(c, y0 + y, x0), w, &out.at(c, y, 0));
    }
    return out;
}

void check_range(const Range& r, const char* name) {
    if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
        throw ConfigError(std::string("invalid range for ") + name);
    }
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ConfigError("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());
    const std::uint64_t threshold = (0 - span) % span;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r < threshold);
    return lo + static_cast<std::int64_t>(r % span);
}

std::vector<DatasetSpec> standard_mix(std::size_t sintel_clean, std::size_t sintel_final, std::size_t kitti,
                                      std::size_t hd1k, std::size_t viper) {
    return {{"sintel_clean", sintel_clean, 50},
            {"sintel_final", sintel_final, 50},
            {"kitti", kitti, 500},
            {"hd1k", hd1k, 2},
            {"viper", viper, 1}};
}

std::vector<ScheduleEntry> build_schedule(const std::vector<DatasetSpec>& specs, std::uint64_t seed) {
    std::size_t total = 0;
    for (const auto& s : specs) total += s.size * s.weight;
    if (total == 0) throw ConfigError("dataset mix yields an empty schedule");
    std::vector<ScheduleEntry> out;
    out.reserve(total);
    for (std::size_t d = 0; d < specs.size(); ++d) {
        for (std::size_t rep = 0; rep < specs[d].weight; ++rep) {
            for (std::size_t i = 0; i < specs[d].size; ++i) out.push_back({d, i});
        }
    }
    Rng rng(seed, kScheduleStream);
    for (std::size_t i = out.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
        std::swap(out[i], out[j]);
    }
    return out;
}

std::string export_schedule(const std::vector<ScheduleEntry>& schedule, const std::vector<DatasetSpec>& specs) {
    std::string out;
    for (const auto& e : schedule) {
        out += specs.at(e.dataset).name;
        out += ' ';
        out += std::to_string(e.index);
        out += '\n';
    }
    return out;
}

FlowField viper_sanitize(FlowField gt, const ViperFilter& filter) {
    const double limit2 = filter.max_flow * filter.max_flow;
    std::vector<std::uint8_t>& mask = gt.mask();
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            const double u = gt.u(y, x), v = gt.v(y, x);
            if (y >= filter.max_row || u * u + v * v > limit2) {
                mask[static_cast<std::size_t>(y) * gt.width() + x] = 0;
            }
        }
    }
    return gt;
}

void AugmentParams::validate() const {
    check_range(photometric.brightness, "brightness");
    check_range(photometric.contrast, "contrast");
    check_range(photometric.saturation, "saturation");
    check_range(photometric.hue, "hue");
    if (photometric.contrast.lo < 0.0 || photometric.saturation.lo < 0.0) {
        throw ConfigError("contrast and saturation factors must be >= 0");
    }
    if (!(spatial.min_log2_scale <= spatial.max_log2_scale) || spatial.max_log2_stretch < 0.0) {
        throw ConfigError("invalid spatial scale bounds");
    }
    if (spatial.stretch_probability < 0.0 || spatial.stretch_probability > 1.0) {
        throw ConfigError("stretch_probability must be in [0,1]");
    }
    if (spatial.crop_height < 0 || spatial.crop_width < 0 || spatial.max_retries < 1) {
        throw ConfigError("invalid spatial crop/retry settings");
    }
    if (erase.probability < 0.0 || erase.probability > 1.0) throw ConfigError("erase probability must be in [0,1]");
    if (erase.min_rects < 0 || erase.min_rects > erase.max_rects || erase.min_side < 1 ||
        erase.min_side > erase.max_side) {
        throw ConfigError("invalid erase rectangle settings");
    }
}

PhotometricDraw sample_photometric(const PhotometricParams& params, std::uint64_t seed) {
    Rng rng(seed, kPhotometricStream);
    PhotometricDraw d;
    d.brightness = rng.uniform(params.brightness.lo, params.brightness.hi);
    d.contrast = rng.uniform(params.contrast.lo, params.contrast.hi);
    d.saturation = rng.uniform(params.saturation.lo, params.saturation.hi);
    d.hue = rng.uniform(params.hue.lo, params.hue.hi);
    return d;
}

Tensor apply_photometric(const Tensor& image, const PhotometricDraw& draw) {
    require_image(image, "photometric input");
    Tensor out = image;
    const int h = image.height(), w = image.width();
    const std::size_t n = static_cast<std::size_t>(h) * w;
    float* r = out.plane(0);
    float* g = out.plane(1);
    float* b = out.plane(2);

    if (draw.brightness != 0.0) {
        for (float& v : out.data()) v = clamp01(v + draw.brightness);
    }
    if (draw.contrast != 1.0) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += gray(r[i], g[i], b[i]);
        mean /= static_cast<double>(n);
        for (float& v : out.data()) v = clamp01(mean + draw.contrast * (v - mean));
    }
    if (draw.saturation != 1.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double l = gray(r[i], g[i], b[i]);
            r[i] = clamp01(l + draw.saturation * (r[i] - l));
            g[i] = clamp01(l + draw.saturation * (g[i] - l));
            b[i] = clamp01(l + draw.saturation * (b[i] - l));
        }
    }
    if (draw.hue != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            double hh, ss, vv, rr, gg, bb;
            rgb_to_hsv(r[i], g[i], b[i], hh, ss, vv);
            hsv_to_rgb(hh + draw.hue, ss, vv, rr, gg, bb);
            r[i] = clamp01(rr);
            g[i] = clamp01(gg);
            b[i] = clamp01(bb);
        }
    }
    return out;
}

std::pair<Tensor, Tensor> photometric_augment(const Tensor& image1, const Tensor& image2,
                                              const PhotometricParams& params, std::uint64_t seed) {
    const PhotometricDraw draw = sample_photometric(params, seed);
    return {apply_photometric(image1, draw), apply_photometric(image2, draw)};
}

SpatialDraw sample_spatial(const SpatialParams& params, int height, int width, std::uint64_t seed) {
    Rng rng(seed, kSpatialStream);
    for (int attempt = 0; attempt < params.max_retries; ++attempt) {
        const double scale = std::exp2(rng.uniform(params.min_log2_scale, params.max_log2_scale));
        SpatialDraw d{scale, scale};
        if (rng.uniform() < params.stretch_probability) {
            d.scale_x *= std::exp2(rng.uniform(-params.max_log2_stretch, params.max_log2_stretch));
            d.scale_y *= std::exp2(rng.uniform(-params.max_log2_stretch, params.max_log2_stretch));
        }
        const long nh = std::lround(height * d.scale_y), nw = std::lround(width * d.scale_x);
        if (nh >= std::max(1, params.crop_height) && nw >= std::max(1, params.crop_width)) return d;
    }
    throw ValidationError("spatial augmentation could not reach the crop size after " +
                          std::to_string(params.max_retries) + " draws");
}

FlowSample apply_spatial(const FlowSample& sample, const SpatialDraw& draw) {
    require_image(sample.image1, "image1");
    require_image(sample.image2, "image2");
    const int h = sample.image1.height(), w = sample.image1.width();
    if (sample.image2.dims() != sample.image1.dims() || sample.flow.height() != h || sample.flow.width() != w) {
        throw ShapeError("spatial_augment: images and flow must share dims");
    }
    if (!(draw.scale_x > 0.0) || !(draw.scale_y > 0.0)) throw ConfigError("spatial scales must be positive");
    const int nh = std::max(1, static_cast<int>(std::lround(h * draw.scale_y)));
    const int nw = std::max(1, static_cast<int>(std::lround(w * draw.scale_x)));
    const double rx = static_cast<double>(nw) / w, ry = static_cast<double>(nh) / h;

    FlowSample out{Tensor({3, nh, nw}), Tensor({3, nh, nw}), FlowField(nh, nw)};
    std::vector<std::uint8_t>* mask = sample.flow.has_mask() ? &out.flow.mask() : nullptr;
    for (int y = 0; y < nh; ++y) {
        const double sy = (y + 0.5) / ry - 0.5;
        for (int x = 0; x < nw; ++x) {
            const double sx = (x + 0.5) / rx - 0.5;
            const BilinearTap tap = clamped_tap(sx, sy, w, h);
            for (int c = 0; c < 3; ++c) {
                out.image1.at(c, y, x) = sample_plane(sample.image1, c, tap);
                out.image2.at(c, y, x) = sample_plane(sample.image2, c, tap);
            }
            out.flow.u(y, x) = static_cast<float>(rx * sample_plane(sample.flow.u_plane(), 0, tap));
            out.flow.v(y, x) = static_cast<float>(ry * sample_plane(sample.flow.v_plane(), 0, tap));
            if (mask) {
                const bool wx0 = tap.ax < 1.0f, wx1 = tap.ax > 0.0f, wy0 = tap.ay < 1.0f, wy1 = tap.ay > 0.0f;
                const bool ok = (!(wy0 && wx0) || sample.flow.valid(tap.y0, tap.x0)) &&
                                (!(wy0 && wx1) || sample.flow.valid(tap.y0, tap.x1)) &&
                                (!(wy1 && wx0) || sample.flow.valid(tap.y1, tap.x0)) &&
                                (!(wy1 && wx1) || sample.flow.valid(tap.y1, tap.x1));
                (*mask)[static_cast<std::size_t>(y) * nw + x] = ok ? 1 : 0;
            }
        }
    }
    return out;
}

FlowSample spatial_augment(const FlowSample& sample, const SpatialParams& params, std::uint64_t seed) {
    return apply_spatial(sample, sample_spatial(params, sample.image1.height(), sample.image1.width(), seed));
}

EraseResult occlusion_erase(const Tensor& image2, const EraseParams& params, std::uint64_t seed) {
    require_image(image2, "image2");
    Rng rng(seed, kEraseStream);
    EraseResult result{image2, {}};
    if (!(rng.uniform() < params.probability)) return result;

    const int h = image2.height(), w = image2.width();
    const std::size_t n = static_cast<std::size_t>(h) * w;
    float mean[3];
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        const float* p = image2.plane(c);
        for (std::size_t i = 0; i < n; ++i) sum += p[i];
        mean[c] = static_cast<float>(sum / static_cast<double>(n));
    }
    const auto count = rng.uniform_int(params.min_rects, params.max_rects);
    for (std::int64_t k = 0; k < count; ++k) {
        const int x0 = static_cast<int>(rng.uniform_int(0, w - 1));
        const int y0 = static_cast<int>(rng.uniform_int(0, h - 1));
        const int dx = static_cast<int>(rng.uniform_int(params.min_side, params.max_side));
        const int dy = static_cast<int>(rng.uniform_int(params.min_side, params.max_side));
        const EraseRect rect{x0, y0, std::min(w, x0 + dx), std::min(h, y0 + dy)};
        for (int c = 0; c < 3; ++c) {
            for (int y = rect.y0; y < rect.y1; ++y) {
                for (int x = rect.x0; x < rect.x1; ++x) result.image.at(c, y, x) = mean[c];
            }
        }
        result.rects.push_back(rect);
    }
    return result;
}

CropResult random_crop(const FlowSample& sample, int crop_height, int crop_width, std::uint64_t seed) {
    const int h = sample.image1.height(), w = sample.image1.width();
    if (crop_height < 1 || crop_width < 1) throw ConfigError("crop dims must be positive");
    if (h < crop_height || w < crop_width) {
        throw ValidationError("frame " + std::to_string(h) + "x" + std::to_string(w) + " smaller than crop " +
                              std::to_string(crop_height) + "x" + std::to_string(crop_width));
    }
    if (sample.image2.dims() != sample.image1.dims() || sample.flow.height() != h || sample.flow.width() != w) {
        throw ShapeError("random_crop: images and flow must share dims");
    }
    Rng rng(seed, kCropStream);
    CropResult r;
    r.y0 = static_cast<int>(rng.uniform_int(0, h - crop_height));
    r.x0 = static_cast<int>(rng.uniform_int(0, w - crop_width));
    r.sample.image1 = crop_tensor(sample.image1, r.y0, r.x0, crop_height, crop_width);
    r.sample.image2 = crop_tensor(sample.image2, r.y0, r.x0, crop_height, crop_width);
    FlowField flow(crop_tensor(sample.flow.u_plane(), r.y0, r.x0, crop_height, crop_width),
                   crop_tensor(sample.flow.v_plane(), r.y0, r.x0, crop_height, crop_width));
    if (sample.flow.has_mask()) {
        auto& mask = flow.mask();
        for (int y = 0; y < crop_height; ++y) {
            for (int x = 0; x < crop_width; ++x) {
                mask[static_cast<std::size_t>(y) * crop_width + x] = sample.flow.valid(r.y0 + y, r.x0 + x) ? 1 : 0;
            }
        }
    }
    r.sample.flow = std::move(flow);
    return r;
}

PipelineConfig parse_pipeline_config(std::string_view text) {
    PipelineConfig cfg;
    std::string section;
    DatasetSpec* dataset = nullptr;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;

    auto fail = [&](const std::string& why) {
        throw ConfigError("config line " + std::to_string(line_no) + ": " + why);
    };
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    auto number = [&](const std::string& v) {
        std::size_t used = 0;
        double d = 0.0;
        try {
            d = std::stod(v, &used);
        } catch (const std::exception&) {
            fail("expected a number, got '" + v + "'");
        }
        if (trim(v.substr(used)).size()) fail("trailing characters in '" + v + "'");
        return d;
    };
    auto integer = [&](const std::string& v) {
        const double d = number(v);
        if (d != std::floor(d) || d < 0) fail("expected a non-negative integer, got '" + v + "'");
        return static_cast<std::uint64_t>(d);
    };
    auto range = [&](const std::string& v) {
        std::istringstream parts(v);
        std::string lo, hi, extra;
        if (!(parts >> lo >> hi) || (parts >> extra)) fail("expected 'lo hi', got '" + v + "'");
        return Range{number(lo), number(hi)};
    };

    using Setter = std::function<void(const std::string&)>;
    auto& aug = cfg.augment;
    const std::map<std::string, std::map<std::string, Setter>> keys = {
        {"", {{"seed", [&](const std::string& v) { cfg.seed = integer(v); aug.seed = cfg.seed; }}}},
        {"photometric",
         {{"brightness", [&](const std::string& v) { aug.photometric.brightness = range(v); }},
          {"contrast", [&](const std::string& v) { aug.photometric.contrast = range(v); }},
          {"saturation", [&](const std::string& v) { aug.photometric.saturation = range(v); }},
          {"hue", [&](const std::string& v) { aug.photometric.hue = range(v); }}}},
        {"spatial",
         {{"min_log2_scale", [&](const std::string& v) { aug.spatial.min_log2_scale = number(v); }},
          {"max_log2_scale", [&](const std::string& v) { aug.spatial.max_log2_scale = number(v); }},
          {"max_log2_stretch", [&](const std::string& v) { aug.spatial.max_log2_stretch = number(v); }},
          {"stretch_probability", [&](const std::string& v) { aug.spatial.stretch_probability = number(v); }},
          {"crop_height", [&](const std::string& v) { aug.spatial.crop_height = static_cast<int>(integer(v)); }},
          {"crop_width", [&](const std::string& v) { aug.spatial.crop_width = static_cast<int>(integer(v)); }},
          {"max_retries", [&](const std::string& v) { aug.spatial.max_retries = static_cast<int>(integer(v)); }}}},
        {"erase",
         {{"probability", [&](const std::string& v) { aug.erase.probability = number(v); }},
          {"min_rects", [&](const std::string& v) { aug.erase.min_rects = static_cast<int>(integer(v)); }},
          {"max_rects", [&](const std::string& v) { aug.erase.max_rects = static_cast<int>(integer(v)); }},
          {"min_side", [&](const std::string& v) { aug.erase.min_side = static_cast<int>(integer(v)); }},
          {"max_side", [&](const std::string& v) { aug.erase.max_side = static_cast<int>(integer(v)); }}}},
        {"viper",
         {{"max_flow", [&](const std::string& v) { cfg.viper.max_flow = number(v); }},
          {"max_row", [&](const std::string& v) { cfg.viper.max_row = static_cast<int>(integer(v)); }}}},
        {"dataset",
         {{"size", [&](const std::string& v) { dataset->size = integer(v); }},
          {"weight", [&](const std::string& v) { dataset->weight = integer(v); }}}},
    };

    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header");
            std::istringstream header(line.substr(1, line.size() - 2));
            std::string name, arg, extra;
            header >> name >> arg >> extra;
            if (!extra.empty()) fail("malformed section header");
            if (name == "dataset") {
                if (arg.empty()) fail("[dataset] needs a name");
                cfg.datasets.push_back({arg, 0, 0});
                dataset = &cfg.datasets.back();
            } else if (!keys.count(name) || !arg.empty() || name.empty()) {
                fail("unknown section '" + name + "'");
            }
            section = name;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& table = keys.at(section);
        auto it = table.find(key);
        if (it == table.end()) fail("unknown key '" + key + "' in section [" + section + "]");
        it->second(value);
    }
    cfg.augment.validate();
    return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_pipeline_config(buf.str());
}

}  // namespace pyrflow
