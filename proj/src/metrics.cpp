#include "pyrflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pyrflow/error.hpp"

namespace pyrflow {

namespace {

void check_dims(const FlowField& pred, const FlowField& gt, const Mask& valid) {
    if (pred.height() != gt.height() || pred.width() != gt.width()) {
        throw ShapeError("prediction and ground truth dims differ");
    }
    if (valid.size() != gt.pixel_count()) throw ShapeError("validity mask size mismatch");
}

double epe_at(const FlowField& pred, const FlowField& gt, int y, int x) {
    const double du = static_cast<double>(pred.u(y, x)) - gt.u(y, x);
    const double dv = static_cast<double>(pred.v(y, x)) - gt.v(y, x);
    return std::sqrt(du * du + dv * dv);
}

double gt_norm(const FlowField& gt, int y, int x) {
    const double u = gt.u(y, x), v = gt.v(y, x);
    return std::sqrt(u * u + v * v);
}

// Valid-pixel endpoint errors in scan order.
std::vector<double> valid_epes(const FlowField& pred, const FlowField& gt, const Mask& valid) {
    check_dims(pred, gt, valid);
    std::vector<double> out;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (valid[static_cast<std::size_t>(y) * gt.width() + x]) out.push_back(epe_at(pred, gt, y, x));
        }
    }
    if (out.empty()) throw EmptyDomainError("no valid pixels to evaluate");
    return out;
}

RegionStat region_stat(const FlowField& pred, const FlowField& gt, const Mask& region) {
    RegionStat s;
    double sum = 0.0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!region[static_cast<std::size_t>(y) * gt.width() + x]) continue;
            sum += epe_at(pred, gt, y, x);
            ++s.count;
        }
    }
    if (s.count) s.aepe = sum / static_cast<double>(s.count);
    return s;
}

// 1-D squared distance transform of a sampled function (lower envelope of
// parabolas), exact for integer sample positions.
void distance_transform_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        while (k >= 0) {
            const double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -inf : ((f[q] + q * q) - (f[v[k - 1]] + v[k - 1] * v[k - 1])) / (2.0 * (q - v[k - 1]));
        z[k + 1] = inf;
    }
    if (k < 0) {
        std::fill(d, d + n, inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double dq = q - v[j];
        d[q] = dq * dq + f[v[j]];
    }
}

nlohmann::json report_json(const EvalReport& r) {
    nlohmann::json j;
    j["aepe"] = r.aepe;
    j["fl_all"] = r.fl_all;
    j["wauc"] = r.wauc;
    j["pixel_count"] = r.pixel_count;
    nlohmann::json regions = nlohmann::json::object();
    for (const auto& [name, stat] : r.regions) regions[name] = {{"aepe", stat.aepe}, {"count", stat.count}};
    j["regions"] = regions;
    return j;
}

}  // namespace

Mask joint_valid(const FlowField& pred, const FlowField& gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width()) {
        throw ShapeError("prediction and ground truth dims differ");
    }
    Mask m(gt.pixel_count(), 0);
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            m[static_cast<std::size_t>(y) * gt.width() + x] = pred.valid(y, x) && gt.valid(y, x);
        }
    }
    return m;
}

Tensor epe_map(const FlowField& pred, const FlowField& gt, const Mask& valid) {
    check_dims(pred, gt, valid);
    Tensor out({1, gt.height(), gt.width()});
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (valid[static_cast<std::size_t>(y) * gt.width() + x]) {
                out.at(0, y, x) = static_cast<float>(epe_at(pred, gt, y, x));
            }
        }
    }
    return out;
}

double aepe(const FlowField& pred, const FlowField& gt, const Mask& valid) {
    const auto epes = valid_epes(pred, gt, valid);
    double sum = 0.0;
    for (double e : epes) sum += e;
    return sum / static_cast<double>(epes.size());
}

double fl_all(const FlowField& pred, const FlowField& gt, const Mask& valid) {
    check_dims(pred, gt, valid);
    std::size_t total = 0, outliers = 0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!valid[static_cast<std::size_t>(y) * gt.width() + x]) continue;
            ++total;
            const double e = epe_at(pred, gt, y, x);
            if (e > kOutlierAbsolute && e > kOutlierRelative * gt_norm(gt, y, x)) ++outliers;
        }
    }
    if (!total) throw EmptyDomainError("no valid pixels to evaluate");
    return 100.0 * static_cast<double>(outliers) / static_cast<double>(total);
}

double wauc(const FlowField& pred, const FlowField& gt, const Mask& valid, const WaucConfig& config) {
    if (config.count < 1 || !(config.step > 0.0)) throw ConfigError("WAUC needs count >= 1 and step > 0");
    auto epes = valid_epes(pred, gt, valid);
    std::sort(epes.begin(), epes.end());
    const double n = static_cast<double>(epes.size());
    double weighted = 0.0, weight_sum = 0.0;
    for (int i = 1; i <= config.count; ++i) {
        const double threshold = i * config.step;
        const double weight = 1.0 - static_cast<double>(i - 1) / config.count;
        const auto inliers = std::upper_bound(epes.begin(), epes.end(), threshold) - epes.begin();
        weighted += weight * static_cast<double>(inliers) / n;
        weight_sum += weight;
    }
    return 100.0 * weighted / weight_sum;
}

int region_bucket(double value) {
    if (value < kRegionEdges[0]) return 0;
    if (value < kRegionEdges[1]) return 1;
    return 2;
}

std::array<Mask, 3> velocity_masks(const FlowField& gt, const Mask& valid) {
    if (valid.size() != gt.pixel_count()) throw ShapeError("validity mask size mismatch");
    std::array<Mask, 3> masks;
    for (auto& m : masks) m.assign(gt.pixel_count(), 0);
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * gt.width() + x;
            if (valid[i]) masks[region_bucket(gt_norm(gt, y, x))][i] = 1;
        }
    }
    return masks;
}

std::vector<double> occlusion_boundary_distance(const Mask& occ, int height, int width) {
    if (occ.size() != static_cast<std::size_t>(height) * width) throw ShapeError("occlusion mask size mismatch");
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto label = [&](int y, int x) { return occ[static_cast<std::size_t>(y) * width + x] != 0; };
    std::vector<double> f(occ.size(), inf);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const bool l = label(y, x);
            const bool boundary = (x > 0 && label(y, x - 1) != l) || (x + 1 < width && label(y, x + 1) != l) ||
                                  (y > 0 && label(y - 1, x) != l) || (y + 1 < height && label(y + 1, x) != l);
            if (boundary) f[static_cast<std::size_t>(y) * width + x] = 0.0;
        }
    }
    const int n = std::max(height, width);
    std::vector<int> v(n);
    std::vector<double> z(n + 1), column(n), out(n);
    // Columns, then rows.
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) column[y] = f[static_cast<std::size_t>(y) * width + x];
        distance_transform_1d(column.data(), out.data(), height, v, z);
        for (int y = 0; y < height; ++y) f[static_cast<std::size_t>(y) * width + x] = out[y];
    }
    for (int y = 0; y < height; ++y) {
        double* row = f.data() + static_cast<std::size_t>(y) * width;
        std::copy(row, row + width, column.begin());
        distance_transform_1d(column.data(), row, width, v, z);
    }
    for (double& d : f) d = std::sqrt(d);
    return f;
}

std::array<Mask, 3> occlusion_distance_masks(const Mask& occ, int height, int width, const Mask& valid) {
    if (valid.size() != occ.size()) throw ShapeError("validity mask size mismatch");
    const auto dist = occlusion_boundary_distance(occ, height, width);
    std::array<Mask, 3> masks;
    for (auto& m : masks) m.assign(occ.size(), 0);
    for (std::size_t i = 0; i < occ.size(); ++i) {
        if (valid[i]) masks[region_bucket(dist[i])][i] = 1;
    }
    return masks;
}

EvalReport evaluate(const FlowField& pred, const FlowField& gt, const Mask& valid, const std::optional<Mask>& occ,
                    const WaucConfig& wauc_config) {
    EvalReport r;
    r.aepe = aepe(pred, gt, valid);
    r.fl_all = fl_all(pred, gt, valid);
    r.wauc = wauc(pred, gt, valid, wauc_config);
    r.pixel_count = static_cast<std::size_t>(std::count_if(valid.begin(), valid.end(), [](auto m) { return m != 0; }));
    const auto speed = velocity_masks(gt, valid);
    for (int k = 0; k < 3; ++k) r.regions[kVelocityRegions[k]] = region_stat(pred, gt, speed[k]);
    if (occ) {
        const auto dist = occlusion_distance_masks(*occ, gt.height(), gt.width(), valid);
        for (int k = 0; k < 3; ++k) r.regions[kDistanceRegions[k]] = region_stat(pred, gt, dist[k]);
    }
    return r;
}

EvalReport aggregate(const std::vector<EvalReport>& frames) {
    if (frames.empty()) throw EmptyDomainError("no frames to aggregate");
    EvalReport out;
    std::map<std::string, std::size_t> contributing;
    for (const auto& f : frames) {
        out.aepe += f.aepe;
        out.fl_all += f.fl_all;
        out.wauc += f.wauc;
        out.pixel_count += f.pixel_count;
        for (const auto& [name, stat] : f.regions) {
            RegionStat& acc = out.regions[name];
            acc.count += stat.count;
            if (stat.count) {
                acc.aepe += stat.aepe;
                ++contributing[name];
            }
        }
    }
    const double n = static_cast<double>(frames.size());
    out.aepe /= n;
    out.fl_all /= n;
    out.wauc /= n;
    for (auto& [name, stat] : out.regions) {
        if (contributing[name]) stat.aepe /= static_cast<double>(contributing[name]);
    }
    return out;
}

std::string to_key_value(const EvalReport& r) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "aepe=" << r.aepe << '\n' << "fl_all=" << r.fl_all << '\n' << "wauc=" << r.wauc << '\n';
    os << "pixel_count=" << r.pixel_count << '\n';
    for (const auto& [name, stat] : r.regions) {
        os << "aepe_" << name << '=' << stat.aepe << '\n' << "count_" << name << '=' << stat.count << '\n';
    }
    return os.str();
}

std::string reports_to_json(const std::vector<std::pair<std::string, EvalReport>>& frames,
                            const EvalReport& aggregate_report) {
    nlohmann::json doc;
    doc["frames"] = nlohmann::json::array();
    for (const auto& [name, report] : frames) {
        nlohmann::json j = report_json(report);
        j["name"] = name;
        doc["frames"].push_back(std::move(j));
    }
    doc["aggregate"] = report_json(aggregate_report);
    return doc.dump(2) + "\n";
}

}  // namespace pyrflow
