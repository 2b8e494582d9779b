#include "acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "pyrflow/correlation.hpp"
#include "pyrflow/data_pipeline.hpp"
#include "pyrflow/flow_io.hpp"
#include "pyrflow/metrics.hpp"
#include "pyrflow/network.hpp"
#include "pyrflow/pyramid_flow.hpp"

namespace pyrflow::acceptance {

namespace {

using Clock = std::chrono::steady_clock;

// Collects named checks; the criterion passes when all hold.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok) failures_.push_back(what);
    }
    void note(const std::string& s) { notes_.push_back(s); }
    bool ok() const { return failures_.empty(); }
    std::string detail() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < notes_.size(); ++i) os << (i ? "; " : "") << notes_[i];
        for (const auto& f : failures_) os << (os.tellp() ? "; " : "") << "FAILED: " << f;
        return os.str();
    }

private:
    std::vector<std::string> failures_;
    std::vector<std::string> notes_;
};

std::string num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

template <typename Body>
CriterionResult run(int id, const char* name, Body body) {
    const auto start = Clock::now();
    Checks checks;
    try {
        body(checks);
    } catch (const std::exception& e) {
        checks.expect(false, std::string("exception: ") + e.what());
    }
    CriterionResult r{id, name, checks.ok(), checks.detail(),
                      std::chrono::duration<double>(Clock::now() - start).count()};
    return r;
}

ModelConfig small_config() {
    ModelConfig c;
    c.feature_dim = 16;
    c.hidden_dim = 16;
    c.context_dim = 8;
    c.motion_dim = 18;
    c.corr_levels = 2;
    c.corr_radius = 2;
    return c;
}

bool bitwise_equal(const FlowField& a, const FlowField& b) {
    return a.u_plane().dims() == b.u_plane().dims() &&
           std::memcmp(a.u_plane().data().data(), b.u_plane().data().data(), a.u_plane().size() * 4) == 0 &&
           std::memcmp(a.v_plane().data().data(), b.v_plane().data().data(), a.v_plane().size() * 4) == 0;
}

}  // namespace

CriterionResult correlation_equivalence() {
    return run(1, "correlation oracle equivalence", [](Checks& c) {
        const auto start = Clock::now();
        Rng rng(101);
        double worst_volume = 0.0, worst_lookup = 0.0;
        const int trials = 120;
        for (int t = 0; t < trials; ++t) {
            const int d = static_cast<int>(rng.uniform_int(1, 16));
            const int h1 = static_cast<int>(rng.uniform_int(1, 8)), w1 = static_cast<int>(rng.uniform_int(1, 8));
            const int h2 = static_cast<int>(rng.uniform_int(4, 8)), w2 = static_cast<int>(rng.uniform_int(4, 8));
            const Tensor f1 = oracle::random_tensor({d, h1, w1}, 1000 + t);
            const Tensor f2 = oracle::random_tensor({d, h2, w2}, 5000 + t);
            CorrelationVolume vol = build_corr_volume(f1, f2);
            const Tensor ref = oracle::corr_volume(f1, f2);
            worst_volume = std::max(worst_volume, oracle::max_abs_diff(vol.values, ref));

            const int levels = static_cast<int>(rng.uniform_int(1, 3));
            const int radius = static_cast<int>(rng.uniform_int(0, 3));
            const FlowField flow = oracle::random_flow(h1, w1, 9000 + t, 4.0f);
            const CorrelationPyramid pyr(std::move(vol), levels);
            const LookupField got = lookup(pyr, flow, radius);
            const Tensor want = oracle::lookup(ref, h1, w1, flow, levels, radius);
            worst_lookup = std::max(worst_lookup, oracle::max_abs_diff(got.values, want));
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        c.note(std::to_string(trials) + " pairs, volume max err " + num(worst_volume) + ", lookup max err " +
               num(worst_lookup) + ", " + num(secs) + " s");
        c.expect(worst_volume <= 1e-5, "volume error <= 1e-5");
        c.expect(worst_lookup <= 1e-5, "lookup error <= 1e-5");
        c.expect(secs < 10.0, "runtime < 10 s");
    });
}

CriterionResult architecture_contract() {
    return run(2, "architecture contract", [](Checks& c) {
        const ModelWeights w = init_weights(ModelConfig{}, 2020);
        const Tensor i1 = oracle::random_tensor({3, 64, 96}, 1, 0.0f, 255.0f);
        const Tensor i2 = oracle::random_tensor({3, 64, 96}, 2, 0.0f, 255.0f);
        const FlowEstimate a = estimate_flow(i1, i2, w);
        const FlowEstimate b = estimate_flow(i1, i2, w);
        c.expect(a.flow.height() == 64 && a.flow.width() == 96, "output dims 64x96");
        c.expect(a.trace.levels.size() == 2, "exactly two pyramid levels");
        if (a.trace.levels.size() == 2) {
            const auto& l8 = a.trace.levels[0];
            const auto& l4 = a.trace.levels[1];
            c.expect(l8.iterates.size() == 12 && l4.iterates.size() == 12, "12 + 12 iterations");
            c.expect(l8.stride == 8 && l4.stride == 4, "strides 8 then 4");
            for (const auto& f : l8.iterates) c.expect(f.height() == 8 && f.width() == 12, "1/8 iterate dims 8x12");
            for (const auto& f : l4.iterates) c.expect(f.height() == 16 && f.width() == 24, "1/4 iterate dims 16x24");
            c.expect(l4.corr_volume_elements == 16 * l8.corr_volume_elements, "1/4 volume is 16x the 1/8 volume");
            c.note("iterations " + std::to_string(l8.iterates.size()) + "+" + std::to_string(l4.iterates.size()) +
                   ", corr elements " + std::to_string(l8.corr_volume_elements) + " / " +
                   std::to_string(l4.corr_volume_elements) + ", " + num(a.trace.seconds) + " s per pass");
        }
        c.expect(bitwise_equal(a.flow, b.flow), "bitwise repeatable output");
    });
}

CriterionResult weight_sharing() {
    return run(3, "weight sharing", [](Checks& c) {
        const ModelWeights w = init_weights(ModelConfig{}, 3);
        std::map<std::string, int> update_names;
        for (const auto& spec : parameter_specs(w.config())) {
            if (spec.name.rfind("update.", 0) == 0) ++update_names[spec.name];
        }
        std::size_t archive_update = 0;
        for (const auto& [name, t] : w.entries()) {
            if (name.rfind("update.", 0) == 0) {
                ++archive_update;
                c.expect(update_names.count(name) == 1, "update entry '" + name + "' is a declared parameter");
            }
            c.expect(name.find("eighth") == std::string::npos && name.find("quarter") == std::string::npos &&
                         name.find("level") == std::string::npos,
                     "no level-qualified entry names");
        }
        for (const auto& [name, n] : update_names) c.expect(n == 1, "one spec per update parameter");
        c.expect(archive_update == update_names.size(), "archive holds exactly one tensor per update parameter");

        const ModelWeights sw = init_weights(small_config(), 3);
        const Tensor i1 = oracle::random_tensor({3, 32, 48}, 11, 0.0f, 255.0f);
        const Tensor i2 = oracle::random_tensor({3, 32, 48}, 12, 0.0f, 255.0f);
        const FlowEstimate est = estimate_flow(i1, i2, sw, FlowOptions{2});
        const auto& p8 = est.trace.levels.at(0).update_parameters;
        const auto& p4 = est.trace.levels.at(1).update_parameters;
        c.expect(!p8.empty() && p8 == p4, "both levels read the same tensor addresses");
        std::set<const Tensor*> archive_addresses;
        for (const auto& [name, t] : sw.entries()) {
            if (name.rfind("update.", 0) == 0) archive_addresses.insert(&t);
        }
        c.expect(std::set<const Tensor*>(p8.begin(), p8.end()) == archive_addresses,
                 "level parameters are exactly the archive's update entries");
        c.note(std::to_string(archive_update) + " update tensors, " + std::to_string(p8.size()) +
               " bound at each level");
    });
}

CriterionResult convex_upsampling() {
    return run(4, "convex upsampling", [](Checks& c) {
        double worst_constant = 0.0, worst_oracle = 0.0, worst_bound = 0.0;
        for (int t = 0; t < 40; ++t) {
            const int h = 1 + t % 8, w = 1 + (t * 3) % 8;
            const Tensor mask = oracle::random_tensor({kMaskChannels, h, w}, 300 + t, -4.0f, 4.0f);
            const float cu = -3.25f + 0.5f * t, cv = 1.5f - 0.25f * t;
            Tensor flow({2, h, w});
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) flow.at(0, y, x) = cu, flow.at(1, y, x) = cv;
            }
            const Tensor up = convex_upsample(flow, mask, 4);
            for (int y = 0; y < 4 * h; ++y) {
                for (int x = 0; x < 4 * w; ++x) {
                    worst_constant = std::max({worst_constant, std::fabs(up.at(0, y, x) - 4.0 * cu) / std::max(1.0, std::fabs(4.0 * cu)),
                                               std::fabs(up.at(1, y, x) - 4.0 * cv) / std::max(1.0, std::fabs(4.0 * cv))});
                }
            }

            const Tensor rflow = oracle::random_tensor({2, h, w}, 700 + t, -5.0f, 5.0f);
            const Tensor got = convex_upsample(rflow, mask, 4);
            worst_oracle = std::max(worst_oracle, oracle::max_abs_diff(got, oracle::convex_upsample(rflow, mask, 4)));
            for (int ch = 0; ch < 2; ++ch) {
                for (int y = 0; y < 4 * h; ++y) {
                    for (int x = 0; x < 4 * w; ++x) {
                        double lo = INFINITY, hi = -INFINITY;
                        for (int dy = -1; dy <= 1; ++dy) {
                            for (int dx = -1; dx <= 1; ++dx) {
                                const double v = 4.0 * rflow.at(ch, std::clamp(y / 4 + dy, 0, h - 1),
                                                                std::clamp(x / 4 + dx, 0, w - 1));
                                lo = std::min(lo, v), hi = std::max(hi, v);
                            }
                        }
                        const double v = got.at(ch, y, x);
                        worst_bound = std::max({worst_bound, lo - v, v - hi});
                    }
                }
            }
        }
        c.note("constant rel err " + num(worst_constant) + ", oracle err " + num(worst_oracle) +
               ", bound excess " + num(worst_bound));
        c.expect(worst_constant <= 1e-5, "constant flow maps to 4x constant");
        c.expect(worst_oracle <= 1e-5, "random case within 1e-5 of the oracle");
        c.expect(worst_bound <= 1e-5, "outputs inside the local 3x3 hull");
    });
}

CriterionResult synthetic_end_to_end() {
    return run(5, "synthetic end-to-end", [](Checks& c) {
        const float true_u = 1.5f, true_v = -0.75f;
        const Tensor i1 = oracle::bandlimited_texture(40, 56, 0.0, 0.0);
        const Tensor i2 = oracle::bandlimited_texture(40, 56, true_u, true_v);
        const ModelWeights w = init_weights(small_config(), 5);

        const FlowEstimate est = estimate_flow(i1, i2, w);
        const FlowField ref = oracle::estimate_flow(i1, i2, w, kDefaultIterations);
        const double pipeline_err = std::max(oracle::max_abs_diff(est.flow.u_plane(), ref.u_plane()),
                                             oracle::max_abs_diff(est.flow.v_plane(), ref.v_plane()));
        // float32 against double accumulation over 24 recurrent steps; scale with the flow magnitude.
        double scale = 1.0;
        for (float v : ref.u_plane().data()) scale = std::max(scale, std::fabs(double(v)));
        for (float v : ref.v_plane().data()) scale = std::max(scale, std::fabs(double(v)));
        c.expect(pipeline_err <= 1e-5 * scale, "pipeline agrees with the scalar oracle within 1e-5 relative");
        c.expect(est.flow.u_plane().all_finite() && est.flow.v_plane().all_finite(), "finite output");

        FlowField gt(40, 56);
        for (int y = 0; y < 40; ++y) {
            for (int x = 0; x < 56; ++x) gt.u(y, x) = true_u, gt.v(y, x) = true_v;
        }
        const EvalReport report = evaluate(est.flow, gt, joint_valid(est.flow, gt));
        double sum = 0.0;
        for (int y = 0; y < 40; ++y) {
            for (int x = 0; x < 56; ++x) sum += std::hypot(double(est.flow.u(y, x)) - true_u, double(est.flow.v(y, x)) - true_v);
        }
        const double scalar_aepe = sum / (40.0 * 56.0);
        c.expect(std::fabs(report.aepe - scalar_aepe) <= 1e-6, "reported AEPE matches scalar recomputation");
        c.note("pipeline oracle err " + num(pipeline_err) + " at flow scale " + num(scale) + ", AEPE " + num(report.aepe) + " vs scalar " +
               num(scalar_aepe));
    });
}

CriterionResult metrics_battery() {
    return run(6, "metrics battery", [](Checks& c) {
        auto constant = [](int h, int w, float u, float v) {
            FlowField f(h, w);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) f.u(y, x) = u, f.v(y, x) = v;
            }
            return f;
        };
        const Mask all(16, 1);
        // gt magnitude 10 / 100 along u; prediction displaced along v.
        const double fl_a = fl_all(constant(4, 4, 0.0f, 2.9f), constant(4, 4, 0.0f, 0.0f), all);
        const double fl_b = fl_all(constant(4, 4, 100.0f, 4.0f), constant(4, 4, 100.0f, 0.0f), all);
        const double fl_c = fl_all(constant(4, 4, 10.0f, 4.0f), constant(4, 4, 10.0f, 0.0f), all);
        c.expect(fl_a == 0.0 && fl_b == 0.0 && fl_c == 100.0, "fl_all truth table 0/0/100");
        const FlowField gt = oracle::random_flow(4, 4, 61, 20.0f);
        const double w_perfect = wauc(gt, gt, all);
        FlowField far = gt;
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 4; ++x) far.u(y, x) += 5.5f;
        }
        const double w_far = wauc(far, gt, all);
        c.expect(std::fabs(w_perfect - 100.0) <= 1e-9, "wauc(perfect) = 100");
        c.expect(w_far == 0.0, "wauc(all epe > 5) = 0");

        double worst = 0.0;
        for (int t = 0; t < 1000; ++t) {
            const FlowField g = oracle::random_flow(6, 7, 20000 + t, 90.0f);
            const FlowField p = oracle::random_flow(6, 7, 40000 + t, 90.0f);
            Mask valid(42);
            Rng rng(t);
            for (auto& m : valid) m = rng.uniform() < 0.8;
            valid[0] = 1;
            const EvalReport r = evaluate(p, g, valid);
            double weighted = 0.0;
            std::size_t n = 0;
            for (const char* name : kVelocityRegions) {
                weighted += r.regions.at(name).aepe * r.regions.at(name).count;
                n += r.regions.at(name).count;
            }
            worst = std::max(worst, std::fabs(weighted / n - r.aepe));
            if (n != r.pixel_count) c.expect(false, "s-partition counts sum to valid count");
        }
        c.expect(worst <= 1e-6, "aepe equals count-weighted s-region mean");
        c.note("fl_all " + num(fl_a) + "/" + num(fl_b) + "/" + num(fl_c) + ", wauc " + num(w_perfect) + "/" +
               num(w_far) + ", partition err " + num(worst) + " over 1000 fields");
    });
}

CriterionResult formats() {
    return run(7, "formats", [](Checks& c) {
        FlowField f = oracle::random_flow(5, 7, 71, 300.0f);
        f.u(0, 0) = -0.0f;
        f.v(4, 6) = 1e-30f;
        const auto bytes = write_flo(f);
        const FlowField back = read_flo(bytes);
        c.expect(bitwise_equal(f, back) && !back.has_mask(), ".flo round trip is bitwise");

        Rng rng(77);
        FlowField k(100, 100);
        for (int y = 0; y < 100; ++y) {
            for (int x = 0; x < 100; ++x) {
                k.u(y, x) = static_cast<float>(rng.uniform(-512.0, 511.98));
                k.v(y, x) = static_cast<float>(rng.uniform(-512.0, 511.98));
            }
        }
        std::size_t clamped = 0;
        const FlowField kb = read_kitti_png(write_kitti_png(k, &clamped));
        double worst = 0.0;
        for (int y = 0; y < 100; ++y) {
            for (int x = 0; x < 100; ++x) {
                worst = std::max({worst, std::fabs(double(kb.u(y, x)) - k.u(y, x)), std::fabs(double(kb.v(y, x)) - k.v(y, x))});
            }
        }
        c.expect(worst <= 1.0 / 128.0 && clamped == 0, "KITTI round trip <= 1/128 over 10k samples");

        FlowField one(1, 1);
        one.u(0, 0) = 1.0f;
        one.v(0, 0) = -2.0f;
        const std::vector<std::uint8_t> golden = {'P', 'I', 'E', 'H', 1, 0, 0, 0, 1, 0, 0, 0,
                                                  0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0xC0};
        c.expect(write_flo(one) == golden, "1x1 .flo matches hand-assembled bytes");
        c.note("KITTI max err " + num(worst) + " (bound " + num(1.0 / 128.0) + ")");
    });
}

CriterionResult data_pipeline() {
    return run(8, "data pipeline", [](Checks& c) {
        const auto mix = standard_mix(10, 10, 10, 10, 10);
        const auto schedule = build_schedule(mix, 8);
        std::vector<std::size_t> counts(mix.size(), 0);
        for (const auto& e : schedule) ++counts[e.dataset];
        bool exact = schedule.size() == 6030;
        for (std::size_t d = 0; d < mix.size(); ++d) exact = exact && counts[d] == mix[d].weight * mix[d].size;
        c.expect(exact, "schedule counts are weight x size (500,500,5000,20,10)");

        FlowField gt(1000, 8);
        const float mags[8] = {0.0f, 299.999f, 300.0f, 300.0001f, 301.0f, 1e6f, -300.5f, 150.0f};
        for (int y = 0; y < 1000; ++y) {
            for (int x = 0; x < 8; ++x) {
                const float m = mags[(x + y) % 8];
                gt.u(y, x) = m * 0.6f;
                gt.v(y, x) = m * (y % 2 ? -0.8f : 0.8f);
            }
        }
        const FlowField clean = viper_sanitize(gt);
        std::size_t violations = 0, kept = 0;
        for (int y = 0; y < 1000; ++y) {
            for (int x = 0; x < 8; ++x) {
                if (!clean.valid(y, x)) continue;
                ++kept;
                if (y >= 700 || std::hypot(double(clean.u(y, x)), double(clean.v(y, x))) > 300.0) ++violations;
            }
        }
        c.expect(violations == 0 && kept > 0, "no valid pixel with |gt| > 300 or row >= 700");

        const Tensor img = oracle::random_tensor({3, 24, 24}, 81, 0.0f, 1.0f);
        int erased = 0;
        const int trials = 10000;
        for (int s = 0; s < trials; ++s) {
            if (!occlusion_erase(img, EraseParams{}, static_cast<std::uint64_t>(s)).rects.empty()) ++erased;
        }
        const double freq = static_cast<double>(erased) / trials;
        c.expect(std::fabs(freq - 0.5) <= 0.02, "erase frequency 0.5 +- 0.02");
        c.note("schedule length " + std::to_string(schedule.size()) + ", kept " + std::to_string(kept) +
               " pixels, erase frequency " + num(freq));
    });
}

std::vector<CriterionResult> run_all(const std::function<void(const CriterionResult&)>& on_result) {
    const std::vector<CriterionResult (*)()> suites = {correlation_equivalence, architecture_contract, weight_sharing,
                                                       convex_upsampling,       synthetic_end_to_end,  metrics_battery,
                                                       formats,                 data_pipeline};
    std::vector<CriterionResult> out;
    for (auto suite : suites) {
        out.push_back(suite());
        if (on_result) on_result(out.back());
    }
    return out;
}

std::string format_line(const CriterionResult& r) {
    std::ostringstream os;
    os.precision(3);
    os << (r.passed ? "[PASS] " : "[FAIL] ") << r.id << ' ' << r.name << " (" << std::fixed << r.seconds << " s)";
    if (!r.detail.empty()) os << ": " << r.detail;
    return os.str();
}

}  // namespace pyrflow::acceptance
