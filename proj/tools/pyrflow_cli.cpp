#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "acceptance.hpp"
#include "pyrflow/data_pipeline.hpp"
#include "pyrflow/error.hpp"
#include "pyrflow/flow_io.hpp"
#include "pyrflow/image_io.hpp"
#include "pyrflow/metrics.hpp"
#include "pyrflow/pyramid_flow.hpp"
#include "pyrflow/weights.hpp"

namespace fs = std::filesystem;
using namespace pyrflow;

namespace {

struct ConfigOverrides {
    std::optional<int> feature_dim, hidden_dim, context_dim, motion_dim, levels, radius;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--feature-dim", feature_dim, "correlation feature channels (D)");
        cmd->add_option("--hidden-dim", hidden_dim, "GRU hidden channels (Dh)");
        cmd->add_option("--context-dim", context_dim, "context channels (Dc)");
        cmd->add_option("--motion-dim", motion_dim, "motion feature channels (Dm)");
        cmd->add_option("--corr-levels", levels, "correlation pyramid levels (L)");
        cmd->add_option("--corr-radius", radius, "lookup radius (r)");
    }

    ModelConfig apply(ModelConfig c) const {
        if (feature_dim) c.feature_dim = *feature_dim;
        if (hidden_dim) c.hidden_dim = *hidden_dim;
        if (context_dim) c.context_dim = *context_dim;
        if (motion_dim) c.motion_dim = *motion_dim;
        if (levels) c.corr_levels = *levels;
        if (radius) c.corr_radius = *radius;
        return c;
    }
};

std::string config_string(const ModelConfig& c) {
    std::ostringstream os;
    os << "D=" << c.feature_dim << " Dh=" << c.hidden_dim << " Dc=" << c.context_dim << " Dm=" << c.motion_dim
       << " L=" << c.corr_levels << " r=" << c.corr_radius;
    return os.str();
}

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw IoError("no such file: " + p.string());
}

void require_dir(const fs::path& p) {
    if (!fs::is_directory(p)) throw IoError("no such directory: " + p.string());
}

void require_parent(const fs::path& p) {
    const fs::path parent = p.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) throw IoError("output directory does not exist: " + parent.string());
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out || !(out << text) || !out.flush()) throw IoError("cannot write " + p.string());
}

FlowFileFormat parse_format(const std::string& s) {
    if (s == "flo") return FlowFileFormat::MiddleburyFlo;
    if (s == "kitti") return FlowFileFormat::KittiPng16;
    throw ValidationError("unknown flow format '" + s + "' (expected flo or kitti)");
}

FlowFileFormat format_from_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".flo") return FlowFileFormat::MiddleburyFlo;
    if (ext == ".png") return FlowFileFormat::KittiPng16;
    throw ValidationError("cannot infer flow format from '" + p.string() + "'");
}

const char* extension_of(FlowFileFormat f) { return f == FlowFileFormat::MiddleburyFlo ? ".flo" : ".png"; }

// Sorted basenames (stem) of regular files with the given extension.
std::vector<std::string> list_stems(const fs::path& dir, const std::string& ext) {
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ext) continue;
        const std::string stem = entry.path().stem().string();
        if (stem.size() > 6 && stem.ends_with(".valid")) continue;
        stems.push_back(stem);
    }
    std::sort(stems.begin(), stems.end());
    return stems;
}

Mask load_binary_mask(const fs::path& p, int height, int width) {
    const Image8 img = read_image8(p);
    if (img.height != height || img.width != width) {
        throw ShapeError("mask " + p.string() + " is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                         ", expected " + std::to_string(height) + "x" + std::to_string(width));
    }
    Mask m(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) m[static_cast<std::size_t>(y) * width + x] = img.at(0, y, x) != 0;
    }
    return m;
}

void save_binary_mask(const fs::path& p, const Mask& mask, int height, int width) {
    Image8 img(1, height, width);
    for (std::size_t i = 0; i < mask.size(); ++i) img.data[i] = mask[i] ? 255 : 0;
    write_image8(p, img);
}

std::string trace_text(const InferenceTrace& trace) {
    std::ostringstream os;
    os << std::setprecision(9);
    os << "# level stride iteration height width mean_u mean_v\n";
    int level = 0;
    for (const auto& lt : trace.levels) {
        for (std::size_t i = 0; i < lt.iterates.size(); ++i) {
            const FlowField& f = lt.iterates[i];
            double su = 0.0, sv = 0.0;
            for (int y = 0; y < f.height(); ++y) {
                for (int x = 0; x < f.width(); ++x) su += f.u(y, x), sv += f.v(y, x);
            }
            const double n = static_cast<double>(f.height()) * f.width();
            os << level << ' ' << lt.stride << ' ' << i + 1 << ' ' << f.height() << ' ' << f.width() << ' ' << su / n
               << ' ' << sv / n << '\n';
        }
        ++level;
    }
    return os.str();
}

// ---- commands ----

struct InferArgs {
    std::string image1, image2, weights, out, viz, trace;
    int iterations = kDefaultIterations;
    ConfigOverrides overrides;
};

int cmd_infer(const InferArgs& a) {
    require_file(a.image1);
    require_file(a.image2);
    require_file(a.weights);
    require_parent(a.out);
    if (!a.viz.empty()) require_parent(a.viz);
    if (!a.trace.empty()) require_parent(a.trace);
    if (a.iterations < 1) throw ValidationError("--iterations must be >= 1");

    const ModelWeights weights = ModelWeights::load(a.weights);
    const ModelConfig wanted = a.overrides.apply(weights.config());
    if (!(wanted == weights.config())) {
        throw ConfigError("requested config (" + config_string(wanted) + ") does not match archive (" +
                          config_string(weights.config()) + ")");
    }
    const Tensor img1 = image_to_tensor(read_image8(a.image1));
    const Tensor img2 = image_to_tensor(read_image8(a.image2));
    const FlowEstimate est = estimate_flow(img1, img2, weights, FlowOptions{a.iterations});

    save_flo(a.out, est.flow);
    if (!a.viz.empty()) write_image8(a.viz, flow_to_color(est.flow));
    if (!a.trace.empty()) write_text(a.trace, trace_text(est.trace));

    std::cout << "flow " << est.flow.height() << "x" << est.flow.width() << " -> " << a.out << "\n";
    for (const auto& lt : est.trace.levels) {
        std::cout << "  level 1/" << lt.stride << ": " << lt.height << "x" << lt.width << ", " << lt.iterates.size()
                  << " iterations, corr volume " << lt.corr_volume_elements << " elements, " << std::fixed
                  << std::setprecision(3) << lt.seconds << " s\n"
                  << std::defaultfloat;
    }
    return 0;
}

struct EvalArgs {
    std::string pred_dir, gt_dir, occ_dir, format = "flo", report;
    bool allow_missing = false;
};

int cmd_eval(const EvalArgs& a) {
    require_dir(a.pred_dir);
    require_dir(a.gt_dir);
    if (!a.occ_dir.empty()) require_dir(a.occ_dir);
    if (!a.report.empty()) require_parent(a.report);
    const FlowFileFormat format = parse_format(a.format);
    const std::string ext = extension_of(format);

    const auto gt_stems = list_stems(a.gt_dir, ext);
    const auto pred_stems = list_stems(a.pred_dir, ext);
    std::vector<std::string> missing;
    for (const auto& s : gt_stems) {
        if (!std::binary_search(pred_stems.begin(), pred_stems.end(), s)) missing.push_back("prediction for " + s);
    }
    for (const auto& s : pred_stems) {
        if (!std::binary_search(gt_stems.begin(), gt_stems.end(), s)) missing.push_back("ground truth for " + s);
    }

    std::vector<std::pair<std::string, EvalReport>> frames;
    for (const auto& stem : gt_stems) {
        if (!std::binary_search(pred_stems.begin(), pred_stems.end(), stem)) continue;
        const FlowField pred = load_flow(fs::path(a.pred_dir) / (stem + ext), format);
        const FlowField gt = load_flow(fs::path(a.gt_dir) / (stem + ext), format);
        if (pred.height() != gt.height() || pred.width() != gt.width()) {
            throw ShapeError("frame " + stem + ": prediction " + std::to_string(pred.height()) + "x" +
                             std::to_string(pred.width()) + " vs ground truth " + std::to_string(gt.height()) + "x" +
                             std::to_string(gt.width()));
        }
        std::optional<Mask> occ;
        if (!a.occ_dir.empty()) {
            const fs::path occ_path = fs::path(a.occ_dir) / (stem + ".png");
            if (fs::is_regular_file(occ_path)) {
                occ = load_binary_mask(occ_path, gt.height(), gt.width());
            } else {
                missing.push_back("occlusion mask for " + stem);
            }
        }
        frames.emplace_back(stem, evaluate(pred, gt, joint_valid(pred, gt), occ));
    }

    for (const auto& m : missing) std::cerr << "missing " << m << "\n";
    if (frames.empty()) throw EmptyDomainError("no frames to evaluate");

    std::vector<EvalReport> reports;
    for (const auto& [name, r] : frames) reports.push_back(r);
    const EvalReport total = aggregate(reports);

    std::cout << std::left << std::setw(24) << "frame" << std::right << std::setw(12) << "aepe" << std::setw(12)
              << "fl_all%" << std::setw(12) << "wauc%" << std::setw(12) << "pixels" << "\n"
              << std::fixed << std::setprecision(4);
    auto row = [](const std::string& name, const EvalReport& r) {
        std::cout << std::left << std::setw(24) << name << std::right << std::setw(12) << r.aepe << std::setw(12)
                  << r.fl_all << std::setw(12) << r.wauc << std::setw(12) << r.pixel_count << "\n";
    };
    for (const auto& [name, r] : frames) row(name, r);
    row("(mean)", total);
    std::cout << std::defaultfloat;
    if (!total.regions.empty()) {
        std::cout << "regions:";
        for (const auto& [name, stat] : total.regions) std::cout << ' ' << name << '=' << stat.aepe;
        std::cout << "\n";
    }
    if (!a.report.empty()) write_text(a.report, reports_to_json(frames, total));

    if (!missing.empty() && !a.allow_missing) {
        throw ValidationError(std::to_string(missing.size()) + " file(s) without a counterpart");
    }
    return 0;
}

int cmd_mix_plan(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
    require_file(config_path);
    require_parent(out);
    const PipelineConfig cfg = load_pipeline_config(config_path);
    const auto schedule = build_schedule(cfg.datasets, seed.value_or(cfg.seed));
    write_text(out, export_schedule(schedule, cfg.datasets));
    std::vector<std::size_t> counts(cfg.datasets.size(), 0);
    for (const auto& e : schedule) ++counts[e.dataset];
    std::cout << "schedule of " << schedule.size() << " samples -> " << out << "\n";
    for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
        std::cout << "  " << cfg.datasets[d].name << ": " << counts[d] << " (" << cfg.datasets[d].size << " x "
                  << cfg.datasets[d].weight << ")\n";
    }
    return 0;
}

int cmd_preprocess_viper(const std::string& in_dir, const std::string& out_dir, const std::string& format_name) {
    require_dir(in_dir);
    require_dir(out_dir);
    if (fs::equivalent(in_dir, out_dir)) throw ValidationError("output directory must differ from input directory");
    const FlowFileFormat format = parse_format(format_name);
    const std::string ext = extension_of(format);
    std::size_t files = 0, kept = 0, total = 0;
    for (const auto& stem : list_stems(in_dir, ext)) {
        FlowField clean = viper_sanitize(load_flow(fs::path(in_dir) / (stem + ext), format));
        const Mask mask = clean.mask();
        for (auto m : mask) kept += m;
        total += mask.size();
        save_binary_mask(fs::path(out_dir) / (stem + ".valid.png"), mask, clean.height(), clean.width());
        clean.clear_mask();
        save_flo(fs::path(out_dir) / (stem + ".flo"), clean);
        ++files;
    }
    std::cout << files << " fields sanitized, " << kept << " of " << total << " pixels valid\n";
    return 0;
}

int cmd_viz(const std::string& flow_path, const std::string& out, std::optional<float> max_norm) {
    require_file(flow_path);
    require_parent(out);
    if (max_norm && !(*max_norm > 0.0f)) throw ValidationError("--max-norm must be positive");
    write_image8(out, flow_to_color(load_flow(flow_path, format_from_extension(flow_path)), max_norm));
    return 0;
}

int cmd_init_weights(std::uint64_t seed, const std::string& out, const ConfigOverrides& overrides, bool zero) {
    require_parent(out);
    const ModelConfig config = overrides.apply(ModelConfig{});
    const ModelWeights w = zero ? zero_weights(config) : init_weights(config, seed);
    w.save(out);
    std::size_t params = 0;
    for (const auto& [name, t] : w.entries()) params += t.size();
    std::cout << config_string(config) << ", " << w.entries().size() << " tensors, " << params
              << " parameters, crc32 " << std::hex << std::setw(8) << std::setfill('0') << w.checksum() << std::dec
              << " -> " << out << "\n";
    return 0;
}

int cmd_selftest() {
    const auto start = std::chrono::steady_clock::now();
    const auto results = acceptance::run_all(
        [](const acceptance::CriterionResult& r) { std::cout << acceptance::format_line(r) << std::endl; });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    acceptance::CriterionResult overall{9, "selftest overall", true, "", secs};
    for (const auto& r : results) overall.passed = overall.passed && r.passed;
    overall.passed = overall.passed && secs < 120.0;
    overall.detail = std::to_string(results.size()) + " suites, limit 120 s";
    std::cout << acceptance::format_line(overall) << std::endl;
    if (!overall.passed) throw InvariantError("selftest failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-level recurrent optical flow: inference, evaluation and data tooling"};
    app.require_subcommand(1);

    InferArgs infer;
    auto* c_infer = app.add_subcommand("infer", "estimate flow between two images");
    c_infer->add_option("image1", infer.image1, "first image (PNG or PPM/PGM)")->required();
    c_infer->add_option("image2", infer.image2, "second image")->required();
    c_infer->add_option("--weights", infer.weights, "weight archive")->required();
    c_infer->add_option("--out", infer.out, "output .flo")->required();
    c_infer->add_option("--viz", infer.viz, "color-coded PNG of the flow");
    c_infer->add_option("--trace", infer.trace, "per-iteration trace file");
    c_infer->add_option("--iterations", infer.iterations, "update iterations per level")->capture_default_str();
    infer.overrides.add_to(c_infer);

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "score predicted flow against ground truth");
    c_eval->add_option("pred_dir", eval.pred_dir, "predicted flow directory")->required();
    c_eval->add_option("gt_dir", eval.gt_dir, "ground-truth flow directory")->required();
    c_eval->add_option("--occ", eval.occ_dir, "occlusion masks (<frame>.png, nonzero = occluded)");
    c_eval->add_option("--format", eval.format, "flo or kitti")->capture_default_str();
    c_eval->add_option("--report", eval.report, "JSON report path");
    c_eval->add_flag("--allow-missing", eval.allow_missing, "skip frames without a counterpart and exit 0");

    std::string mix_config, mix_out;
    std::optional<std::uint64_t> mix_seed;
    auto* c_mix = app.add_subcommand("mix-plan", "write the balanced multi-dataset schedule");
    c_mix->add_option("--config", mix_config, "pipeline config file")->required();
    c_mix->add_option("--seed", mix_seed, "shuffle seed (overrides the config)");
    c_mix->add_option("--out", mix_out, "schedule output")->required();

    std::string viper_in, viper_out, viper_format = "flo";
    auto* c_viper = app.add_subcommand("preprocess-viper", "mask out fast and lower-image flow");
    c_viper->add_option("in_dir", viper_in)->required();
    c_viper->add_option("out_dir", viper_out)->required();
    c_viper->add_option("--format", viper_format, "input format: flo or kitti")->capture_default_str();

    std::string viz_in, viz_out;
    std::optional<float> viz_max;
    auto* c_viz = app.add_subcommand("viz", "render a flow file with the Middlebury color wheel");
    c_viz->add_option("flow", viz_in, ".flo or KITTI .png")->required();
    c_viz->add_option("out", viz_out, "output PNG")->required();
    c_viz->add_option("--max-norm", viz_max, "normalization magnitude (default: largest in the field)");

    std::uint64_t init_seed = 0;
    std::string init_out;
    bool init_zero = false;
    ConfigOverrides init_overrides;
    auto* c_init = app.add_subcommand("init-weights", "write a seeded random weight archive");
    c_init->add_option("--seed", init_seed)->capture_default_str();
    c_init->add_option("--out", init_out, "archive path")->required();
    c_init->add_flag("--zero", init_zero, "all-zero weights");
    init_overrides.add_to(c_init);

    auto* c_selftest = app.add_subcommand("selftest", "run the oracle and invariant suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::Validation);
    }

    try {
        if (*c_infer) return cmd_infer(infer);
        if (*c_eval) return cmd_eval(eval);
        if (*c_mix) return cmd_mix_plan(mix_config, mix_seed, mix_out);
        if (*c_viper) return cmd_preprocess_viper(viper_in, viper_out, viper_format);
        if (*c_viz) return cmd_viz(viz_in, viz_out, viz_max);
        if (*c_init) return cmd_init_weights(init_seed, init_out, init_overrides, init_zero);
        if (*c_selftest) return cmd_selftest();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::Io);
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::Invariant);
    }
    return 0;
}
