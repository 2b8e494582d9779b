#include <gtest/gtest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "pyrflow/flow_io.hpp"
#include "pyrflow/image_io.hpp"
#include "pyrflow/weights.hpp"

using namespace pyrflow;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("pyrflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Runs the CLI with `args`; stdout and stderr land in out_ / err_.
    int run(const std::string& args) {
        const fs::path out = dir_ / "_stdout", err = dir_ / "_stderr";
        const std::string cmd = std::string(PYRFLOW_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
        const int status = std::system(cmd.c_str());
        out_ = slurp(out);
        err_ = slurp(err);
        fs::remove(out);
        fs::remove(err);
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write_rgb(const std::string& name, int h, int w, double sx, double sy) {
        const Tensor t = oracle::bandlimited_texture(h, w, sx, sy);
        Image8 img(3, h, w);
        for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(std::lround(t.data()[i]));
        write_image8(path(name), img);
    }

    fs::path dir_;
    std::string out_, err_;
};

FlowField constant_flow(int h, int w, float u, float v) {
    FlowField f(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) f.u(y, x) = u, f.v(y, x) = v;
    }
    return f;
}

const char* kSmallModel = "--feature-dim 16 --hidden-dim 16 --context-dim 8 --motion-dim 18 --corr-levels 2 --corr-radius 2";

}  // namespace

TEST_F(Cli, InitWeightsAndInfer) {
    ASSERT_EQ(run("init-weights --seed 3 --out " + path("w.prfw") + " " + kSmallModel), 0) << err_;
    EXPECT_EQ(ModelWeights::load(path("w.prfw")).config().feature_dim, 16);
    write_rgb("a.png", 40, 56, 0, 0);
    write_rgb("b.png", 40, 56, 1.5, -0.75);

    const std::string infer = "infer " + path("a.png") + " " + path("b.png") + " --weights " + path("w.prfw");
    ASSERT_EQ(run(infer + " --out " + path("f1.flo") + " --viz " + path("v1.png") + " --trace " + path("t1.txt")), 0) << err_;
    const FlowField f = load_flo(path("f1.flo"));
    EXPECT_EQ(f.height(), 40);
    EXPECT_EQ(f.width(), 56);
    const Image8 viz = read_image8(path("v1.png"));
    EXPECT_EQ(viz.channels, 3);
    EXPECT_EQ(viz.height, 40);

    std::istringstream trace(slurp(path("t1.txt")));
    std::string line;
    int records = 0;
    while (std::getline(trace, line)) records += !line.empty() && line[0] != '#';
    EXPECT_EQ(records, 24);

    ASSERT_EQ(run(infer + " --out " + path("f2.flo") + " --viz " + path("v2.png") + " --trace " + path("t2.txt")), 0);
    EXPECT_EQ(slurp(path("f1.flo")), slurp(path("f2.flo")));
    EXPECT_EQ(slurp(path("v1.png")), slurp(path("v2.png")));
    EXPECT_EQ(slurp(path("t1.txt")), slurp(path("t2.txt")));

    std::set<std::string> files;
    for (const auto& e : fs::directory_iterator(dir_)) files.insert(e.path().filename().string());
    EXPECT_EQ(files, (std::set<std::string>{"w.prfw", "a.png", "b.png", "f1.flo", "v1.png", "t1.txt", "f2.flo",
                                            "v2.png", "t2.txt"}));
}

TEST_F(Cli, InferErrors) {
    ASSERT_EQ(run("init-weights --seed 1 --out " + path("w.prfw") + " " + kSmallModel), 0);
    write_rgb("a.png", 32, 32, 0, 0);
    write_rgb("b.png", 32, 40, 0, 0);
    EXPECT_EQ(run("infer " + path("a.png") + " " + path("b.png") + " --weights " + path("w.prfw") + " --out " + path("o.flo")), 1);
    EXPECT_NE(err_.find("error:"), std::string::npos);
    EXPECT_EQ(std::count(err_.begin(), err_.end(), '\n'), 1);
    EXPECT_EQ(run("infer " + path("a.png") + " " + path("nope.png") + " --weights " + path("w.prfw") + " --out " + path("o.flo")), 2);
    EXPECT_EQ(run("infer " + path("a.png") + " " + path("a.png") + " --weights " + path("w.prfw") + " --out " + path("o.flo") +
                  " --corr-radius 3"),
              1);
    EXPECT_EQ(run("infer " + path("a.png") + " " + path("a.png") + " --weights " + path("w.prfw") + " --out /nonexistent/o.flo"), 2);
    EXPECT_FALSE(fs::exists(path("o.flo")));
    EXPECT_EQ(run("no-such-command"), 1);
}

TEST_F(Cli, EvalIdenticalDirectories) {
    fs::create_directories(path("pred"));
    fs::create_directories(path("gt"));
    for (int i = 0; i < 3; ++i) {
        const FlowField f = oracle::random_flow(6, 8, 40 + i, 30.0f);
        save_flo(path("pred/f" + std::to_string(i) + ".flo"), f);
        save_flo(path("gt/f" + std::to_string(i) + ".flo"), f);
    }
    ASSERT_EQ(run("eval " + path("pred") + " " + path("gt") + " --report " + path("r.json")), 0) << err_;
    const auto doc = nlohmann::json::parse(slurp(path("r.json")));
    EXPECT_EQ(doc["aggregate"]["aepe"].get<double>(), 0.0);
    EXPECT_EQ(doc["aggregate"]["fl_all"].get<double>(), 0.0);
    EXPECT_NEAR(doc["aggregate"]["wauc"].get<double>(), 100.0, 1e-9);
    EXPECT_EQ(doc["frames"].size(), 3u);
    EXPECT_EQ(doc["frames"][0]["name"], "f0");
}

TEST_F(Cli, EvalTwoFrameToySet) {
    fs::create_directories(path("pred"));
    fs::create_directories(path("gt"));
    // Frame a: 1x2, epes 1 and 3 -> aepe 2. Frame b: 2x2, epe 6 everywhere.
    FlowField ga(1, 2), pa(1, 2);
    pa.u(0, 0) = 1.0f, pa.v(0, 1) = 3.0f;
    save_flo(path("pred/a.flo"), pa);
    save_flo(path("gt/a.flo"), ga);
    save_flo(path("pred/b.flo"), constant_flow(2, 2, 6.0f, 0.0f));
    save_flo(path("gt/b.flo"), FlowField(2, 2));
    ASSERT_EQ(run("eval " + path("pred") + " " + path("gt") + " --report " + path("r.json")), 0) << err_;
    const auto doc = nlohmann::json::parse(slurp(path("r.json")));
    EXPECT_DOUBLE_EQ(doc["frames"][0]["aepe"].get<double>(), 2.0);
    EXPECT_DOUBLE_EQ(doc["frames"][1]["aepe"].get<double>(), 6.0);
    EXPECT_DOUBLE_EQ(doc["aggregate"]["aepe"].get<double>(), 4.0);
    EXPECT_DOUBLE_EQ(doc["aggregate"]["fl_all"].get<double>(), 50.0);
    EXPECT_NE(out_.find("(mean)"), std::string::npos);
}

TEST_F(Cli, EvalMissingAndMismatched) {
    fs::create_directories(path("pred"));
    fs::create_directories(path("gt"));
    save_flo(path("pred/a.flo"), FlowField(2, 2));
    save_flo(path("gt/a.flo"), FlowField(2, 2));
    save_flo(path("gt/b.flo"), FlowField(2, 2));
    EXPECT_EQ(run("eval " + path("pred") + " " + path("gt")), 1);
    EXPECT_NE(err_.find("missing prediction for b"), std::string::npos);
    EXPECT_EQ(run("eval " + path("pred") + " " + path("gt") + " --allow-missing"), 0);
    save_flo(path("pred/b.flo"), FlowField(3, 2));
    EXPECT_EQ(run("eval " + path("pred") + " " + path("gt")), 1);
    EXPECT_EQ(run("eval " + path("pred") + " " + path("nowhere")), 2);
}

TEST_F(Cli, EvalKittiWithOcclusion) {
    fs::create_directories(path("pred"));
    fs::create_directories(path("gt"));
    fs::create_directories(path("occ"));
    FlowField gt = constant_flow(4, 4, 2.0f, 0.0f);
    gt.mask()[0] = 0;
    save_kitti_png(path("gt/x.png"), gt);
    save_kitti_png(path("pred/x.png"), constant_flow(4, 4, 2.0f, 1.0f));
    Image8 occ(1, 4, 4);
    occ.at(0, 3, 3) = 255;
    write_image8(path("occ/x.png"), occ);
    ASSERT_EQ(run("eval " + path("pred") + " " + path("gt") + " --format kitti --occ " + path("occ") + " --report " +
                  path("r.json")),
              0)
        << err_;
    const auto doc = nlohmann::json::parse(slurp(path("r.json")));
    EXPECT_DOUBLE_EQ(doc["aggregate"]["aepe"].get<double>(), 1.0);
    EXPECT_EQ(doc["aggregate"]["pixel_count"].get<int>(), 15);
    EXPECT_TRUE(doc["aggregate"]["regions"].contains("d0-10"));
}

TEST_F(Cli, MixPlan) {
    std::ofstream(path("mix.cfg")) << "seed = 4\n"
                                      "[dataset sintel_clean]\nsize = 10\nweight = 50\n"
                                      "[dataset sintel_final]\nsize = 10\nweight = 50\n"
                                      "[dataset kitti]\nsize = 10\nweight = 500\n"
                                      "[dataset hd1k]\nsize = 10\nweight = 2\n"
                                      "[dataset viper]\nsize = 10\nweight = 1\n";
    ASSERT_EQ(run("mix-plan --config " + path("mix.cfg") + " --out " + path("plan.txt")), 0) << err_;
    std::istringstream plan(slurp(path("plan.txt")));
    std::map<std::string, int> counts;
    std::string name;
    int index, lines = 0;
    while (plan >> name >> index) ++counts[name], ++lines;
    EXPECT_EQ(lines, 6030);
    EXPECT_EQ(counts["kitti"], 5000);
    EXPECT_EQ(counts["viper"], 10);
    ASSERT_EQ(run("mix-plan --config " + path("mix.cfg") + " --out " + path("plan2.txt")), 0);
    EXPECT_EQ(slurp(path("plan.txt")), slurp(path("plan2.txt")));
    ASSERT_EQ(run("mix-plan --config " + path("mix.cfg") + " --seed 5 --out " + path("plan3.txt")), 0);
    EXPECT_NE(slurp(path("plan.txt")), slurp(path("plan3.txt")));
    std::ofstream(path("bad.cfg")) << "[dataset a]\nsizes = 3\n";
    EXPECT_EQ(run("mix-plan --config " + path("bad.cfg") + " --out " + path("x.txt")), 1);
}

TEST_F(Cli, PreprocessViper) {
    fs::create_directories(path("in"));
    fs::create_directories(path("out"));
    for (int i = 0; i < 2; ++i) {
        FlowField f = oracle::random_flow(720, 6, 60 + i, 420.0f);
        f.u(3, 3) = 300.0f, f.v(3, 3) = 0.0f;
        save_flo(path("in/v" + std::to_string(i) + ".flo"), f);
    }
    ASSERT_EQ(run("preprocess-viper " + path("in") + " " + path("out")), 0) << err_;
    for (int i = 0; i < 2; ++i) {
        const std::string stem = "v" + std::to_string(i);
        const FlowField orig = load_flo(path("in/" + stem + ".flo"));
        const FlowField flow = load_flo(path("out/" + stem + ".flo"));
        const Image8 mask = read_image8(path("out/" + stem + ".valid.png"));
        EXPECT_EQ(flow.u_plane(), orig.u_plane());
        std::size_t kept = 0;
        for (int y = 0; y < 720; ++y) {
            for (int x = 0; x < 6; ++x) {
                const bool keep = std::hypot(double(orig.u(y, x)), double(orig.v(y, x))) <= 300.0 && y < 700;
                EXPECT_EQ(mask.at(0, y, x) != 0, keep) << y << "," << x;
                kept += keep;
            }
        }
        EXPECT_GT(kept, 0u);
        EXPECT_NE(mask.at(0, 3, 3), 0);
    }
    EXPECT_EQ(run("preprocess-viper " + path("in") + " " + path("in")), 1);
}

TEST_F(Cli, Viz) {
    save_flo(path("f.flo"), oracle::random_flow(5, 9, 70, 3.0f));
    ASSERT_EQ(run("viz " + path("f.flo") + " " + path("f.png")), 0) << err_;
    const Image8 img = read_image8(path("f.png"));
    EXPECT_EQ(img.height, 5);
    EXPECT_EQ(img.width, 9);
    EXPECT_EQ(run("viz " + path("f.flo") + " " + path("g.png") + " --max-norm -1"), 1);
    EXPECT_EQ(run("viz " + path("missing.flo") + " " + path("g.png")), 2);
    std::ofstream(path("bad.flo")) << "garbage!";
    EXPECT_EQ(run("viz " + path("bad.flo") + " " + path("g.png")), 1);
}

TEST_F(Cli, Selftest) {
    ASSERT_EQ(run("selftest"), 0) << out_ << err_;
    int lines = 0;
    std::istringstream in(out_);
    std::string line;
    while (std::getline(in, line)) {
        EXPECT_EQ(line.rfind("[PASS] ", 0), 0u) << line;
        ++lines;
    }
    EXPECT_EQ(lines, 9);
}
