#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vhj/cli.hpp"

using namespace vhj;
namespace fs = std::filesystem;

namespace {

const std::string kSource = VHJ_SOURCE_DIR;

// Scratch directory removed at scope exit.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("vhj_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

std::string write_file(const std::string& path, const std::string& text) {
    std::ofstream(path) << text;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSmallErgodic = R"(problem:
  m: 2
  dim: 1
  source: {family: power, alpha: 2}
grid:
  nodes_per_axis: 81
ergodic:
  R_ladder: [4]
  cutoff_ladder: []
  simplicity: false
  max_time: 30
longtime:
  half_width: 8
  nodes_per_axis: 161
  T: 4
)";

struct RunResult {
    int code;
    std::string err, log;
};

RunResult run(const std::string& command, const std::string& config, const std::string& out, bool json = false,
        int jobs = 1) {
    std::ostringstream err, log;
    CliOptions opt;
    opt.out_dir = out;
    opt.json = json;
    opt.jobs = jobs;
    opt.log = &log;
    const int code = run_command(command, config, opt, err);
    return {code, err.str(), log.str()};
}

std::string error_of(const std::string& text) {
    try {
        parse_config(text, "inline.yaml");
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        return e.what();
    }
    ADD_FAILURE() << "config accepted";
    return "";
}

}  // namespace

TEST(ParseConfig, MissingExponentNamesTheField) {
    const std::string w = error_of("problem:\n  dim: 1\n  source: {family: power, alpha: 2}\n");
    EXPECT_NE(w.find("problem.m"), std::string::npos) << w;
}

TEST(ParseConfig, UnknownFieldIsRejectedWithLine) {
    const std::string w = error_of("problem:\n  m: 2\n  colour: blue\n");
    EXPECT_NE(w.find("colour"), std::string::npos) << w;
    EXPECT_NE(w.find("line 3"), std::string::npos) << w;
}

TEST(ParseConfig, MalformedNumber) {
    const std::string w = error_of("problem:\n  m: two\n");
    EXPECT_NE(w.find("problem.m"), std::string::npos) << w;
}

TEST(ParseConfig, EmittedConfigRoundTrips) {
    for (const char* name : {"oscillator_1d.yaml", "manufactured_m12.yaml", "stationary_start.yaml", "quick_1d.yaml"}) {
        const RunConfig a = load_config(kSource + "/configs/" + name);
        const std::string text = config_to_yaml(a);
        const RunConfig b = parse_config(text, a.path);
        EXPECT_EQ(config_to_yaml(b), text) << name;
    }
}

TEST(ParseConfig, AllShippedConfigsLoad) {
    for (const auto& entry : fs::directory_iterator(kSource + "/configs")) {
        if (entry.path().extension() == ".yaml") {
            EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
        }
    }
}

TEST(Validate, ExitCodes) {
    TempDir d("validate");
    EXPECT_EQ(run("validate", kSource + "/configs/oscillator_1d.yaml", d / "osc").code, 0);
    const RunResult bounded = run("validate", kSource + "/configs/bounded_tail.yaml", d / "bounded");
    EXPECT_EQ(bounded.code, 1);
    EXPECT_NE(bounded.log.find("bounded tail"), std::string::npos) << bounded.log;
    const YAML::Node s = YAML::LoadFile(d / "bounded/summary.yaml");
    EXPECT_FALSE(s["results"]["h1"]["plausible"].as<bool>());
    EXPECT_FALSE(s["results"]["pass"].as<bool>());
    const RunResult missing = run("validate", write_file(d / "bad.yaml", "problem:\n  dim: 1\n"), d / "bad");
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("problem.m"), std::string::npos) << missing.err;
    EXPECT_EQ(run("validate", d / "does_not_exist.yaml", d / "x").code, 2);
    EXPECT_EQ(run("frobnicate", kSource + "/configs/oscillator_1d.yaml", d / "y").code, 2);
}

TEST(Ergodic, SingleRadiusReportsInfiniteGap) {
    TempDir d("single");
    const RunResult r = run("ergodic", write_file(d / "c.yaml", kSmallErgodic), d / "out");
    EXPECT_EQ(r.code, 0) << r.err;
    const YAML::Node s = YAML::LoadFile(d / "out/summary.yaml");
    EXPECT_EQ(s["command"].as<std::string>(), "ergodic");
    EXPECT_TRUE(s["results"]["lambda_star"]["gap_infinite"].as<bool>());
    EXPECT_EQ(s["results"]["lambda_star"]["gap"].as<std::string>(), "inf");
    EXPECT_EQ(s["results"]["lambda_star"]["method"].as<std::string>(), "single");
    EXPECT_EQ(s["config"]["problem"]["m"].as<double>(), 2.0);
    EXPECT_TRUE(fs::exists(d / "out/runs.csv"));
    EXPECT_TRUE(fs::exists(d / "out/profiles/state_R4.csv"));
}

TEST(Ergodic, NonConvergenceIsAVerdictFailureUnlessPartialAllowed) {
    TempDir d("partial");
    std::string text = kSmallErgodic;
    text.replace(text.find("max_time: 30"), 12, "max_time: 3");
    const std::string cfg = write_file(d / "c.yaml", text);
    EXPECT_EQ(run("ergodic", cfg, d / "a").code, 1);
    std::ostringstream err, log;
    CliOptions opt;
    opt.out_dir = d / "b";
    opt.allow_partial = true;
    opt.log = &log;
    // Partial results are written, but the verdict still reflects the unconverged run.
    run_command("ergodic", cfg, opt, err);
    EXPECT_TRUE(fs::exists(d / "b/summary.yaml")) << err.str();
}

TEST(Longtime, MissingArtifactNamesTheFile) {
    TempDir d("missing");
    std::string text = kSmallErgodic;
    text += "  phi_from: " + (d / "nowhere") + "\n";
    const RunResult r = run("longtime", write_file(d / "c.yaml", text), d / "out");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("summary.yaml"), std::string::npos) << r.err;
}

TEST(Longtime, StaleArtifactIsRejected) {
    TempDir d("stale");
    ASSERT_EQ(run("ergodic", write_file(d / "a.yaml", kSmallErgodic), d / "erg").code, 0);
    std::string text = kSmallErgodic;
    text.replace(text.find("alpha: 2"), 8, "alpha: 2, shift: 1");
    text += "  phi_from: " + (d / "erg") + "\n";
    const RunResult r = run("longtime", write_file(d / "b.yaml", text), d / "out");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("stale"), std::string::npos) << r.err;
}

TEST(Longtime, MissingProfileNamesTheFile) {
    TempDir d("noprofile");
    ASSERT_EQ(run("ergodic", write_file(d / "a.yaml", kSmallErgodic), d / "erg").code, 0);
    fs::remove(d / "erg/profiles/state_R4.csv");
    std::string text = kSmallErgodic;
    text += "  phi_from: " + (d / "erg") + "\n";
    const RunResult r = run("longtime", write_file(d / "b.yaml", text), d / "out");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("state_R4.csv"), std::string::npos) << r.err;
}

TEST(Longtime, ZeroHorizonIsAConfigError) {
    TempDir d("t0");
    std::string text = kSmallErgodic;
    text.replace(text.find("T: 4"), 4, "T: 0");
    const RunResult r = run("longtime", write_file(d / "c.yaml", text), d / "out");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("empty history"), std::string::npos) << r.err;
}

TEST(Longtime, StationaryStartConvergesImmediately) {
    TempDir d("stationary");
    const RunResult r = run("longtime", kSource + "/configs/stationary_start.yaml", d / "out");
    EXPECT_EQ(r.code, 0) << r.err;
    const YAML::Node s = YAML::LoadFile(d / "out/summary.yaml");
    EXPECT_NEAR(s["results"]["c_hat"].as<double>(), 0.0, 1e-6);
    EXPECT_TRUE(fs::exists(d / "out/history.csv"));
}

TEST(Oracle, HopfColeNeedsQuadraticExponent) {
    TempDir d("oracle");
    const std::string text = "problem:\n  m: 1.5\n  dim: 1\n  source: {family: power, alpha: 1.5}\noracle:\n  kind: hopf_cole\n";
    const RunResult r = run("oracle", write_file(d / "c.yaml", text), d / "out");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("contract"), std::string::npos) << r.err;
}

TEST(Determinism, RepeatedRunsAreByteIdentical) {
    TempDir d("determinism");
    const std::string cfg = kSource + "/configs/quick_1d.yaml";
    ASSERT_EQ(run("ergodic", cfg, d / "a").code, 0);
    ASSERT_EQ(run("ergodic", cfg, d / "b").code, 0);
    ASSERT_EQ(run("ergodic", cfg, d / "c", false, 2).code, 0);
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(d / "a")) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), d / "a").string();
        if (rel == "timing.csv") continue;  // wall-clock times
        EXPECT_EQ(slurp(e.path().string()), slurp(d / ("b/" + rel))) << rel;
        EXPECT_EQ(slurp(e.path().string()), slurp(d / ("c/" + rel))) << rel << " (jobs=2)";
        ++compared;
    }
    EXPECT_GE(compared, 5u);
}

TEST(Reports, JsonMirrorAndEmbeddedConfig) {
    TempDir d("json");
    ASSERT_EQ(run("validate", kSource + "/configs/oscillator_1d.yaml", d / "out", true).code, 0);
    const Json j = Json::parse(slurp(d / "out/summary.json"));
    EXPECT_EQ(j["command"], "validate");
    EXPECT_TRUE(j.contains("results"));
    const YAML::Node cfg = YAML::Load(j["config_yaml"].get<std::string>());
    EXPECT_EQ(cfg["problem"]["m"].as<double>(), 2.0);
    const std::string csv = slurp(d / "out/hypotheses.csv");
    EXPECT_EQ(csv.rfind("# ", 0), 0u);
}

TEST(ParallelMap, PreservesOrder) {
    for (int jobs : {1, 3}) {
        const auto out = parallel_map<int>(20, jobs, [](std::size_t k) { return static_cast<int>(k * k); });
        for (std::size_t k = 0; k < out.size(); ++k) EXPECT_EQ(out[k], static_cast<int>(k * k));
    }
}

TEST(ParallelMap, RethrowsJobErrors) {
    EXPECT_THROW(parallel_map<int>(8, 4,
                                   [](std::size_t k) -> int {
                                       if (k == 5) fail(ErrorKind::contract, "job failed");
                                       return 0;
                                   }),
                 Error);
}
