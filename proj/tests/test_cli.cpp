#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "doctest.h"
#include "jfr/cli.hpp"

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

/// Fresh workspace directory for one test case.
std::string workspace(const std::string& name) {
    const std::string dir = "/tmp/jfr_cli_" + name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// Small but non-degenerate setup: two trainable identities, two held out,
/// a recognizer wide enough that features keep nonzero norms.
std::string tiny_config_json(const std::string& dir, const std::string& extra_train = "",
                             const std::string& seed = "7",
                             const std::string& net_classes = "2") {
    return std::string("{\n") +
           "  \"seed\": " + seed + ",\n" +
           "  \"paths\": {\"dataset\": \"" + dir + "/ds.jfds\", \"pairs\": \"" + dir +
           "/pairs.csv\",\n" +
           "             \"checkpoint\": \"" + dir + "/model.jfck\", \"out\": \"" + dir +
           "/out\"},\n" +
           "  \"data\": {\"classes\": 4, \"train_classes\": 2, \"samples_per_class\": 6,\n" +
           "            \"height\": 16, \"width\": 16, \"verification_pairs\": 12},\n" +
           "  \"net\": {\"input_height\": 16, \"input_width\": 16, \"channel_divisor\": 16,\n" +
           "           \"feature_dim\": 16, \"classes\": " + net_classes + "},\n" +
           "  \"train\": {\"mode\": \"joint\", \"batch_size\": 6, \"total_steps\": 4,\n" +
           "             \"decay_steps\": [3], \"lr_srnet\": 2e-4, \"lr_frnet\": 0.005,\n" +
           "             \"lr_softmax\": 0.005" + extra_train + "},\n" +
           "  \"eval\": {\"input\": \"hallucinated\", \"pca_dim\": 8, \"fpr_target\": 0.5,\n" +
           "            \"folds\": 3}\n" +
           "}\n";
}

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run(const std::string& command, const jfr::CliConfig& cfg,
              const std::string& image_path = "", bool corrupt = false) {
    std::ostringstream out, err;
    const int code = jfr::run_command(command, cfg, image_path, corrupt, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("fnv1a64 matches published test vectors") {
    CHECK(jfr::fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(jfr::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(jfr::fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("parse_config: defaults and canonical hashing") {
    const jfr::CliConfig cfg = jfr::parse_config("{}");
    CHECK(cfg.seed == 0);
    CHECK(cfg.dataset_path == "dataset.jfds");
    CHECK(cfg.pairs_path == "pairs.csv");
    CHECK(cfg.checkpoint_path == "model.jfck");
    CHECK(cfg.out_dir == "out");
    CHECK(cfg.train_mode == jfr::TrainMode::Joint);
    CHECK(cfg.eval_input == jfr::TestInput::Hallucinated);
    CHECK(cfg.config_hash == jfr::fnv1a64(jfr::canonical_config(cfg)));

    // Spelling out a default changes nothing.
    CHECK(jfr::parse_config("{\"seed\": 0}").config_hash == cfg.config_hash);
    CHECK(jfr::parse_config("{\"train\": {\"batch_size\": 128}}").config_hash ==
          cfg.config_hash);

    // Key order is irrelevant; values are what counts.
    const std::string a = "{\"seed\": 3, \"paths\": {\"out\": \"x\", \"dataset\": \"d\"}}";
    const std::string b = "{\"paths\": {\"dataset\": \"d\", \"out\": \"x\"}, \"seed\": 3}";
    CHECK(jfr::parse_config(a).config_hash == jfr::parse_config(b).config_hash);
    CHECK(jfr::parse_config(a).config_hash != cfg.config_hash);

    // The stamp pushes the seed and hash into the sub-configs.
    const jfr::CliConfig seeded = jfr::parse_config("{\"seed\": 9}");
    CHECK(seeded.train.seed == 9);
    CHECK(seeded.eval.seed == 9);
    CHECK(seeded.eval.config_hash == seeded.config_hash);
}

TEST_CASE("parse_config: strict rejection of unknown keys and bad types") {
    using doctest::Contains;
    CHECK_THROWS_WITH_AS(jfr::parse_config("{\"extra\": 1}"), Contains("extra"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(jfr::parse_config("{\"train\": {\"lr\": 0.1}}"), Contains("train.lr"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(jfr::parse_config("{\"paths\": {\"output\": \"x\"}}"),
                         Contains("paths.output"), std::invalid_argument);
    CHECK_THROWS_AS(jfr::parse_config("{\"seed\": -3}"), std::invalid_argument);
    CHECK_THROWS_AS(jfr::parse_config("{\"seed\": \"x\"}"), std::invalid_argument);
    CHECK_THROWS_AS(jfr::parse_config("{\"seed\": 1.5}"), std::invalid_argument);
    CHECK_THROWS_AS(jfr::parse_config("{\"net\": {\"blocks\": [1, 1]}}"),
                    std::invalid_argument);
    CHECK_THROWS_AS(jfr::parse_config("{\"net\": {\"blocks\": [1, -1, 1, 1]}}"),
                    std::invalid_argument);
    CHECK_THROWS_AS(jfr::parse_config("{\"train\": {\"mode\": \"bogus\"}}"),
                    std::invalid_argument);
    CHECK_THROWS_AS(jfr::parse_config("{\"eval\": {\"input\": \"bogus\"}}"),
                    std::invalid_argument);
    CHECK_THROWS_AS(jfr::parse_config("{\"paths\": {\"dataset\": 5}}"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(jfr::parse_config("not json"), Contains("not valid JSON"),
                         std::invalid_argument);
    CHECK_THROWS_AS(jfr::parse_config("[1, 2]"), std::invalid_argument);
}

TEST_CASE("load_config_file: file round-trip and missing file") {
    const std::string dir = workspace("cfgfile");
    const std::string path = dir + "/c.json";
    std::ofstream(path) << tiny_config_json(dir);
    const jfr::CliConfig cfg = jfr::load_config_file(path);
    CHECK(cfg.seed == 7);
    CHECK(cfg.data.classes == 4);
    CHECK(cfg.net.feature_dim == 16);
    CHECK(cfg.train.total_steps == 4);
    CHECK(cfg.eval.folds == 3);
    CHECK_THROWS_AS(jfr::load_config_file(dir + "/missing.json"), std::runtime_error);
}

TEST_CASE("cmd_gen_data: deterministic artifacts with documented counts") {
    const std::string dir = workspace("gendata");
    const jfr::CliConfig cfg = jfr::parse_config(tiny_config_json(dir));

    const RunResult first = run("gen-data", cfg);
    CHECK(first.code == jfr::kExitOk);
    CHECK(first.err.empty());
    const std::string ds_bytes = slurp(dir + "/ds.jfds");
    const std::string pair_bytes = slurp(dir + "/pairs.csv");

    const jfr::Dataset ds = jfr::load_dataset(dir + "/ds.jfds");
    CHECK(ds.train.size() == 2 * 6);  // train_classes * samples_per_class
    CHECK(ds.test.size() == 2 * 6);
    CHECK(ds.classes == 4);
    CHECK(jfr::load_pairs_csv(dir + "/pairs.csv").size() == 12);
    CHECK(line_count(pair_bytes) == 13);  // header + one row per pair

    const RunResult second = run("gen-data", cfg);
    CHECK(second.code == jfr::kExitOk);
    CHECK(second.out == first.out);
    CHECK(slurp(dir + "/ds.jfds") == ds_bytes);
    CHECK(slurp(dir + "/pairs.csv") == pair_bytes);

    // One identity cannot form verification pairs.
    jfr::CliConfig bad = cfg;
    bad.data.classes = 1;
    bad.data.train_classes = 0;
    const RunResult rejected = run("gen-data", bad);
    CHECK(rejected.code == jfr::kExitValidation);
    CHECK(!rejected.err.empty());
}

TEST_CASE("cmd_train: artifacts, determinism, and failure modes") {
    const std::string dir = workspace("train_a");
    const jfr::CliConfig cfg = jfr::parse_config(tiny_config_json(dir));
    REQUIRE(run("gen-data", cfg).code == jfr::kExitOk);

    const RunResult trained = run("train", cfg);
    CHECK(trained.code == jfr::kExitOk);
    CHECK(trained.out.find("trained joint for 4 steps") != std::string::npos);

    jfr::JointNetwork net = jfr::load_checkpoint(dir + "/model.jfck");
    CHECK(net.step == 4);
    CHECK(net.config.feature_dim == 16);
    const std::string metrics = slurp(dir + "/out/metrics.csv");
    CHECK(line_count(metrics) == 5);  // header + 4 steps
    CHECK(metrics.rfind("step,loss_total,loss_h,loss_c,loss_d,lr_sr,lr_fr\n", 0) == 0);

    // Identical run in a second workspace: byte-identical artifacts.
    const std::string dir_b = workspace("train_b");
    const jfr::CliConfig cfg_b = jfr::parse_config(tiny_config_json(dir_b));
    REQUIRE(run("gen-data", cfg_b).code == jfr::kExitOk);
    REQUIRE(run("train", cfg_b).code == jfr::kExitOk);
    CHECK(slurp(dir_b + "/out/metrics.csv") == metrics);
    CHECK(slurp(dir_b + "/model.jfck") == slurp(dir + "/model.jfck"));

    // Missing dataset is a runtime failure.
    const std::string dir_c = workspace("train_c");
    const RunResult no_data = run("train", jfr::parse_config(tiny_config_json(dir_c)));
    CHECK(no_data.code == jfr::kExitRuntime);

    // Head size must match the trainable identities.
    const std::string dir_d = workspace("train_d");
    const jfr::CliConfig mismatched =
        jfr::parse_config(tiny_config_json(dir_d, "", "7", "5"));
    REQUIRE(run("gen-data", mismatched).code == jfr::kExitOk);
    const RunResult head = run("train", mismatched);
    CHECK(head.code == jfr::kExitValidation);
    CHECK(head.err.find("identities") != std::string::npos);
}

TEST_CASE("cmd_train: a diverged run keeps the metrics of completed steps") {
    const std::string dir = workspace("train_diverge");
    const jfr::CliConfig cfg = jfr::parse_config(tiny_config_json(
        dir, ", \"total_steps\": 50, \"lr_frnet\": 1e12, \"lr_softmax\": 1e12"));
    REQUIRE(cfg.train.total_steps == 50);
    REQUIRE(run("gen-data", cfg).code == jfr::kExitOk);

    const RunResult diverged = run("train", cfg);
    CHECK(diverged.code == jfr::kExitRuntime);
    CHECK(diverged.err.find("non-finite") != std::string::npos);
    const std::string metrics = slurp(dir + "/out/metrics.csv");
    const std::size_t rows = line_count(metrics) - 1;
    CHECK(rows >= 1);
    CHECK(rows < 50);
    CHECK(!fs::exists(dir + "/model.jfck"));  // no checkpoint from a failed run
}

TEST_CASE("cmd_eval: report artifacts and failure modes") {
    const std::string dir = workspace("eval");
    const jfr::CliConfig cfg = jfr::parse_config(tiny_config_json(dir));

    // Checkpoint must exist before anything else happens.
    const RunResult missing = run("eval", cfg);
    CHECK(missing.code == jfr::kExitRuntime);
    CHECK(missing.err.find(dir + "/model.jfck") != std::string::npos);

    REQUIRE(run("gen-data", cfg).code == jfr::kExitOk);
    REQUIRE(run("train", cfg).code == jfr::kExitOk);

    const RunResult eval_run = run("eval", cfg);
    CHECK(eval_run.code == jfr::kExitOk);
    const std::string report = slurp(dir + "/out/report.csv");
    CHECK(line_count(report) == 2);
    CHECK(report.rfind("setting,accuracy,tp,fpr_target,psnr_db,n_pairs,seed,config_hash\n",
                       0) == 0);
    CHECK(report.find("\n0,") != std::string::npos);  // standalone evaluation is setting 0

    const RunResult again = run("eval", cfg);
    CHECK(again.code == jfr::kExitOk);
    CHECK(again.out == eval_run.out);
    CHECK(slurp(dir + "/out/report.csv") == report);

    // Different test inputs are honored.
    jfr::CliConfig hr_cfg = cfg;
    hr_cfg.eval_input = jfr::TestInput::Hr;
    const RunResult hr_run = run("eval", hr_cfg);
    CHECK(hr_run.code == jfr::kExitOk);
    CHECK(hr_run.out.find("input hr") != std::string::npos);
    CHECK(hr_run.out.find("psnr 99 dB") != std::string::npos);

    // An empty pair list is rejected before any computation.
    std::ofstream(dir + "/pairs.csv") << "index_a,index_b,same\n";
    const RunResult no_pairs = run("eval", cfg);
    CHECK(no_pairs.code == jfr::kExitValidation);
    CHECK(no_pairs.err.find("empty") != std::string::npos);
}

TEST_CASE("cmd_settings: full matrix artifacts") {
    const std::string dir = workspace("settings");
    const jfr::CliConfig cfg =
        jfr::parse_config(tiny_config_json(dir, ", \"total_steps\": 2, \"decay_steps\": []"));
    REQUIRE(run("gen-data", cfg).code == jfr::kExitOk);

    const RunResult result = run("settings", cfg);
    CHECK(result.code == jfr::kExitOk);
    CHECK(count_occurrences(result.out, "setting ") == 6);

    const std::string report = slurp(dir + "/out/report.csv");
    CHECK(line_count(report) == 7);  // header + six settings
    const char* stems[] = {"frnet-hr", "srnet-only", "frnet-lr", "frnet-on-hallucinated",
                           "joint"};
    for (const char* stem : stems) {
        CHECK(fs::exists(dir + "/out/" + stem + ".jfck"));
        CHECK(fs::exists(dir + "/out/" + stem + "-metrics.csv"));
    }
}

TEST_CASE("cmd_gradcheck: a corrupted analytic gradient is caught") {
    const jfr::CliConfig cfg = jfr::parse_config("{\"seed\": 1}");
    const RunResult result = run("gradcheck", cfg, "", /*corrupt=*/true);
    CHECK(result.code == jfr::kExitGradcheck);
    CHECK(result.out.find("FAIL") != std::string::npos);
}

TEST_CASE("cmd_hallucinate: panel layout and input validation") {
    const std::string dir = workspace("hallucinate");
    const jfr::CliConfig cfg =
        jfr::parse_config(tiny_config_json(dir, ", \"total_steps\": 2, \"decay_steps\": []"));
    REQUIRE(run("gen-data", cfg).code == jfr::kExitOk);
    REQUIRE(run("train", cfg).code == jfr::kExitOk);

    // Integer-valued source image so the ground-truth panel round-trips
    // exactly through the 8-bit file.
    jfr::Rng rng(31);
    jfr::Tensor raw({3, 16, 16});
    for (double& v : raw.span()) v = static_cast<double>(rng.next_below(256));
    jfr::write_ppm(raw, dir + "/input.ppm");

    const RunResult result = run("hallucinate", cfg, dir + "/input.ppm");
    CHECK(result.code == jfr::kExitOk);
    CHECK(result.out.find("panel: " + dir + "/out/hallucination.ppm") != std::string::npos);

    const jfr::Tensor panel = jfr::read_ppm(dir + "/out/hallucination.ppm");
    REQUIRE(panel.dim(0) == 3);
    REQUIRE(panel.dim(1) == 16);
    REQUIRE(panel.dim(2) == 48);

    const jfr::Sample sample = jfr::make_lr_pair(raw, 0);
    jfr::JointNetwork net = jfr::load_checkpoint(dir + "/model.jfck");
    const jfr::Tensor hallucinated =
        net.srnet.forward(sample.lr_upscaled.reshaped({1, 3, 16, 16})).reshaped({3, 16, 16});
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < 16; ++i) {
            for (std::size_t j = 0; j < 16; ++j) {
                const double up =
                    std::clamp(sample.lr_upscaled(c, i, j) * 128.0 + 128.0, 0.0, 255.0);
                const double hall =
                    std::clamp(hallucinated(c, i, j) * 128.0 + 128.0, 0.0, 255.0);
                CHECK(panel(c, i, j) == static_cast<double>(std::llround(up)));
                CHECK(panel(c, i, 16 + j) == static_cast<double>(std::llround(hall)));
                CHECK(panel(c, i, 32 + j) == raw(c, i, j));
            }
        }
    }

    // 20x18: width not divisible by 4.
    jfr::Tensor odd({3, 20, 18});
    jfr::write_ppm(odd, dir + "/odd.ppm");
    CHECK(run("hallucinate", cfg, dir + "/odd.ppm").code == jfr::kExitValidation);

    std::ofstream(dir + "/not_an_image.ppm") << "plainly not a PPM";
    CHECK(run("hallucinate", cfg, dir + "/not_an_image.ppm").code == jfr::kExitRuntime);

    jfr::CliConfig no_ckpt = cfg;
    no_ckpt.checkpoint_path = dir + "/absent.jfck";
    CHECK(run("hallucinate", no_ckpt, dir + "/input.ppm").code == jfr::kExitRuntime);

    CHECK(run("no-such-command", cfg).code == jfr::kExitValidation);
}

TEST_CASE("jfr binary: flag handling and seed override") {
    const std::string dir = workspace("binary");
    std::ofstream(dir + "/c.json") << tiny_config_json(dir);

    auto shell = [&](const std::string& args) {
        const std::string cmd = std::string(JFR_BINARY_PATH) + " " + args + " > " + dir +
                                "/stdout.txt 2> " + dir + "/stderr.txt";
        const int status = std::system(cmd.c_str());
        REQUIRE(status != -1);
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };

    CHECK(shell("--help") == 0);
    CHECK(shell("gen-data --config " + dir + "/c.json") == 0);
    const std::string base_out = slurp(dir + "/stdout.txt");

    // A seed override must change the provenance stamp.
    CHECK(shell("gen-data --config " + dir + "/c.json --seed 9") == 0);
    const std::string seeded_out = slurp(dir + "/stdout.txt");
    CHECK(base_out != seeded_out);
    CHECK(base_out.find("config: ") != std::string::npos);

    // Unknown flags and a config rejected by strict parsing both fail fast.
    CHECK(shell("gen-data --config " + dir + "/c.json --bogus") != 0);
    std::ofstream(dir + "/bad.json") << "{\"telemetry\": true}";
    CHECK(shell("gen-data --config " + dir + "/bad.json") == jfr::kExitValidation);
    CHECK(slurp(dir + "/stderr.txt").find("telemetry") != std::string::npos);

    // The out-dir override redirects artifacts.
    CHECK(shell("train --config " + dir + "/c.json --out " + dir + "/alt") == 0);
    CHECK(fs::exists(dir + "/alt/metrics.csv"));
}
