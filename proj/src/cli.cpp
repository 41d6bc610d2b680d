#include "jfr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "jfr/eval.hpp"
#include "jfr/gradcheck.hpp"

namespace jfr {

namespace {

void ensure_parent_dir(const std::string& file_path) {
    const std::filesystem::path parent = std::filesystem::path(file_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::string hex16(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

Dataset load_dataset_with_pairs(const CliConfig& cfg) {
    Dataset ds = load_dataset(cfg.dataset_path);
    ds.pairs = load_pairs_csv(cfg.pairs_path);
    return ds;
}

void require_head_matches(const CliConfig& cfg, const Dataset& ds) {
    if (cfg.net.classes != ds.train_classes) {
        throw std::invalid_argument("net.classes is " + std::to_string(cfg.net.classes) +
                                    " but the dataset trains on " +
                                    std::to_string(ds.train_classes) + " identities");
    }
}

void print_report_line(std::ostream& out, const EvalReport& r) {
    out << "setting " << r.setting << ": accuracy " << num(r.accuracy) << ", tp@fpr"
        << num(r.fpr_target) << " " << num(r.tp) << (r.low_support ? " (low support)" : "")
        << ", psnr " << num(r.psnr_db) << " dB, " << r.n_pairs << " pairs\n";
}

}  // namespace

void cmd_gen_data(const CliConfig& cfg, std::ostream& out) {
    cfg.data.validate();
    const Dataset ds = generate_synthetic_dataset(cfg.data, cfg.seed);
    ensure_parent_dir(cfg.dataset_path);
    ensure_parent_dir(cfg.pairs_path);
    save_dataset(ds, cfg.dataset_path);
    save_pairs_csv(ds.pairs, cfg.pairs_path);
    out << "dataset: " << cfg.dataset_path << " (" << ds.train.size() << " train, "
        << ds.test.size() << " held-out, " << ds.classes << " identities)\n";
    out << "pairs: " << cfg.pairs_path << " (" << ds.pairs.size() << " pairs)\n";
    out << "config: " << hex16(cfg.config_hash) << "\n";
}

void cmd_train(const CliConfig& cfg, std::ostream& out) {
    cfg.net.validate();
    cfg.train.validate();
    const Dataset ds = load_dataset(cfg.dataset_path);
    require_head_matches(cfg, ds);

    JointNetwork net(cfg.net, cfg.train.gamma);
    Rng rng(cfg.seed);
    net.init(rng);

    std::filesystem::create_directories(cfg.out_dir);
    const std::string metrics_path = cfg.out_dir + "/metrics.csv";

    std::vector<TrainLogRow> rows;
    TrainHooks hooks;
    hooks.on_step = [&rows](const TrainLogRow& row) { rows.push_back(row); };
    try {
        train(net, ds, cfg.train, cfg.train_mode, &hooks);
    } catch (...) {
        // Keep the metrics of every step that did complete.
        write_metrics_csv(metrics_path, rows);
        throw;
    }

    ensure_parent_dir(cfg.checkpoint_path);
    save_checkpoint(net, cfg.checkpoint_path);
    write_metrics_csv(metrics_path, rows);

    out << "trained " << to_string(cfg.train_mode) << " for " << rows.size() << " steps\n";
    if (!rows.empty()) out << "final loss: " << num(rows.back().loss_total) << "\n";
    out << "checkpoint: " << cfg.checkpoint_path << "\n";
    out << "metrics: " << metrics_path << "\n";
    out << "config: " << hex16(cfg.config_hash) << "\n";
}

void cmd_eval(const CliConfig& cfg, std::ostream& out) {
    if (!std::filesystem::exists(cfg.checkpoint_path)) {
        throw std::runtime_error("checkpoint missing for evaluation: " + cfg.checkpoint_path);
    }
    JointNetwork net = load_checkpoint(cfg.checkpoint_path);
    const Dataset ds = load_dataset_with_pairs(cfg);
    if (ds.pairs.empty()) {
        throw std::invalid_argument("pair list is empty: " + cfg.pairs_path);
    }

    EvalReport report = evaluate_verification(net, ds, cfg.eval_input, cfg.eval);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string report_path = cfg.out_dir + "/report.csv";
    write_report_csv(report_path, {&report, 1});

    out << "input " << to_string(cfg.eval_input) << ": accuracy " << num(report.accuracy)
        << ", tp@fpr" << num(report.fpr_target) << " " << num(report.tp)
        << (report.low_support ? " (low support)" : "") << ", psnr " << num(report.psnr_db)
        << " dB\n";
    out << "report: " << report_path << "\n";
    out << "config: " << hex16(cfg.config_hash) << "\n";
}

void cmd_settings(const CliConfig& cfg, std::ostream& out) {
    const Dataset ds = load_dataset_with_pairs(cfg);
    if (ds.pairs.empty()) {
        throw std::invalid_argument("pair list is empty: " + cfg.pairs_path);
    }
    SettingsConfig sc;
    sc.net = cfg.net;
    sc.train = cfg.train;
    sc.eval = cfg.eval;
    const std::vector<EvalReport> reports = run_settings_matrix(ds, sc, cfg.out_dir);
    const std::string report_path = cfg.out_dir + "/report.csv";
    write_report_csv(report_path, reports);
    for (const EvalReport& r : reports) print_report_line(out, r);
    out << "report: " << report_path << "\n";
    out << "config: " << hex16(cfg.config_hash) << "\n";
}

int cmd_gradcheck(const CliConfig& cfg, std::ostream& out, bool corrupt) {
    // Small enough for a finite-difference sweep over every parameter, while
    // still containing every layer type the full-scale stacks use.
    NetConfig net;
    net.input_height = 16;
    net.input_width = 16;
    net.channel_divisor = 64;
    net.blocks = {1, 1, 1, 1};
    net.feature_dim = 4;
    net.classes = 3;
    net.stage_conv_pad = 1;

    constexpr double kStep = 1e-3;
    constexpr double kTolerance = 1e-4;
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 20; ++i) seeds.push_back(cfg.seed + i);

    const GradcheckSuiteResult suite = run_gradcheck_suite(net, seeds, kStep, kTolerance, corrupt);
    for (const GradcheckReport& r : suite.reports) {
        out << "seed " << r.seed << ": max_rel_err " << num(r.max_rel_error) << " (worst "
            << r.worst_parameter << "[" << r.worst_index << "], " << r.values_checked
            << " values)\n";
    }
    out << "gradcheck: " << (suite.passed ? "PASS" : "FAIL") << " (max " << num(suite.max_rel_error)
        << ", tolerance " << num(suite.tolerance) << ", " << suite.reports.size() << " seeds)\n";
    return suite.passed ? kExitOk : kExitGradcheck;
}

void cmd_hallucinate(const CliConfig& cfg, const std::string& image_path, std::ostream& out) {
    if (!std::filesystem::exists(cfg.checkpoint_path)) {
        throw std::runtime_error("checkpoint missing for hallucination: " + cfg.checkpoint_path);
    }
    JointNetwork net = load_checkpoint(cfg.checkpoint_path);
    const Tensor raw = read_ppm(image_path);
    const std::size_t h = raw.dim(1), w = raw.dim(2);
    if (h % 4 != 0 || w % 4 != 0) {
        throw std::invalid_argument("image dimensions must be divisible by 4, got " +
                                    std::to_string(h) + "x" + std::to_string(w));
    }

    const Sample sample = make_lr_pair(raw, 0);
    const Tensor hallucinated =
        net.srnet.forward(sample.lr_upscaled.reshaped({1, 3, h, w})).reshaped({3, h, w});

    // Side-by-side panels: bicubic-upscaled input, hallucination, ground
    // truth; normalized values map back to gray levels (write_ppm clamps).
    Tensor panel({3, h, 3 * w});
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                panel[(c * h + i) * 3 * w + j] =
                    sample.lr_upscaled[(c * h + i) * w + j] * 128.0 + 128.0;
                panel[(c * h + i) * 3 * w + w + j] =
                    hallucinated[(c * h + i) * w + j] * 128.0 + 128.0;
                panel[(c * h + i) * 3 * w + 2 * w + j] = raw[(c * h + i) * w + j];
            }
        }
    }
    std::filesystem::create_directories(cfg.out_dir);
    const std::string panel_path = cfg.out_dir + "/hallucination.ppm";
    write_ppm(panel, panel_path);

    const double peak = 255.0 / 128.0;
    out << "psnr upscaled " << num(psnr(sample.lr_upscaled, sample.hr, peak))
        << " dB, hallucinated " << num(psnr(hallucinated, sample.hr, peak)) << " dB\n";
    out << "panel: " << panel_path << " (" << h << "x" << 3 * w << ")\n";
}

int run_command(const std::string& command, const CliConfig& cfg, const std::string& image_path,
                bool corrupt, std::ostream& out, std::ostream& err) {
    try {
        if (command == "gen-data") {
            cmd_gen_data(cfg, out);
        } else if (command == "train") {
            cmd_train(cfg, out);
        } else if (command == "eval") {
            cmd_eval(cfg, out);
        } else if (command == "settings") {
            cmd_settings(cfg, out);
        } else if (command == "gradcheck") {
            return cmd_gradcheck(cfg, out, corrupt);
        } else if (command == "hallucinate") {
            cmd_hallucinate(cfg, image_path, out);
        } else {
            err << "error: unknown command '" << command << "'\n";
            return kExitValidation;
        }
        return kExitOk;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace jfr
