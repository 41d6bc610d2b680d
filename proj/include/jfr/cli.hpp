#pragma once

#include <iosfwd>
#include <string>

#include "jfr/config.hpp"

namespace jfr {

/// Exit codes shared by every command.
///   0  success
///   1  validation failure (bad config, bad arguments, bad request)
///   2  runtime failure (missing/unreadable/unwritable files, diverged run)
///   3  gradient check above tolerance
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitGradcheck = 3;

/// Each command writes its artifacts to the configured paths and a short
/// deterministic summary to `out`; given (config, seed) the bytes written
/// anywhere are identical across runs. Errors are thrown:
/// std::invalid_argument for validation, std::runtime_error for runtime.

/// Generates the synthetic identity dataset and its verification pair list.
void cmd_gen_data(const CliConfig& cfg, std::ostream& out);

/// Trains one model in the configured mode; writes the checkpoint and a
/// per-step metrics CSV (out dir). A run aborted by a non-finite loss still
/// leaves the metrics of every completed step on disk before the error is
/// rethrown.
void cmd_train(const CliConfig& cfg, std::ostream& out);

/// Evaluates an existing checkpoint on the configured test input; writes a
/// one-row report CSV.
void cmd_eval(const CliConfig& cfg, std::ostream& out);

/// Trains and evaluates the full six-setting comparison; writes per-model
/// checkpoints, metrics CSVs, and the six-row report CSV.
void cmd_settings(const CliConfig& cfg, std::ostream& out);

/// Finite-difference validation of every analytic gradient on small random
/// instances seeded from cfg.seed. Returns kExitOk or kExitGradcheck.
/// `corrupt` damages one analytic gradient to prove the checker can fail.
int cmd_gradcheck(const CliConfig& cfg, std::ostream& out, bool corrupt = false);

/// Runs the hallucination stack of an existing checkpoint over one PPM
/// image (treated as ground truth; dimensions divisible by 4) and writes a
/// side-by-side upscaled | hallucinated | ground-truth panel image.
void cmd_hallucinate(const CliConfig& cfg, const std::string& image_path, std::ostream& out);

/// Dispatches one command by name and maps thrown errors to exit codes,
/// printing them to `err`.
int run_command(const std::string& command, const CliConfig& cfg, const std::string& image_path,
                bool corrupt, std::ostream& out, std::ostream& err);

}  // namespace jfr
