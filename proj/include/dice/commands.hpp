#pragma once

#include <string>

#include "dice/config.hpp"

namespace dice {

// Output directory precedence: --out flag, then config out_dir, then DICE_OUT_DIR,
// then ./out. The directory is created if missing.
std::string resolve_out_dir(const std::string& cli_out, const ExperimentConfig& cfg);

// Experiment drivers behind the CLI subcommands. Each writes its artifacts plus a
// versioned metrics JSON (with the full config echoed) into out_dir, and throws
// ConfigError / IoError / NumericError for the caller to map to exit codes.
// record_path may be empty where noted; commands then run self-contained trials.

// Writes record.bin and invert.json.
void cmd_invert(const ExperimentConfig& cfg, const std::string& out_dir);

// Full-strength replay (lambda1=1, lambda2=0, tau=1, target=source) plus the
// resample-masked-regions baseline. Writes reconstruct.json.
void cmd_reconstruct(const ExperimentConfig& cfg, const std::string& record_path,
                     const std::string& out_dir);

// Steered sampling toward the target condition. Writes edit.json with per-trial outputs.
void cmd_edit(const ExperimentConfig& cfg, const std::string& record_path,
              const std::string& out_dir);

// Plain sampler under the source condition. Writes sample.json.
void cmd_sample(const ExperimentConfig& cfg, const std::string& record_path,
                const std::string& out_dir);

// Closed-form information curve, optional Monte-Carlo overlay at t = 2, mid, T.
// Writes mi_curve.csv and mi_curve.json.
void cmd_mi_curve(const ExperimentConfig& cfg, const std::string& out_dir);

// Strength sweep over lambda1 in {0, 0.2, 0.5, 0.7, 1.0} with lambda2 = 1 - lambda1.
// Writes sweep.csv and sweep.json.
void cmd_sweep(const ExperimentConfig& cfg, const std::string& out_dir);

} // namespace dice
