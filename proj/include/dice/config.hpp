#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "dice/dice.hpp"
#include "dice/maskgen.hpp"
#include "dice/schedules.hpp"

namespace dice {

enum class MgmDenoiserKind { plan_aware, marginal };

MgmDenoiserKind mgm_denoiser_from_string(const std::string& s);
std::string to_string(MgmDenoiserKind k);

// Flat JSON experiment description. Every key is scalar, "version" is required and must
// be 1, and unknown keys are rejected by name so typos cannot silently no-op in sweeps.
struct ExperimentConfig {
    Family family = Family::mgm;
    std::string fixture_path;
    SchedulePreset schedule_preset = SchedulePreset::mask_and_replace;
    int T = 8;
    MaskCurve mask_curve = MaskCurve::linear;
    MaskMode mask_mode = MaskMode::inclusive;
    NoiseSource noise_source = NoiseSource::mask_token;
    MgmDenoiserKind mgm_denoiser = MgmDenoiserKind::plan_aware;
    std::uint64_t seed = 1;
    int trials = 16;
    int condition_source = 0;
    int condition_target = 1;
    double tau = 1.0;
    double lambda1 = 1.0;
    double lambda2 = 0.0;
    NoiseStrategy strategy = NoiseStrategy::linear;
    LambdaDecay lambda_schedule = LambdaDecay::constant;
    double cfg_scale = 1.0;
    X0Reading x0_reading = X0Reading::distribution;
    double classifier_eta = 0.05;
    std::string out_dir;
    int mi_dimension = 1;
    int mc_samples = 0;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path); // IoError if unreadable

// Full range validation, re-run after CLI overrides may have bypassed parse_config.
void validate_config(const ExperimentConfig& cfg);

// Canonical round-trippable echo of a config, embedded in every metrics file so a result
// can always be traced back to the exact parameters that produced it.
nlohmann::json config_echo(const ExperimentConfig& cfg);

// Editing knobs packaged for the dice module; validates per validate_edit_params.
EditParams edit_params_from(const ExperimentConfig& cfg);

} // namespace dice
