#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dice/commands.hpp"
#include "dice/error.hpp"

namespace {

struct CliState {
    std::string config_path;
    std::string record_path;
    std::string out_dir;

    std::optional<std::string> family, fixture, schedule_preset, mask_curve, mask_mode,
        noise_source, mgm_denoiser, strategy, lambda_schedule, x0_reading;
    std::optional<std::uint64_t> seed;
    std::optional<int> T, trials, condition_source, condition_target, mi_dimension, mc_samples;
    std::optional<double> tau, lambda1, lambda2, cfg_scale, classifier_eta;
};

void add_common_options(CLI::App* sub, CliState& s) {
    sub->add_option("--config", s.config_path, "experiment config JSON file");
    sub->add_option("--record", s.record_path, "inversion record file");
    sub->add_option("--out", s.out_dir, "output directory");
    sub->add_option("--seed", s.seed, "rng seed override");
    sub->add_option("--trials", s.trials, "trial count override");
    sub->add_option("--family", s.family, "mgm | multinomial");
    sub->add_option("--fixture", s.fixture, "fixture JSON file");
    sub->add_option("--schedule-preset", s.schedule_preset, "mask-only | mask-and-replace");
    sub->add_option("--T", s.T, "diffusion step count");
    sub->add_option("--mask-curve", s.mask_curve,
                    "linear | one-minus-cos | sin | one-minus-sqrt | sqrt");
    sub->add_option("--mask-mode", s.mask_mode, "inclusive | random");
    sub->add_option("--noise-source", s.noise_source, "mask-token | random-token");
    sub->add_option("--mgm-denoiser", s.mgm_denoiser, "plan-aware | marginal");
    sub->add_option("--condition-source", s.condition_source, "source condition label");
    sub->add_option("--condition-target", s.condition_target, "target condition label");
    sub->add_option("--tau", s.tau, "normalized editing start step in (0,1]");
    sub->add_option("--lambda1", s.lambda1, "residual injection strength");
    sub->add_option("--lambda2", s.lambda2, "fresh noise strength");
    sub->add_option("--strategy", s.strategy, "linear | variance_preserving | max");
    sub->add_option("--lambda-schedule", s.lambda_schedule,
                    "constant | linear-decay | cosine-decay");
    sub->add_option("--cfg-scale", s.cfg_scale, "classifier-free guidance scale");
    sub->add_option("--x0-reading", s.x0_reading, "distribution | argmax");
    sub->add_option("--classifier-eta", s.classifier_eta, "classifier smoothing in (0,1)");
    sub->add_option("--mi-dimension", s.mi_dimension, "dimensions for the information curve");
    sub->add_option("--mc-samples", s.mc_samples, "Monte-Carlo overlay sample count");
}

dice::ExperimentConfig build_config(const CliState& s) {
    dice::ExperimentConfig cfg;
    if (!s.config_path.empty()) cfg = dice::load_config(s.config_path);
    if (s.family) cfg.family = dice::family_from_string(*s.family);
    if (s.fixture) cfg.fixture_path = *s.fixture;
    if (s.schedule_preset)
        cfg.schedule_preset = dice::schedule_preset_from_string(*s.schedule_preset);
    if (s.T) cfg.T = *s.T;
    if (s.mask_curve) cfg.mask_curve = dice::mask_curve_from_string(*s.mask_curve);
    if (s.mask_mode) cfg.mask_mode = dice::mask_mode_from_string(*s.mask_mode);
    if (s.noise_source) cfg.noise_source = dice::noise_source_from_string(*s.noise_source);
    if (s.mgm_denoiser) cfg.mgm_denoiser = dice::mgm_denoiser_from_string(*s.mgm_denoiser);
    if (s.seed) cfg.seed = *s.seed;
    if (s.trials) cfg.trials = *s.trials;
    if (s.condition_source) cfg.condition_source = *s.condition_source;
    if (s.condition_target) cfg.condition_target = *s.condition_target;
    if (s.tau) cfg.tau = *s.tau;
    if (s.lambda1) cfg.lambda1 = *s.lambda1;
    if (s.lambda2) cfg.lambda2 = *s.lambda2;
    if (s.strategy) cfg.strategy = dice::noise_strategy_from_string(*s.strategy);
    if (s.lambda_schedule)
        cfg.lambda_schedule = dice::lambda_decay_from_string(*s.lambda_schedule);
    if (s.cfg_scale) cfg.cfg_scale = *s.cfg_scale;
    if (s.x0_reading) cfg.x0_reading = dice::x0_reading_from_string(*s.x0_reading);
    if (s.classifier_eta) cfg.classifier_eta = *s.classifier_eta;
    if (s.mi_dimension) cfg.mi_dimension = *s.mi_dimension;
    if (s.mc_samples) cfg.mc_samples = *s.mc_samples;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"discrete diffusion inversion, editing, and analysis driver"};
    app.require_subcommand(1);

    CliState s;
    CLI::App* invert = app.add_subcommand("invert", "invert a clean sequence into a record");
    CLI::App* reconstruct =
        app.add_subcommand("reconstruct", "replay a record at full strength plus baseline");
    CLI::App* edit = app.add_subcommand("edit", "steer sampling toward a target condition");
    CLI::App* sample = app.add_subcommand("sample", "plain sampler without residual injection");
    CLI::App* mi = app.add_subcommand("mi-curve", "information curve for the scalar schedule");
    CLI::App* sweep = app.add_subcommand("sweep", "strength sweep over the standard grid");
    for (CLI::App* sub : {invert, reconstruct, edit, sample, mi, sweep})
        add_common_options(sub, s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        const dice::ExperimentConfig cfg = build_config(s);
        const std::string out = dice::resolve_out_dir(s.out_dir, cfg);
        if (invert->parsed()) dice::cmd_invert(cfg, out);
        else if (reconstruct->parsed()) dice::cmd_reconstruct(cfg, s.record_path, out);
        else if (edit->parsed()) dice::cmd_edit(cfg, s.record_path, out);
        else if (sample->parsed()) dice::cmd_sample(cfg, s.record_path, out);
        else if (mi->parsed()) dice::cmd_mi_curve(cfg, out);
        else if (sweep->parsed()) dice::cmd_sweep(cfg, out);
        return 0;
    } catch (const dice::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const dice::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
