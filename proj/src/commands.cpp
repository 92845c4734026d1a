#include "dice/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include "dice/analysis.hpp"
#include "dice/denoise.hpp"
#include "dice/error.hpp"
#include "dice/fixture.hpp"
#include "dice/record_io.hpp"

namespace dice {

namespace {

using nlohmann::json;

// Per-trial rng stream layout, stable across commands so paired comparisons share draws:
// 4i samples the clean input, 4i+1 drives the corruption (plan or trajectory), 4i+2 the
// editing Gumbels, 4i+3 the baseline/plain sampler.
std::uint64_t stream_x0(int trial) { return 4ull * trial; }
std::uint64_t stream_corrupt(int trial) { return 4ull * trial + 1; }
std::uint64_t stream_gumbel(int trial) { return 4ull * trial + 2; }
std::uint64_t stream_sampler(int trial) { return 4ull * trial + 3; }

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

void write_metrics(const std::string& out_dir, const std::string& name, json j) {
    j["version"] = 1;
    write_text(out_dir + "/" + name, j.dump(2) + "\n");
}

json tokens_json(const TokenSeq& seq) {
    return json(seq.tokens);
}

std::string atom_key(const TokenSeq& seq) {
    std::string key;
    for (int i = 0; i < seq.size(); ++i) {
        if (i) key += '-';
        key += std::to_string(seq.tokens[i]);
    }
    return key;
}

InversionRecord load_record_for(const ExperimentConfig& cfg, const std::string& path) {
    InversionRecord rec = read_record(path);
    if (rec.family != cfg.family)
        throw ConfigError("record family does not match config family");
    return rec;
}

struct Experiment {
    ExperimentConfig cfg;
    Fixture fixture;
    MaskSchedule mask_sched;            // mgm
    DiffusionSchedule diffusion_sched;  // multinomial

    Condition source() const { return Condition{cfg.condition_source}; }
    Condition target() const { return Condition{cfg.condition_target}; }
};

Experiment load_experiment(const ExperimentConfig& cfg) {
    if (cfg.fixture_path.empty()) throw ConfigError("config 'fixture' is required");
    Experiment ex{cfg, load_fixture(cfg.fixture_path), {}, {}};
    if (!ex.fixture.has_condition(cfg.condition_source))
        throw ConfigError("fixture has no condition " + std::to_string(cfg.condition_source));
    if (!ex.fixture.has_condition(cfg.condition_target))
        throw ConfigError("fixture has no condition " + std::to_string(cfg.condition_target));
    if (cfg.family == Family::mgm) {
        ex.mask_sched = MaskSchedule{cfg.mask_curve, cfg.mask_mode};
        if (cfg.noise_source == NoiseSource::mask_token && !ex.fixture.vocab.has_mask_token)
            throw ConfigError("mask-token noise needs a fixture with a mask token");
    } else {
        if (!ex.fixture.vocab.has_mask_token)
            throw ConfigError("multinomial family needs a fixture with a mask token");
        ex.diffusion_sched = make_vq_schedule(cfg.T, ex.fixture.vocab.k, cfg.schedule_preset);
    }
    return ex;
}

std::unique_ptr<Denoiser> make_mgm_denoiser(const Experiment& ex, const MaskPlan& plan) {
    if (ex.cfg.mgm_denoiser == MgmDenoiserKind::plan_aware)
        return make_template_denoiser_plan_aware(ex.fixture, plan);
    return make_template_denoiser_marginal(ex.fixture, ex.mask_sched, ex.cfg.T,
                                           ex.cfg.noise_source);
}

std::unique_ptr<Denoiser> make_multinomial_denoiser(const Experiment& ex) {
    if (ex.fixture.type == FixtureType::template_mixture)
        return make_template_denoiser_multinomial(ex.fixture, ex.diffusion_sched);
    return make_markov_denoiser(ex.fixture, ex.diffusion_sched);
}

MaskPlan trial_plan(const Experiment& ex, int trial) {
    auto rng = make_rng(ex.cfg.seed, stream_corrupt(trial));
    return generate_mask_plan(ex.mask_sched, ex.fixture.d, ex.cfg.T, ex.fixture.vocab,
                              ex.cfg.noise_source, rng);
}

TokenSeq trial_x0(const Experiment& ex, int trial) {
    auto rng = make_rng(ex.cfg.seed, stream_x0(trial));
    return sample_from(ex.fixture, ex.cfg.condition_source, rng);
}

InversionRecord invert_trial(const Experiment& ex, int trial, const TokenSeq& x0,
                             const MaskPlan* plan, const Denoiser& den) {
    if (ex.cfg.family == Family::mgm)
        return invert_mgm(x0, den, ex.source(), *plan, ex.mask_sched, ex.cfg.seed,
                          stream_corrupt(trial));
    return invert_multinomial(x0, den, ex.source(), ex.diffusion_sched, ex.cfg.seed,
                              stream_corrupt(trial));
}

EditParams replay_params(int condition) {
    EditParams p;
    p.target = Condition{condition};
    return p; // defaults: tau 1, lambda1 1, lambda2 0, linear, no cfg
}

TokenSeq run_edit(const Experiment& ex, const InversionRecord& rec, const Denoiser& den,
                  const EditParams& params, int trial) {
    if (rec.family == Family::mgm)
        return edit_mgm(rec, den, params, ex.cfg.seed, stream_gumbel(trial));
    return edit_multinomial(rec, den, ex.diffusion_sched, params, ex.cfg.seed,
                            stream_gumbel(trial));
}

TokenSeq run_baseline(const Experiment& ex, const InversionRecord& rec, const Denoiser& den,
                      int trial) {
    auto rng = make_rng(ex.cfg.seed, stream_sampler(trial));
    if (rec.family == Family::mgm) return mgm_sample(den, rec.plan, ex.source(), rng);
    return ancestral_sample(den, ex.diffusion_sched, ex.source(), rec.trajectory_at(rec.T), rng);
}

TokenSeq record_x0(const InversionRecord& rec) {
    if (rec.family == Family::mgm)
        return argmax_rows(rec.y0, rec.vocab, /*restrict_to_data=*/true);
    return rec.trajectory_at(0);
}

} // namespace

std::string resolve_out_dir(const std::string& cli_out, const ExperimentConfig& cfg) {
    std::string dir = cli_out;
    if (dir.empty()) dir = cfg.out_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("DICE_OUT_DIR")) dir = env;
    }
    if (dir.empty()) dir = "./out";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
    return dir;
}

void cmd_invert(const ExperimentConfig& cfg, const std::string& out_dir) {
    validate_config(cfg);
    Experiment ex = load_experiment(cfg);
    TokenSeq x0 = trial_x0(ex, 0);

    InversionRecord rec;
    if (cfg.family == Family::mgm) {
        MaskPlan plan = trial_plan(ex, 0);
        std::unique_ptr<Denoiser> den = make_mgm_denoiser(ex, plan);
        rec = invert_trial(ex, 0, x0, &plan, *den);
    } else {
        std::unique_ptr<Denoiser> den = make_multinomial_denoiser(ex);
        rec = invert_trial(ex, 0, x0, nullptr, *den);
    }
    write_record(rec, out_dir + "/record.bin");

    json j;
    j["command"] = "invert";
    j["config"] = config_echo(cfg);
    j["record_file"] = "record.bin";
    j["x0"] = tokens_json(x0);
    j["condition"] = rec.condition;
    j["schedule_fingerprint"] = rec.schedule_fingerprint;
    write_metrics(out_dir, "invert.json", std::move(j));
}

void cmd_reconstruct(const ExperimentConfig& cfg, const std::string& record_path,
                     const std::string& out_dir) {
    validate_config(cfg);
    Experiment ex = load_experiment(cfg);

    InversionRecord loaded;
    const bool from_file = !record_path.empty();
    if (from_file) loaded = load_record_for(cfg, record_path);

    double acc = 0.0, ham = 0.0, base_acc = 0.0, base_ham = 0.0;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        InversionRecord rec;
        std::unique_ptr<Denoiser> den;
        if (from_file) {
            rec = loaded;
            den = cfg.family == Family::mgm ? make_mgm_denoiser(ex, rec.plan)
                                            : make_multinomial_denoiser(ex);
        } else {
            TokenSeq x0 = trial_x0(ex, trial);
            if (cfg.family == Family::mgm) {
                MaskPlan plan = trial_plan(ex, trial);
                den = make_mgm_denoiser(ex, plan);
                rec = invert_trial(ex, trial, x0, &plan, *den);
                // Rebind to the record's own plan copy so the denoiser outlives this scope.
                if (cfg.mgm_denoiser == MgmDenoiserKind::plan_aware)
                    den = make_template_denoiser_plan_aware(ex.fixture, rec.plan);
            } else {
                den = make_multinomial_denoiser(ex);
                rec = invert_trial(ex, trial, x0, nullptr, *den);
            }
        }
        const TokenSeq x0 = record_x0(rec);
        const TokenSeq replay = run_edit(ex, rec, *den, replay_params(rec.condition), trial);
        const TokenSeq baseline = run_baseline(ex, rec, *den, trial);

        EditMetrics m = compute_edit_metrics(x0, replay, ex.fixture, rec.condition,
                                             rec.condition, cfg.classifier_eta);
        EditMetrics b = compute_edit_metrics(x0, baseline, ex.fixture, rec.condition,
                                             rec.condition, cfg.classifier_eta);
        acc += m.token_accuracy;
        ham += m.hamming_similarity;
        base_acc += b.token_accuracy;
        base_ham += b.hamming_similarity;
    }
    const double n = cfg.trials;

    json j;
    j["command"] = "reconstruct";
    j["config"] = config_echo(cfg);
    j["record_file"] = from_file ? record_path : "";
    j["metrics"] = {{"trials", cfg.trials},
                    {"accuracy", acc / n},
                    {"hamming_similarity", ham / n},
                    {"baseline_accuracy", base_acc / n},
                    {"baseline_hamming_similarity", base_ham / n}};
    write_metrics(out_dir, "reconstruct.json", std::move(j));
}

void cmd_edit(const ExperimentConfig& cfg, const std::string& record_path,
              const std::string& out_dir) {
    validate_config(cfg);
    Experiment ex = load_experiment(cfg);
    EditParams params = edit_params_from(cfg);
    EditParams baseline_params = params;
    baseline_params.lambda1 = 0.0;
    baseline_params.lambda2 = 1.0;

    InversionRecord loaded;
    const bool from_file = !record_path.empty();
    if (from_file) loaded = load_record_for(cfg, record_path);

    double acc = 0.0, ham = 0.0, success = 0.0, base_ham = 0.0;
    json outputs = json::array();
    for (int trial = 0; trial < cfg.trials; ++trial) {
        InversionRecord rec;
        std::unique_ptr<Denoiser> den;
        if (from_file) {
            rec = loaded;
            den = cfg.family == Family::mgm ? make_mgm_denoiser(ex, rec.plan)
                                            : make_multinomial_denoiser(ex);
        } else {
            TokenSeq x0 = trial_x0(ex, trial);
            if (cfg.family == Family::mgm) {
                MaskPlan plan = trial_plan(ex, trial);
                den = make_mgm_denoiser(ex, plan);
                rec = invert_trial(ex, trial, x0, &plan, *den);
                if (cfg.mgm_denoiser == MgmDenoiserKind::plan_aware)
                    den = make_template_denoiser_plan_aware(ex.fixture, rec.plan);
            } else {
                den = make_multinomial_denoiser(ex);
                rec = invert_trial(ex, trial, x0, nullptr, *den);
            }
        }
        const TokenSeq x0 = record_x0(rec);
        const TokenSeq edited = run_edit(ex, rec, *den, params, trial);
        const TokenSeq base = run_edit(ex, rec, *den, baseline_params, trial);

        EditMetrics m = compute_edit_metrics(x0, edited, ex.fixture, rec.condition,
                                             cfg.condition_target, cfg.classifier_eta);
        EditMetrics bm = compute_edit_metrics(x0, base, ex.fixture, rec.condition,
                                              cfg.condition_target, cfg.classifier_eta);
        acc += m.token_accuracy;
        ham += m.hamming_similarity;
        success += m.edit_success;
        base_ham += bm.hamming_similarity;
        outputs.push_back(tokens_json(edited));
    }
    const double n = cfg.trials;

    json j;
    j["command"] = "edit";
    j["config"] = config_echo(cfg);
    j["record_file"] = from_file ? record_path : "";
    j["metrics"] = {{"trials", cfg.trials},
                    {"token_accuracy", acc / n},
                    {"hamming_similarity", ham / n},
                    {"edit_success", success / n},
                    {"preservation_baseline", base_ham / n}};
    j["outputs"] = std::move(outputs);
    write_metrics(out_dir, "edit.json", std::move(j));
}

void cmd_sample(const ExperimentConfig& cfg, const std::string& record_path,
                const std::string& out_dir) {
    validate_config(cfg);
    Experiment ex = load_experiment(cfg);

    InversionRecord loaded;
    const bool from_file = !record_path.empty();
    if (from_file) loaded = load_record_for(cfg, record_path);

    json outputs = json::array();
    std::map<std::string, int> histogram;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        TokenSeq sample;
        auto rng = make_rng(cfg.seed, stream_sampler(trial));
        if (cfg.family == Family::mgm) {
            const MaskPlan plan = from_file ? loaded.plan : trial_plan(ex, trial);
            std::unique_ptr<Denoiser> den = make_mgm_denoiser(ex, plan);
            sample = mgm_sample(*den, plan, ex.source(), rng);
        } else {
            std::unique_ptr<Denoiser> den = make_multinomial_denoiser(ex);
            TokenSeq xT;
            if (from_file) {
                xT = loaded.trajectory_at(loaded.T);
            } else {
                TokenSeq x0 = trial_x0(ex, trial);
                auto corrupt_rng = make_rng(cfg.seed, stream_corrupt(trial));
                xT = q_sample(ex.diffusion_sched, cfg.T, x0, corrupt_rng);
            }
            sample = ancestral_sample(*den, ex.diffusion_sched, ex.source(), xT, rng);
        }
        outputs.push_back(tokens_json(sample));
        ++histogram[atom_key(sample)];
    }

    json j;
    j["command"] = "sample";
    j["config"] = config_echo(cfg);
    j["record_file"] = from_file ? record_path : "";
    j["metrics"] = {{"trials", cfg.trials}, {"distinct_outputs", histogram.size()}};
    j["histogram"] = json(histogram);
    j["outputs"] = std::move(outputs);
    write_metrics(out_dir, "sample.json", std::move(j));
}

void cmd_mi_curve(const ExperimentConfig& cfg, const std::string& out_dir) {
    validate_config(cfg);
    const GaussianDDPMSchedule sched = GaussianDDPMSchedule::linear(cfg.T);
    const MICurve curve = mi_curve(sched, cfg.mi_dimension);

    std::vector<int> mc_steps;
    std::vector<double> mc_values;
    if (cfg.mc_samples > 0) {
        mc_steps = {2, (cfg.T + 1) / 2, cfg.T};
        for (std::size_t i = 0; i < mc_steps.size(); ++i) {
            if (mc_steps[i] < 1 || mc_steps[i] > cfg.T)
                throw ConfigError("mi-curve: T too small for the MC overlay");
            auto rng = make_rng(cfg.seed, static_cast<std::uint64_t>(mc_steps[i]));
            mc_values.push_back(
                mi_monte_carlo(sched, cfg.mi_dimension, mc_steps[i], cfg.mc_samples, rng));
        }
    }

    std::string csv;
    {
        char head[160];
        std::snprintf(head, sizeof(head),
                      "# schedule=gaussian-linear T=%d D=%d fingerprint=%016llx\n", cfg.T,
                      cfg.mi_dimension,
                      static_cast<unsigned long long>(curve.schedule_fingerprint));
        csv = head;
    }
    csv += cfg.mc_samples > 0 ? "t,I_nats,I_mc\n" : "t,I_nats\n";
    for (int t = 1; t <= cfg.T; ++t) {
        csv += std::to_string(t);
        csv += ',';
        csv += fmt_double(curve.mi_nats[static_cast<std::size_t>(t) - 1]);
        if (cfg.mc_samples > 0) {
            csv += ',';
            for (std::size_t i = 0; i < mc_steps.size(); ++i)
                if (mc_steps[i] == t) {
                    csv += fmt_double(mc_values[i]);
                    break;
                }
        }
        csv += '\n';
    }
    write_text(out_dir + "/mi_curve.csv", csv);

    json j;
    j["command"] = "mi-curve";
    j["config"] = config_echo(cfg);
    j["curve_file"] = "mi_curve.csv";
    json mc = json::array();
    for (std::size_t i = 0; i < mc_steps.size(); ++i)
        mc.push_back({{"t", mc_steps[i]}, {"I_mc", mc_values[i]}});
    j["metrics"] = {{"T", cfg.T},
                    {"D", cfg.mi_dimension},
                    {"I_first", curve.mi_nats.front()},
                    {"I_last", curve.mi_nats.back()},
                    {"mc", std::move(mc)}};
    write_metrics(out_dir, "mi_curve.json", std::move(j));
}

void cmd_sweep(const ExperimentConfig& cfg, const std::string& out_dir) {
    validate_config(cfg);
    Experiment ex = load_experiment(cfg);
    const std::vector<double> grid = {0.0, 0.2, 0.5, 0.7, 1.0};

    std::vector<double> ham(grid.size(), 0.0), success(grid.size(), 0.0), acc(grid.size(), 0.0);
    for (int trial = 0; trial < cfg.trials; ++trial) {
        TokenSeq x0 = trial_x0(ex, trial);
        InversionRecord rec;
        std::unique_ptr<Denoiser> den;
        if (cfg.family == Family::mgm) {
            MaskPlan plan = trial_plan(ex, trial);
            den = make_mgm_denoiser(ex, plan);
            rec = invert_trial(ex, trial, x0, &plan, *den);
            if (cfg.mgm_denoiser == MgmDenoiserKind::plan_aware)
                den = make_template_denoiser_plan_aware(ex.fixture, rec.plan);
        } else {
            den = make_multinomial_denoiser(ex);
            rec = invert_trial(ex, trial, x0, nullptr, *den);
        }

        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            EditParams p = edit_params_from(cfg);
            p.lambda1 = grid[gi];
            p.lambda2 = 1.0 - grid[gi];
            const TokenSeq edited = run_edit(ex, rec, *den, p, trial);
            EditMetrics m = compute_edit_metrics(x0, edited, ex.fixture, rec.condition,
                                                 cfg.condition_target, cfg.classifier_eta);
            ham[gi] += m.hamming_similarity;
            success[gi] += m.edit_success;
            acc[gi] += m.token_accuracy;
        }
    }

    const double n = cfg.trials;
    std::string csv = "lambda1,lambda2,hamming,edit_success,accuracy\n";
    json rows = json::array();
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        csv += fmt_double(grid[gi]) + "," + fmt_double(1.0 - grid[gi]) + "," +
               fmt_double(ham[gi] / n) + "," + fmt_double(success[gi] / n) + "," +
               fmt_double(acc[gi] / n) + "\n";
        rows.push_back({{"lambda1", grid[gi]},
                        {"lambda2", 1.0 - grid[gi]},
                        {"hamming_similarity", ham[gi] / n},
                        {"edit_success", success[gi] / n},
                        {"token_accuracy", acc[gi] / n},
                        {"preservation_baseline", ham[0] / n}});
    }
    write_text(out_dir + "/sweep.csv", csv);

    json j;
    j["command"] = "sweep";
    j["config"] = config_echo(cfg);
    j["curve_file"] = "sweep.csv";
    j["metrics"] = {{"trials", cfg.trials}, {"rows", std::move(rows)}};
    write_metrics(out_dir, "sweep.json", std::move(j));
}

} // namespace dice
