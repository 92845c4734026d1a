#include "dice/config.hpp"

#include <fstream>
#include <sstream>

#include "dice/error.hpp"

namespace dice {

namespace {

using nlohmann::json;

std::string get_string(const json& v, const char* key) {
    if (!v.is_string()) throw ConfigError(std::string("config key '") + key + "' must be a string");
    return v.get<std::string>();
}

int get_int(const json& v, const char* key) {
    if (!v.is_number_integer())
        throw ConfigError(std::string("config key '") + key + "' must be an integer");
    return v.get<int>();
}

std::uint64_t get_u64(const json& v, const char* key) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError(std::string("config key '") + key + "' must be an integer");
    if (v.is_number_integer() && v.get<std::int64_t>() < 0)
        throw ConfigError(std::string("config key '") + key + "' must be nonnegative");
    return v.get<std::uint64_t>();
}

double get_double(const json& v, const char* key) {
    if (!v.is_number())
        throw ConfigError(std::string("config key '") + key + "' must be a number");
    return v.get<double>();
}

} // namespace

MgmDenoiserKind mgm_denoiser_from_string(const std::string& s) {
    if (s == "plan-aware") return MgmDenoiserKind::plan_aware;
    if (s == "marginal") return MgmDenoiserKind::marginal;
    throw ConfigError("unknown mgm denoiser: " + s);
}

std::string to_string(MgmDenoiserKind k) {
    return k == MgmDenoiserKind::plan_aware ? "plan-aware" : "marginal";
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (!j.contains("version")) throw ConfigError("config is missing 'version'");
    if (!j["version"].is_number_integer() || j["version"].get<int>() != 1)
        throw ConfigError("config 'version' must be the integer 1");

    ExperimentConfig cfg;
    for (const auto& [key, v] : j.items()) {
        if (key == "version") continue;
        if (key == "family") cfg.family = family_from_string(get_string(v, "family"));
        else if (key == "fixture") cfg.fixture_path = get_string(v, "fixture");
        else if (key == "schedule_preset")
            cfg.schedule_preset = schedule_preset_from_string(get_string(v, "schedule_preset"));
        else if (key == "T") cfg.T = get_int(v, "T");
        else if (key == "mask_curve") cfg.mask_curve = mask_curve_from_string(get_string(v, "mask_curve"));
        else if (key == "mask_mode") cfg.mask_mode = mask_mode_from_string(get_string(v, "mask_mode"));
        else if (key == "noise_source")
            cfg.noise_source = noise_source_from_string(get_string(v, "noise_source"));
        else if (key == "mgm_denoiser")
            cfg.mgm_denoiser = mgm_denoiser_from_string(get_string(v, "mgm_denoiser"));
        else if (key == "seed") cfg.seed = get_u64(v, "seed");
        else if (key == "trials") cfg.trials = get_int(v, "trials");
        else if (key == "condition_source") cfg.condition_source = get_int(v, "condition_source");
        else if (key == "condition_target") cfg.condition_target = get_int(v, "condition_target");
        else if (key == "tau") cfg.tau = get_double(v, "tau");
        else if (key == "lambda1") cfg.lambda1 = get_double(v, "lambda1");
        else if (key == "lambda2") cfg.lambda2 = get_double(v, "lambda2");
        else if (key == "strategy") cfg.strategy = noise_strategy_from_string(get_string(v, "strategy"));
        else if (key == "lambda_schedule")
            cfg.lambda_schedule = lambda_decay_from_string(get_string(v, "lambda_schedule"));
        else if (key == "cfg_scale") cfg.cfg_scale = get_double(v, "cfg_scale");
        else if (key == "x0_reading") cfg.x0_reading = x0_reading_from_string(get_string(v, "x0_reading"));
        else if (key == "classifier_eta") cfg.classifier_eta = get_double(v, "classifier_eta");
        else if (key == "out_dir") cfg.out_dir = get_string(v, "out_dir");
        else if (key == "mi_dimension") cfg.mi_dimension = get_int(v, "mi_dimension");
        else if (key == "mc_samples") cfg.mc_samples = get_int(v, "mc_samples");
        else throw ConfigError("unknown config key: " + key);
    }

    validate_config(cfg);
    return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.T < 1) throw ConfigError("config 'T' must be at least 1");
    if (cfg.trials < 1) throw ConfigError("config 'trials' must be at least 1");
    if (cfg.mi_dimension < 1) throw ConfigError("config 'mi_dimension' must be at least 1");
    if (cfg.mc_samples < 0) throw ConfigError("config 'mc_samples' must be nonnegative");
    if (!(cfg.classifier_eta > 0.0) || cfg.classifier_eta >= 1.0)
        throw ConfigError("config 'classifier_eta' must be in (0, 1)");
    edit_params_from(cfg); // validates tau, lambdas, strategy pairing, cfg scale
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path);
    return parse_config(buf.str());
}

nlohmann::json config_echo(const ExperimentConfig& cfg) {
    json j;
    j["version"] = 1;
    j["family"] = to_string(cfg.family);
    j["fixture"] = cfg.fixture_path;
    j["schedule_preset"] = to_string(cfg.schedule_preset);
    j["T"] = cfg.T;
    j["mask_curve"] = to_string(cfg.mask_curve);
    j["mask_mode"] = to_string(cfg.mask_mode);
    j["noise_source"] = to_string(cfg.noise_source);
    j["mgm_denoiser"] = to_string(cfg.mgm_denoiser);
    j["seed"] = cfg.seed;
    j["trials"] = cfg.trials;
    j["condition_source"] = cfg.condition_source;
    j["condition_target"] = cfg.condition_target;
    j["tau"] = cfg.tau;
    j["lambda1"] = cfg.lambda1;
    j["lambda2"] = cfg.lambda2;
    j["strategy"] = to_string(cfg.strategy);
    j["lambda_schedule"] = to_string(cfg.lambda_schedule);
    j["cfg_scale"] = cfg.cfg_scale;
    j["x0_reading"] = to_string(cfg.x0_reading);
    j["classifier_eta"] = cfg.classifier_eta;
    j["out_dir"] = cfg.out_dir;
    j["mi_dimension"] = cfg.mi_dimension;
    j["mc_samples"] = cfg.mc_samples;
    return j;
}

EditParams edit_params_from(const ExperimentConfig& cfg) {
    EditParams p;
    p.target = Condition{cfg.condition_target};
    p.tau = cfg.tau;
    p.lambda1 = cfg.lambda1;
    p.lambda2 = cfg.lambda2;
    p.decay = cfg.lambda_schedule;
    p.strategy = cfg.strategy;
    p.cfg_scale = cfg.cfg_scale;
    p.x0_reading = cfg.x0_reading;
    validate_edit_params(p);
    return p;
}

} // namespace dice
