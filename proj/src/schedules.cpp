#include "dice/schedules.hpp"

#include <cmath>
#include <cstring>

namespace dice {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// FNV-1a over raw bytes; good enough to detect schedule mismatches between a record
// and the config used to replay it.
std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a_doubles(std::uint64_t h, const std::vector<double>& v) {
    return fnv1a(h, v.data(), v.size() * sizeof(double));
}

double clamp_nonneg(double v, const char* what) {
    if (v < 0.0) {
        if (v < -1e-12) throw ConfigError(std::string(what) + " came out negative");
        return 0.0;
    }
    return v;
}

} // namespace

double DiffusionSchedule::beta(int t) const {
    const double a = alpha.at(t - 1);
    const double g = gamma.at(t - 1);
    return clamp_nonneg((1.0 - a - g) / K, "per-step replace mass");
}

double DiffusionSchedule::beta_bar(int t) const {
    // 1 - abar - gbar rewritten as prod_keep - abar; avoids cancellation near gbar ~ 0.
    return clamp_nonneg((prod_keep.at(t) - alpha_bar.at(t)) / K, "cumulative replace mass");
}

std::uint64_t DiffusionSchedule::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    const std::int64_t dims[2] = {T, K};
    h = fnv1a(h, dims, sizeof(dims));
    h = fnv1a_doubles(h, alpha);
    h = fnv1a_doubles(h, gamma);
    return h;
}

SchedulePreset schedule_preset_from_string(const std::string& s) {
    if (s == "mask-only") return SchedulePreset::mask_only;
    if (s == "mask-and-replace") return SchedulePreset::mask_and_replace;
    throw ConfigError("unknown schedule preset: " + s);
}

std::string to_string(SchedulePreset p) {
    return p == SchedulePreset::mask_only ? "mask-only" : "mask-and-replace";
}

DiffusionSchedule make_vq_schedule(int T, int K, std::vector<double> alpha,
                                   std::vector<double> gamma) {
    if (T < 1) throw ConfigError("schedule needs T >= 1");
    if (K < 2) throw ConfigError("schedule needs at least two data tokens");
    if (alpha.size() != static_cast<std::size_t>(T) || gamma.size() != static_cast<std::size_t>(T)) {
        throw ConfigError("schedule arrays must have length T");
    }
    for (int t = 0; t < T; ++t) {
        const double a = alpha[t], g = gamma[t];
        if (!(a >= 0.0 && a <= 1.0) || !(g >= 0.0 && g <= 1.0)) {
            throw ConfigError("schedule entries must lie in [0,1]");
        }
        if (a + g > 1.0 + 1e-12) {
            throw ConfigError("infeasible schedule: alpha_t + gamma_t > 1 at step " +
                              std::to_string(t + 1));
        }
    }
    DiffusionSchedule s;
    s.T = T;
    s.K = K;
    s.alpha = std::move(alpha);
    s.gamma = std::move(gamma);
    s.alpha_bar.resize(T + 1);
    s.gamma_bar.resize(T + 1);
    s.prod_keep.resize(T + 1);
    s.alpha_bar[0] = 1.0;
    s.prod_keep[0] = 1.0;
    s.gamma_bar[0] = 0.0;
    for (int t = 1; t <= T; ++t) {
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t - 1];
        s.prod_keep[t] = s.prod_keep[t - 1] * (1.0 - s.gamma[t - 1]);
        s.gamma_bar[t] = 1.0 - s.prod_keep[t];
    }
    return s;
}

DiffusionSchedule make_vq_schedule(int T, int K, SchedulePreset preset) {
    if (T < 1) throw ConfigError("schedule needs T >= 1");
    std::vector<double> alpha(T), gamma(T);
    if (preset == SchedulePreset::mask_only) {
        // gamma ramps linearly to 1, no uniform replacement. gamma_T = 1 absorbs
        // everything, so alpha_bar_T = 0 regardless of T.
        for (int t = 1; t <= T; ++t) {
            gamma[t - 1] = static_cast<double>(t) / T;
            alpha[t - 1] = 1.0 - gamma[t - 1];
        }
    } else {
        // Linear cumulative curves, per-step values from their ratios. Keeps every state
        // reachable (beta_bar > 0 for t >= 1) while alpha_bar_T ends below 1e-2.
        const double abar_1 = 0.99999, abar_T = 9e-6;
        const double gbar_1 = 9e-6, gbar_T = 0.9;
        double prev_abar = 1.0, prev_keep = 1.0;
        for (int t = 1; t <= T; ++t) {
            const double frac = T == 1 ? 1.0 : static_cast<double>(t - 1) / (T - 1);
            const double abar = abar_1 + frac * (abar_T - abar_1);
            const double keep = 1.0 - (gbar_1 + frac * (gbar_T - gbar_1));
            alpha[t - 1] = abar / prev_abar;
            gamma[t - 1] = 1.0 - keep / prev_keep;
            prev_abar = abar;
            prev_keep = keep;
        }
    }
    DiffusionSchedule s = make_vq_schedule(T, K, std::move(alpha), std::move(gamma));
    if (s.abar(T) > 0.01) throw ConfigError("preset failed to reach alpha_bar_T <= 0.01");
    return s;
}

MaskCurve mask_curve_from_string(const std::string& s) {
    if (s == "linear") return MaskCurve::linear;
    if (s == "one-minus-cos") return MaskCurve::one_minus_cos;
    if (s == "sin") return MaskCurve::sin_curve;
    if (s == "one-minus-sqrt") return MaskCurve::one_minus_sqrt;
    if (s == "sqrt") return MaskCurve::sqrt_curve;
    throw ConfigError("unknown mask curve: " + s);
}

std::string to_string(MaskCurve c) {
    switch (c) {
        case MaskCurve::linear: return "linear";
        case MaskCurve::one_minus_cos: return "one-minus-cos";
        case MaskCurve::sin_curve: return "sin";
        case MaskCurve::one_minus_sqrt: return "one-minus-sqrt";
        case MaskCurve::sqrt_curve: return "sqrt";
    }
    throw ConfigError("bad mask curve enum");
}

MaskMode mask_mode_from_string(const std::string& s) {
    if (s == "inclusive") return MaskMode::inclusive;
    if (s == "random") return MaskMode::random;
    throw ConfigError("unknown mask mode: " + s);
}

std::string to_string(MaskMode m) {
    return m == MaskMode::inclusive ? "inclusive" : "random";
}

double MaskSchedule::ratio_at(double t01) const {
    if (!(t01 >= 0.0 && t01 <= 1.0)) throw ConfigError("mask ratio queried outside [0,1]");
    // Exact endpoints by definition; cos(pi/2) etc. would otherwise leave fp crumbs.
    if (t01 == 0.0) return 0.0;
    if (t01 == 1.0) return 1.0;
    switch (curve) {
        case MaskCurve::linear: return t01;
        case MaskCurve::one_minus_cos: return 1.0 - std::cos(t01 * kPi / 2.0);
        case MaskCurve::sin_curve: return std::sin(t01 * kPi / 2.0);
        case MaskCurve::one_minus_sqrt: return 1.0 - std::sqrt(1.0 - t01);
        case MaskCurve::sqrt_curve: return std::sqrt(t01);
    }
    throw ConfigError("bad mask curve enum");
}

std::uint64_t MaskSchedule::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    const std::int32_t ids[2] = {static_cast<std::int32_t>(curve), static_cast<std::int32_t>(mode)};
    return fnv1a(h, ids, sizeof(ids));
}

int masked_count(const MaskSchedule& s, int d, double t01) {
    return static_cast<int>(std::floor(s.ratio_at(t01) * d + 0.5));
}

LambdaDecay lambda_decay_from_string(const std::string& s) {
    if (s == "constant") return LambdaDecay::constant;
    if (s == "linear-decay") return LambdaDecay::linear;
    if (s == "cosine-decay") return LambdaDecay::cosine;
    throw ConfigError("unknown lambda schedule: " + s);
}

std::string to_string(LambdaDecay d) {
    switch (d) {
        case LambdaDecay::constant: return "constant";
        case LambdaDecay::linear: return "linear-decay";
        case LambdaDecay::cosine: return "cosine-decay";
    }
    throw ConfigError("bad lambda decay enum");
}

std::pair<double, double> LambdaSchedule::at(double t_norm) const {
    if (!(t_norm >= 0.0 && t_norm <= 1.0)) throw ConfigError("lambda queried outside [0,1]");
    double l1 = lambda1;
    switch (decay) {
        case LambdaDecay::constant: break;
        case LambdaDecay::linear: l1 = lambda1 * (1.0 - t_norm); break;
        case LambdaDecay::cosine: l1 = lambda1 * std::cos(t_norm * kPi / 2.0); break;
    }
    return {l1, lambda2};
}

GaussianDDPMSchedule GaussianDDPMSchedule::linear(int T, double beta1, double betaT) {
    if (T < 1) throw ConfigError("schedule needs T >= 1");
    if (!(beta1 > 0.0 && betaT < 1.0 && beta1 <= betaT)) {
        throw ConfigError("linear beta endpoints out of range");
    }
    GaussianDDPMSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T + 1);
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        s.beta[t - 1] = beta1 + frac * (betaT - beta1);
        s.alpha[t - 1] = 1.0 - s.beta[t - 1];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t - 1];
    }
    return s;
}

std::uint64_t GaussianDDPMSchedule::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    const std::int64_t dims[1] = {T};
    h = fnv1a(h, dims, sizeof(dims));
    return fnv1a_doubles(h, beta);
}

} // namespace dice
