#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dice/error.hpp"

namespace dice {

// Corruption schedule for the categorical forward process over K data tokens plus a mask
// state. Per step t (1-based): alpha_t keep mass, gamma_t mask mass, and the remaining
// (1 - alpha_t - gamma_t) spread uniformly over the K data tokens.
struct DiffusionSchedule {
    int T = 0;
    int K = 0;
    std::vector<double> alpha;  // [T], alpha[t-1] = alpha_t
    std::vector<double> gamma;  // [T]
    // Cumulatives indexed 0..T with identity at 0. prod_keep[t] = prod(1 - gamma_i) is kept
    // alongside gamma_bar to avoid cancellation when gammas are tiny.
    std::vector<double> alpha_bar;
    std::vector<double> gamma_bar;
    std::vector<double> prod_keep;

    double beta(int t) const;       // per-step uniform replace mass, (1 - a - g)/K
    double beta_bar(int t) const;   // cumulative replace mass, (prod_keep - alpha_bar)/K
    double abar(int t) const { return alpha_bar.at(t); }
    double gbar(int t) const { return gamma_bar.at(t); }
    int alphabet_size() const { return K + 1; }
    std::uint64_t fingerprint() const;
};

enum class SchedulePreset { mask_only, mask_and_replace };

SchedulePreset schedule_preset_from_string(const std::string& s);
std::string to_string(SchedulePreset p);

DiffusionSchedule make_vq_schedule(int T, int K, SchedulePreset preset);
// Explicit per-step arrays; validates ranges and alpha_t + gamma_t <= 1.
DiffusionSchedule make_vq_schedule(int T, int K, std::vector<double> alpha,
                                   std::vector<double> gamma);

// Fraction-of-positions-masked curve r: [0,1] -> [0,1], r(0)=0, r(1)=1, nondecreasing.
enum class MaskCurve { linear, one_minus_cos, sin_curve, one_minus_sqrt, sqrt_curve };
// Inclusive masking nests the masked sets across steps; random draws each step fresh.
enum class MaskMode { inclusive, random };

MaskCurve mask_curve_from_string(const std::string& s);
std::string to_string(MaskCurve c);
MaskMode mask_mode_from_string(const std::string& s);
std::string to_string(MaskMode m);

struct MaskSchedule {
    MaskCurve curve = MaskCurve::linear;
    MaskMode mode = MaskMode::inclusive;

    double ratio_at(double t01) const; // throws ConfigError outside [0,1]
    std::uint64_t fingerprint() const;
};

// Number of masked positions at normalized time t01; round half toward more masking.
int masked_count(const MaskSchedule& s, int d, double t01);

// Strength schedule for the editing loop. Decay applies to the residual weight only;
// the Gumbel weight stays fixed.
enum class LambdaDecay { constant, linear, cosine };

LambdaDecay lambda_decay_from_string(const std::string& s);
std::string to_string(LambdaDecay d);

struct LambdaSchedule {
    double lambda1 = 1.0;
    double lambda2 = 0.0;
    LambdaDecay decay = LambdaDecay::constant;

    // t_norm in [0,1]; returns (lambda1(t_norm), lambda2).
    std::pair<double, double> at(double t_norm) const;
};

// Scalar Gaussian diffusion schedule used by the mutual-information analysis.
struct GaussianDDPMSchedule {
    int T = 0;
    std::vector<double> beta;       // [T]
    std::vector<double> alpha;      // [T], 1 - beta
    std::vector<double> alpha_bar;  // [0..T], alpha_bar[0] = 1

    static GaussianDDPMSchedule linear(int T, double beta1 = 1e-4, double betaT = 2e-2);
    double abar(int t) const { return alpha_bar.at(t); }
    std::uint64_t fingerprint() const;
};

} // namespace dice
