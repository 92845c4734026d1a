#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dice/core.hpp"
#include "dice/denoiser.hpp"
#include "dice/maskgen.hpp"
#include "dice/multinomial.hpp"
#include "dice/schedules.hpp"

namespace dice {

enum class Family { mgm, multinomial };

Family family_from_string(const std::string& s);
std::string to_string(Family f);

// How the y-side combine treats its two noise terms.
enum class NoiseStrategy { linear, variance_preserving, max_combine };

NoiseStrategy noise_strategy_from_string(const std::string& s);
std::string to_string(NoiseStrategy s);

// How the multinomial editing step reads the clean-token prediction: the full
// distribution (compound posterior; exact replay) or its argmax (point posterior).
enum class X0Reading { distribution, argmax };

X0Reading x0_reading_from_string(const std::string& s);
std::string to_string(X0Reading r);

struct EditParams {
    Condition target;
    double tau = 1.0;
    double lambda1 = 1.0;
    double lambda2 = 0.0;
    LambdaDecay decay = LambdaDecay::constant;
    NoiseStrategy strategy = NoiseStrategy::linear;
    double cfg_scale = 1.0;
    X0Reading x0_reading = X0Reading::distribution;
};

// Throws ConfigError on tau outside (0,1], negative strengths, or a
// variance-preserving pair that does not sum to 1 within 1e-9.
void validate_edit_params(const EditParams& p);

// Combine base logits with a stored residual z and fresh Gumbel noise g.
//   linear:               base + l1*z + l2*g
//   variance_preserving:  base + sqrt(l1)*z + sqrt(l2)*g   (requires l1 + l2 = 1)
//   max_combine:          base + max(l1*z, l2*g) entrywise
LogitField inject_noise(const LogitField& base, const LogitField& z, const GumbelField& g,
                        double l1, double l2, NoiseStrategy strategy);

struct GumbelParams {
    double mu = 0.0;
    double beta = 1.0;
};

// Parameters of the Gumbel whose first two moments match l1*G1 + l2*G2 for independent
// Gumbel(mu_i, beta_i) draws.
GumbelParams gumbel_moment_match(GumbelParams g1, GumbelParams g2, double l1, double l2);

// Everything needed to replay or steer a recorded inversion. The masked-generation family
// stores the corruption plan plus clean-input logits; the multinomial family stores the
// whole q-sample trajectory. Both store the per-step residual fields.
struct InversionRecord {
    std::uint32_t version = 1;
    Family family = Family::mgm;
    Vocab vocab;
    int D = 0;
    int T = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t schedule_fingerprint = 0;
    int condition = -1;
    double floor = kLogitFloor;

    MaskPlan plan;                        // mgm
    LogitField y0;                        // mgm
    std::vector<std::int32_t> trajectory; // multinomial, (T+1) x D row-major

    std::vector<LogitField> residuals;    // z_t at index t-1

    int alphabet_size() const { return vocab.alphabet_size(); }
    // ceil(tau * T) with a guard against fp spill; always in [1, T].
    int start_step(double tau) const;
    TokenSeq trajectory_at(int t) const;  // multinomial only
};

// Masked-generation inversion: records the plan, the clean-input logits y0 = D(x0, c, 0),
// and residuals z_t = y0 - D(x_t, c, t) for the plan's deterministic corruption states.
// (seed, stream) label the rng that generated the plan; inversion itself draws nothing.
InversionRecord invert_mgm(const TokenSeq& x0, const Denoiser& den, Condition c,
                           const MaskPlan& plan, const MaskSchedule& mask_sched,
                           std::uint64_t seed, std::uint64_t stream);

// Steered masked-generation sampling driven by the record. Reconstruction is the special
// case target = source, lambda1 = 1, lambda2 = 0, tau = 1, cfg_scale = 1.
TokenSeq edit_mgm(const InversionRecord& rec, const Denoiser& den, const EditParams& params,
                  std::uint64_t seed, std::uint64_t stream);

// Multinomial inversion: independent q-samples per step (Gumbel trick), then residuals
// z_t = log_onehot(x_{t-1}) - log pi(x_t, t) against the compound inference posterior.
InversionRecord invert_multinomial(const TokenSeq& x0, const Denoiser& den, Condition c,
                                   const DiffusionSchedule& sched, std::uint64_t seed,
                                   std::uint64_t stream);

// Steered ancestral sampling from the recorded start state. The schedule must match the
// record's fingerprint.
TokenSeq edit_multinomial(const InversionRecord& rec, const Denoiser& den,
                          const DiffusionSchedule& sched, const EditParams& params,
                          std::uint64_t seed, std::uint64_t stream);

// Plain ancestral sampler for the multinomial family, started from x_T.
TokenSeq ancestral_sample(const Denoiser& den, const DiffusionSchedule& sched, Condition c,
                          const TokenSeq& xT, std::mt19937_64& rng);

} // namespace dice
