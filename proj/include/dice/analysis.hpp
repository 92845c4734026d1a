#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dice/core.hpp"
#include "dice/fixture.hpp"
#include "dice/schedules.hpp"

namespace dice {

// How much of the clean signal the step-t residual carries, for the scalar Gaussian
// process: I(z_t; x0) in nats with z_t = x'_{t-1} - sqrt(alpha_t) x_t for independent
// marginal draws x'_{t-1}, x_t given x0 ~ N(0, 1).
// Closed form: (D/2) log((b^2 A + V) / V), b = beta_t, A = abar(t-1),
// V = 1 - abar(t-1) + alpha_t (1 - abar(t)). Defined for 1 <= t <= T (abar(0) = 1).
double mi_closed_form(const GaussianDDPMSchedule& s, int D, int t);

// Same quantity through the correlation route: build Var(x0), Var(z), Cov(z, x0)
// explicitly and return -(D/2) log1p(-rho^2). Agrees with the closed form to fp noise;
// kept as a second derivation, not a shared refactor.
double mi_gaussian_corr(const GaussianDDPMSchedule& s, int D, int t);

struct MICurve {
    int D = 1;
    std::uint64_t schedule_fingerprint = 0;
    std::vector<double> mi_nats; // index t-1 for t = 1..T
};

MICurve mi_curve(const GaussianDDPMSchedule& s, int D = 1);

// Monte-Carlo estimate from n simulated (x0, z_t) pairs and the Gaussian identity
// -(D/2) log(1 - rho_hat^2). Normals come from Box-Muller over the shared uniform
// source, so results are platform-stable. n < 1e5 -> ConfigError; a degenerate sample
// (zero variance) -> NumericError.
double mi_monte_carlo(const GaussianDDPMSchedule& s, int D, int t, int n,
                      std::mt19937_64& rng);

// Plug-in mutual information between two paired atom streams, in nats.
double plug_in_mi(const std::vector<int>& x_atoms, const std::vector<int>& s_atoms);

struct MiProbeResult {
    double mi_nats = 0.0;
    int x_cells = 0;       // distinct clean atoms observed
    int s_cells = 0;       // distinct summary atoms observed
    bool undersampled = false; // n < 5 * x_cells * s_cells
};

// Discrete analog of the Gaussian analysis: sample x0 from the fixture, q-sample a step-t
// state, run the denoiser + compound posterior, form z_t against the one-hot previous
// state, and summarize z_t by its per-position argmax. Reports plug-in MI between the
// clean sequence atom and the summary atom over n draws. shuffle_z pairs each clean
// sequence with the summary from the next draw, which breaks the dependence and should
// drive the estimate to the plug-in bias floor.
// Requires K^D <= 1e4 (atom histogram stays dense enough) and n >= 1e5.
MiProbeResult discrete_latent_mi_probe(const Fixture& f, const DiffusionSchedule& sched,
                                       int t, int n, std::mt19937_64& rng,
                                       bool shuffle_z = false);

struct EditMetrics {
    double token_accuracy = 0.0;       // exact-match indicator
    double hamming_similarity = 0.0;   // fraction of equal positions
    double edit_success = 0.0;         // classifier prefers the target condition
    double preservation_baseline = 0.0; // same hamming at lambda1 = 0; filled by sweeps
};

// Per-pair metrics. edit_success asks the exact fixture classifier whether x_edit looks
// more like target than source (smoothing eta keeps off-template sequences scorable).
EditMetrics compute_edit_metrics(const TokenSeq& x0, const TokenSeq& x_edit, const Fixture& f,
                                 int source_label, int target_label, double eta);

} // namespace dice
