#pragma once

#include <vector>

#include "dice/core.hpp"
#include "dice/schedules.hpp"

namespace dice {

// One-step transition matrix Q_t, dense (K+1) x (K+1), column-stochastic: column j is the
// distribution of x_t given x_{t-1} = j. The mask state (id K) is absorbing.
struct TransitionMatrix {
    int n = 0;
    std::vector<double> m; // row-major

    double at(int row, int col) const { return m[static_cast<std::size_t>(row) * n + col]; }
    double& at(int row, int col) { return m[static_cast<std::size_t>(row) * n + col]; }
};

TransitionMatrix build_Q(const DiffusionSchedule& s, int t);

// Marginal q(x_t | x0) for a single data token, via the closed-form cumulative:
// alpha_bar at x0, beta_bar on other data tokens, gamma_bar on the mask state.
// t may be 0 (identity). x0 must be a data token.
std::vector<double> qt_bar_apply(const DiffusionSchedule& s, int t, int x0);

// Same quantity as a scalar lookup, q(x_t = xt | x0), without building the vector.
double qt_bar_prob(const DiffusionSchedule& s, int t, int xt, int x0);

// Draw x_t ~ q(x_t | x0) independently per position via log-probs + Gumbel + argmax.
// t = 0 returns x0 unchanged.
TokenSeq q_sample(const DiffusionSchedule& s, int t, const TokenSeq& x0, std::mt19937_64& rng);

// Exact one-step posterior q(x_{t-1} | x_t, x0) over all K+1 predecessor states, returned
// as probabilities. Throws NumericError when (x_t, x0) is unreachable at t.
std::vector<double> posterior_q(const DiffusionSchedule& s, int t, int xt, int x0);

// Compound posterior: mixes posterior_q over the denoiser's clean-token distribution,
// per position, entirely in log space. denoiser_logp rows must exp-normalize to 1 and put
// no real mass on the mask column. Returns a log-normalized field over predecessor states.
LogitField inference_posterior(const DiffusionSchedule& s, int t, const TokenSeq& xt,
                               const LogitField& denoiser_logp);

} // namespace dice
