#include "dice/multinomial.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dice {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_step(const DiffusionSchedule& s, int t, bool allow_zero) {
    const int lo = allow_zero ? 0 : 1;
    if (t < lo || t > s.T) {
        throw ConfigError("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) +
                          ", " + std::to_string(s.T) + "]");
    }
}

void check_data_token(const DiffusionSchedule& s, int x0) {
    if (x0 < 0 || x0 >= s.K) {
        throw ConfigError("clean token must be a data token in [0, K); got " + std::to_string(x0));
    }
}

// P(x_t = xt | x_{t-1} = prev) straight from the one-step kernel, no matrix needed.
double step_prob(const DiffusionSchedule& s, int t, int xt, int prev) {
    const int mask = s.K;
    if (prev == mask) return xt == mask ? 1.0 : 0.0;
    if (xt == mask) return s.gamma[t - 1];
    const double b = s.beta(t);
    return xt == prev ? s.alpha[t - 1] + b : b;
}

} // namespace

TransitionMatrix build_Q(const DiffusionSchedule& s, int t) {
    check_step(s, t, false);
    TransitionMatrix q;
    q.n = s.alphabet_size();
    q.m.assign(static_cast<std::size_t>(q.n) * q.n, 0.0);
    for (int col = 0; col < q.n; ++col) {
        for (int row = 0; row < q.n; ++row) {
            q.at(row, col) = step_prob(s, t, row, col);
        }
    }
    return q;
}

std::vector<double> qt_bar_apply(const DiffusionSchedule& s, int t, int x0) {
    check_step(s, t, true);
    check_data_token(s, x0);
    std::vector<double> p(s.alphabet_size());
    for (int xt = 0; xt < s.alphabet_size(); ++xt) p[xt] = qt_bar_prob(s, t, xt, x0);
    return p;
}

double qt_bar_prob(const DiffusionSchedule& s, int t, int xt, int x0) {
    check_step(s, t, true);
    check_data_token(s, x0);
    if (xt < 0 || xt > s.K) throw ConfigError("corrupted token outside alphabet");
    if (xt == s.K) return s.gbar(t);
    const double bb = s.beta_bar(t);
    return xt == x0 ? s.abar(t) + bb : bb;
}

TokenSeq q_sample(const DiffusionSchedule& s, int t, const TokenSeq& x0, std::mt19937_64& rng) {
    check_step(s, t, true);
    validate_tokens(x0);
    if (!x0.vocab.has_mask_token || x0.vocab.k != s.K) {
        throw ConfigError("q_sample: vocab does not match schedule");
    }
    if (t == 0) return x0;

    const int a = s.alphabet_size();
    // Log marginal rows depend only on the clean token; zero-probability states stay -inf
    // so they can never be drawn.
    std::vector<double> row(a);
    TokenSeq out;
    out.vocab = x0.vocab;
    out.tokens.resize(x0.size());
    for (int i = 0; i < x0.size(); ++i) {
        const int c = x0.tokens[i];
        check_data_token(s, c);
        for (int v = 0; v < a; ++v) {
            const double p = qt_bar_prob(s, t, v, c);
            row[v] = (p > 0.0 ? std::log(p) : kNegInf) + gumbel_draw(rng);
        }
        out.tokens[i] = static_cast<std::int32_t>(argmax_row(row.data(), a));
    }
    return out;
}

std::vector<double> posterior_q(const DiffusionSchedule& s, int t, int xt, int x0) {
    check_step(s, t, false);
    check_data_token(s, x0);
    if (xt < 0 || xt > s.K) throw ConfigError("corrupted token outside alphabet");

    const int a = s.alphabet_size();
    const int mask = s.K;
    std::vector<double> num(a);
    double total = 0.0;
    for (int u = 0; u < a; ++u) {
        // One reverse factor and one forward marginal; their product over u telescopes to
        // the step-t marginal, so the normalized vector is the exact posterior.
        const double back = step_prob(s, t, xt, u);
        const double fwd = u == mask ? s.gbar(t - 1)
                                     : (u == x0 ? s.abar(t - 1) + s.beta_bar(t - 1)
                                                : s.beta_bar(t - 1));
        num[u] = back * fwd;
        total += num[u];
    }
    if (!(total > 0.0)) {
        throw NumericError("posterior_q: pair (x_t=" + std::to_string(xt) + ", x0=" +
                           std::to_string(x0) + ") unreachable at t=" + std::to_string(t));
    }
    for (double& v : num) v /= total;
    return num;
}

LogitField inference_posterior(const DiffusionSchedule& s, int t, const TokenSeq& xt,
                               const LogitField& denoiser_logp) {
    check_step(s, t, false);
    validate_tokens(xt);
    const int a = s.alphabet_size();
    if (denoiser_logp.rows != xt.size() || denoiser_logp.cols != a) {
        throw ConfigError("inference_posterior: denoiser field shape mismatch");
    }
    validate_finite(denoiser_logp, "inference_posterior input");

    const double floor = denoiser_logp.floor_value;
    const double mass_tol = 1e-9;
    // Log posterior tables per observed token value, built lazily: log q(u | xt, c) for
    // every clean candidate c. -inf marks unreachable entries.
    std::vector<std::vector<double>> table(a);
    auto table_for = [&](int obs) -> const std::vector<double>& {
        auto& tab = table[obs];
        if (!tab.empty()) return tab;
        tab.assign(static_cast<std::size_t>(s.K) * a, kNegInf);
        for (int c = 0; c < s.K; ++c) {
            const double den = qt_bar_prob(s, t, obs, c);
            if (den <= 0.0) continue; // unreachable pair; caller mass checked below
            const std::vector<double> post = posterior_q(s, t, obs, c);
            for (int u = 0; u < a; ++u) {
                tab[static_cast<std::size_t>(c) * a + u] = post[u] > 0.0 ? std::log(post[u]) : kNegInf;
            }
        }
        return tab;
    };

    LogitField out(xt.size(), a, floor, floor);
    std::vector<double> acc(a);
    for (int i = 0; i < xt.size(); ++i) {
        const double* logp = denoiser_logp.row(i);
        const double row_lse = log_sum_exp(logp, a);
        if (std::abs(row_lse) > mass_tol) {
            throw NumericError("inference_posterior: denoiser row " + std::to_string(i) +
                               " is not normalized");
        }
        if (xt.vocab.has_mask_token && logp[s.K] > floor + mass_tol) {
            throw NumericError("inference_posterior: denoiser puts mass on the mask token");
        }
        const int obs = xt.tokens[i];
        const auto& tab = table_for(obs);
        for (double& v : acc) v = kNegInf;
        for (int c = 0; c < s.K; ++c) {
            const double w = logp[c];
            if (w <= floor) continue; // floor-level weight: treated as zero mass
            if (qt_bar_prob(s, t, obs, c) <= 0.0) {
                throw NumericError("inference_posterior: denoiser mass on clean token " +
                                   std::to_string(c) + " unreachable from x_t at position " +
                                   std::to_string(i));
            }
            const double* lq = tab.data() + static_cast<std::size_t>(c) * a;
            for (int u = 0; u < a; ++u) {
                if (lq[u] == kNegInf) continue;
                const double term = w + lq[u];
                // Incremental logsumexp over at most K terms per predecessor state.
                if (acc[u] == kNegInf) {
                    acc[u] = term;
                } else if (term > acc[u]) {
                    acc[u] = term + std::log1p(std::exp(acc[u] - term));
                } else {
                    acc[u] = acc[u] + std::log1p(std::exp(term - acc[u]));
                }
            }
        }
        const double z = log_sum_exp(acc.data(), a);
        if (!std::isfinite(z)) {
            throw NumericError("inference_posterior: no reachable predecessor at position " +
                               std::to_string(i));
        }
        for (int u = 0; u < a; ++u) {
            out.at(i, u) = std::max(acc[u] - z, floor);
        }
    }
    return out;
}

} // namespace dice
