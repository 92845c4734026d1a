#include "dice/dice.hpp"

#include <algorithm>
#include <cmath>

#include "dice/denoise.hpp"
#include "dice/error.hpp"

namespace dice {

Family family_from_string(const std::string& s) {
    if (s == "mgm") return Family::mgm;
    if (s == "multinomial") return Family::multinomial;
    throw ConfigError("unknown family: " + s);
}

std::string to_string(Family f) {
    return f == Family::mgm ? "mgm" : "multinomial";
}

NoiseStrategy noise_strategy_from_string(const std::string& s) {
    if (s == "linear") return NoiseStrategy::linear;
    if (s == "variance_preserving") return NoiseStrategy::variance_preserving;
    if (s == "max") return NoiseStrategy::max_combine;
    throw ConfigError("unknown noise strategy: " + s);
}

std::string to_string(NoiseStrategy s) {
    switch (s) {
        case NoiseStrategy::linear: return "linear";
        case NoiseStrategy::variance_preserving: return "variance_preserving";
        default: return "max";
    }
}

X0Reading x0_reading_from_string(const std::string& s) {
    if (s == "distribution") return X0Reading::distribution;
    if (s == "argmax") return X0Reading::argmax;
    throw ConfigError("unknown x0 reading: " + s);
}

std::string to_string(X0Reading r) {
    return r == X0Reading::distribution ? "distribution" : "argmax";
}

void validate_edit_params(const EditParams& p) {
    if (!(p.tau > 0.0) || p.tau > 1.0)
        throw ConfigError("tau must be in (0, 1]");
    if (!(p.lambda1 >= 0.0) || !(p.lambda2 >= 0.0))
        throw ConfigError("lambda strengths must be nonnegative");
    if (p.strategy == NoiseStrategy::variance_preserving &&
        std::abs(p.lambda1 + p.lambda2 - 1.0) > 1e-9)
        throw ConfigError("variance_preserving needs lambda1 + lambda2 = 1");
    if (!(p.cfg_scale >= 0.0) || !std::isfinite(p.cfg_scale))
        throw ConfigError("cfg_scale must be finite and nonnegative");
}

LogitField inject_noise(const LogitField& base, const LogitField& z, const GumbelField& g,
                        double l1, double l2, NoiseStrategy strategy) {
    if (!base.same_shape(z) || base.rows != g.rows || base.cols != g.cols)
        throw ConfigError("inject_noise: shape mismatch");
    if (strategy == NoiseStrategy::variance_preserving &&
        std::abs(l1 + l2 - 1.0) > 1e-9)
        throw ConfigError("variance_preserving needs lambda1 + lambda2 = 1");

    LogitField out(base.rows, base.cols, 0.0, base.floor_value);
    const std::size_t n = base.values.size();
    switch (strategy) {
        case NoiseStrategy::linear:
            for (std::size_t i = 0; i < n; ++i)
                out.values[i] = base.values[i] + l1 * z.values[i] + l2 * g.values[i];
            break;
        case NoiseStrategy::variance_preserving: {
            const double w1 = std::sqrt(l1);
            const double w2 = std::sqrt(l2);
            for (std::size_t i = 0; i < n; ++i)
                out.values[i] = base.values[i] + w1 * z.values[i] + w2 * g.values[i];
            break;
        }
        case NoiseStrategy::max_combine:
            for (std::size_t i = 0; i < n; ++i)
                out.values[i] = base.values[i] + std::max(l1 * z.values[i], l2 * g.values[i]);
            break;
    }
    validate_finite(out, "inject_noise output");
    return out;
}

GumbelParams gumbel_moment_match(GumbelParams g1, GumbelParams g2, double l1, double l2) {
    if (!(g1.beta > 0.0) || !(g2.beta > 0.0))
        throw ConfigError("gumbel_moment_match: scales must be positive");
    if (!(l1 >= 0.0) || !(l2 >= 0.0) || l1 + l2 <= 0.0)
        throw ConfigError("gumbel_moment_match: weights must be nonnegative, not both zero");
    // A zero weight degenerates to a plain rescale; keep those cases exact.
    if (l2 == 0.0) return {l1 * g1.mu, l1 * g1.beta};
    if (l1 == 0.0) return {l2 * g2.mu, l2 * g2.beta};
    const double b1 = l1 * g1.beta;
    const double b2 = l2 * g2.beta;
    const double beta = std::sqrt(b1 * b1 + b2 * b2);
    const double mu = l1 * g1.mu + l2 * g2.mu + kEulerGamma * (b1 + b2 - beta);
    return {mu, beta};
}

int InversionRecord::start_step(double tau) const {
    // Guard against fp spill pushing e.g. 0.7 * 10 past its integer.
    int s = static_cast<int>(std::ceil(tau * T - 1e-9));
    return std::clamp(s, 1, T);
}

TokenSeq InversionRecord::trajectory_at(int t) const {
    if (family != Family::multinomial)
        throw ConfigError("trajectory_at: record has no trajectory");
    if (t < 0 || t > T) throw ConfigError("trajectory_at: step out of range");
    TokenSeq seq;
    seq.vocab = vocab;
    seq.tokens.assign(trajectory.begin() + static_cast<std::size_t>(t) * D,
                      trajectory.begin() + static_cast<std::size_t>(t + 1) * D);
    return seq;
}

namespace {

void require_clean_input(const TokenSeq& x0) {
    validate_tokens(x0);
    for (int tok : x0.tokens)
        if (tok >= x0.vocab.k)
            throw ConfigError("clean input must contain data tokens only");
}

void require_vocab_match(const Vocab& a, const Vocab& b, const char* what) {
    if (!(a == b)) throw ConfigError(std::string(what) + ": vocab mismatch");
}

void require_shape(const LogitField& f, int rows, int cols, const char* what) {
    if (f.rows != rows || f.cols != cols)
        throw ConfigError(std::string(what) + ": denoiser output has wrong shape");
}

// Gumbel field drawn from an already-running stream; (seed, stream) label that stream.
GumbelField next_gumbel_field(std::mt19937_64& rng, int rows, int cols, std::uint64_t seed,
                              std::uint64_t stream) {
    GumbelField g;
    g.rows = rows;
    g.cols = cols;
    g.seed = seed;
    g.stream = stream;
    g.values.resize(static_cast<std::size_t>(rows) * cols);
    for (double& v : g.values) v = gumbel_draw(rng);
    return g;
}

LogitField evaluate_base(const Denoiser& den, const TokenSeq& xt, const EditParams& params,
                         int t, int d, int a) {
    LogitField base = den.evaluate(xt, params.target, t);
    require_shape(base, d, a, "edit");
    if (params.cfg_scale != 1.0) {
        LogitField uncond = den.evaluate(xt, Condition::unconditional(), t);
        require_shape(uncond, d, a, "edit");
        base = cfg_combine(base, uncond, params.cfg_scale);
    }
    return base;
}

} // namespace

InversionRecord invert_mgm(const TokenSeq& x0, const Denoiser& den, Condition c,
                           const MaskPlan& plan, const MaskSchedule& mask_sched,
                           std::uint64_t seed, std::uint64_t stream) {
    require_clean_input(x0);
    require_vocab_match(x0.vocab, den.vocab(), "invert_mgm");
    if (x0.size() != plan.D) throw ConfigError("invert_mgm: plan length mismatch");
    if (plan.T < 1) throw ConfigError("invert_mgm: plan has no steps");

    const int d = plan.D;
    const int a = x0.vocab.alphabet_size();

    InversionRecord rec;
    rec.family = Family::mgm;
    rec.vocab = x0.vocab;
    rec.D = d;
    rec.T = plan.T;
    rec.seed = seed;
    rec.stream = stream;
    rec.schedule_fingerprint = mask_sched.fingerprint();
    rec.condition = c.label;
    rec.plan = plan;

    rec.y0 = den.evaluate(x0, c, 0);
    require_shape(rec.y0, d, a, "invert_mgm");
    validate_finite(rec.y0, "clean-input logits");

    rec.residuals.reserve(static_cast<std::size_t>(plan.T));
    for (int t = 1; t <= plan.T; ++t) {
        TokenSeq xt = renoise(x0, plan, t);
        LogitField yhat = den.evaluate(xt, c, t);
        require_shape(yhat, d, a, "invert_mgm");
        validate_finite(yhat, "step logits");
        LogitField z(d, a, 0.0);
        for (std::size_t i = 0; i < z.values.size(); ++i)
            z.values[i] = rec.y0.values[i] - yhat.values[i];
        rec.residuals.push_back(std::move(z));
    }
    return rec;
}

TokenSeq edit_mgm(const InversionRecord& rec, const Denoiser& den, const EditParams& params,
                  std::uint64_t seed, std::uint64_t stream) {
    if (rec.family != Family::mgm) throw ConfigError("edit_mgm: record is not masked-generation");
    validate_edit_params(params);
    require_vocab_match(rec.vocab, den.vocab(), "edit_mgm");
    if (static_cast<int>(rec.residuals.size()) != rec.T)
        throw ConfigError("edit_mgm: record is missing residual steps");

    const int d = rec.D;
    const int a = rec.alphabet_size();
    const int t_start = rec.start_step(params.tau);

    // Rebuild the recorded clean estimate, then push it to the entry step with the
    // recorded masks and noise so a full-strength replay is bit-exact.
    TokenSeq x0rec = argmax_rows(rec.y0, rec.vocab, /*restrict_to_data=*/true);
    TokenSeq xt = renoise(x0rec, rec.plan, t_start);

    auto rng = make_rng(seed, stream);
    const LambdaSchedule lsched{params.lambda1, params.lambda2, params.decay};

    for (int t = t_start; t >= 1; --t) {
        LogitField base = evaluate_base(den, xt, params, t, d, a);
        auto [l1, l2] = lsched.at(static_cast<double>(t) / rec.T);
        GumbelField g = next_gumbel_field(rng, d, a, seed, stream);
        LogitField y = inject_noise(base, rec.residuals[static_cast<std::size_t>(t) - 1], g,
                                    l1, l2, params.strategy);
        TokenSeq x0hat = argmax_rows(y, rec.vocab, /*restrict_to_data=*/true);
        xt = renoise(x0hat, rec.plan, t - 1);
    }
    return xt;
}

InversionRecord invert_multinomial(const TokenSeq& x0, const Denoiser& den, Condition c,
                                   const DiffusionSchedule& sched, std::uint64_t seed,
                                   std::uint64_t stream) {
    require_clean_input(x0);
    require_vocab_match(x0.vocab, den.vocab(), "invert_multinomial");
    if (!x0.vocab.has_mask_token || x0.vocab.k != sched.K)
        throw ConfigError("invert_multinomial: schedule does not match vocab");
    if (sched.T < 1) throw ConfigError("invert_multinomial: schedule has no steps");

    const int d = x0.size();
    const int a = x0.vocab.alphabet_size();

    InversionRecord rec;
    rec.family = Family::multinomial;
    rec.vocab = x0.vocab;
    rec.D = d;
    rec.T = sched.T;
    rec.seed = seed;
    rec.stream = stream;
    rec.schedule_fingerprint = sched.fingerprint();
    rec.condition = c.label;

    auto rng = make_rng(seed, stream);
    rec.trajectory.resize(static_cast<std::size_t>(sched.T + 1) * d);
    std::copy(x0.tokens.begin(), x0.tokens.end(), rec.trajectory.begin());
    for (int t = 1; t <= sched.T; ++t) {
        TokenSeq xt = q_sample(sched, t, x0, rng);
        std::copy(xt.tokens.begin(), xt.tokens.end(),
                  rec.trajectory.begin() + static_cast<std::size_t>(t) * d);
    }

    rec.residuals.resize(static_cast<std::size_t>(sched.T));
    for (int t = sched.T; t >= 1; --t) {
        TokenSeq xt = rec.trajectory_at(t);
        LogitField logp = den.evaluate(xt, c, t);
        require_shape(logp, d, a, "invert_multinomial");
        LogitField pi = inference_posterior(sched, t, xt, logp);
        LogitField prev = log_onehot(rec.trajectory_at(t - 1), a);
        LogitField z(d, a, 0.0);
        for (std::size_t i = 0; i < z.values.size(); ++i)
            z.values[i] = prev.values[i] - pi.values[i];
        rec.residuals[static_cast<std::size_t>(t) - 1] = std::move(z);
    }
    return rec;
}

TokenSeq edit_multinomial(const InversionRecord& rec, const Denoiser& den,
                          const DiffusionSchedule& sched, const EditParams& params,
                          std::uint64_t seed, std::uint64_t stream) {
    if (rec.family != Family::multinomial)
        throw ConfigError("edit_multinomial: record is not multinomial");
    validate_edit_params(params);
    require_vocab_match(rec.vocab, den.vocab(), "edit_multinomial");
    if (sched.fingerprint() != rec.schedule_fingerprint)
        throw ConfigError("edit_multinomial: schedule does not match the record");
    if (static_cast<int>(rec.residuals.size()) != rec.T)
        throw ConfigError("edit_multinomial: record is missing residual steps");

    const int d = rec.D;
    const int a = rec.alphabet_size();
    const int t_start = rec.start_step(params.tau);

    LogitField y = log_onehot(rec.trajectory_at(t_start), a);
    auto rng = make_rng(seed, stream);
    const LambdaSchedule lsched{params.lambda1, params.lambda2, params.decay};

    for (int t = t_start; t >= 1; --t) {
        TokenSeq xt = argmax_rows(y, rec.vocab, /*restrict_to_data=*/false);
        LogitField logp = evaluate_base(den, xt, params, t, d, a);

        LogitField base;
        if (params.x0_reading == X0Reading::distribution) {
            base = inference_posterior(sched, t, xt, logp);
        } else {
            // Point reading: collapse the clean prediction per position, then take that
            // token's exact one-step posterior.
            base = LogitField(d, a, kLogitFloor);
            TokenSeq x0hat = argmax_rows(logp, rec.vocab, /*restrict_to_data=*/true);
            for (int i = 0; i < d; ++i) {
                std::vector<double> post = posterior_q(sched, t, xt.tokens[i], x0hat.tokens[i]);
                for (int v = 0; v < a; ++v)
                    base.at(i, v) = post[v] > 0.0 ? std::max(std::log(post[v]), kLogitFloor)
                                                  : kLogitFloor;
            }
        }

        auto [l1, l2] = lsched.at(static_cast<double>(t) / rec.T);
        GumbelField g = next_gumbel_field(rng, d, a, seed, stream);
        y = inject_noise(base, rec.residuals[static_cast<std::size_t>(t) - 1], g, l1, l2,
                         params.strategy);
    }
    return argmax_rows(y, rec.vocab, /*restrict_to_data=*/true);
}

TokenSeq ancestral_sample(const Denoiser& den, const DiffusionSchedule& sched, Condition c,
                          const TokenSeq& xT, std::mt19937_64& rng) {
    validate_tokens(xT);
    require_vocab_match(xT.vocab, den.vocab(), "ancestral_sample");
    if (!xT.vocab.has_mask_token || xT.vocab.k != sched.K)
        throw ConfigError("ancestral_sample: schedule does not match vocab");

    const int d = xT.size();
    const int a = xT.vocab.alphabet_size();
    TokenSeq xt = xT;
    for (int t = sched.T; t >= 1; --t) {
        LogitField logp = den.evaluate(xt, c, t);
        require_shape(logp, d, a, "ancestral_sample");
        LogitField pi = inference_posterior(sched, t, xt, logp);
        for (int i = 0; i < d; ++i) {
            std::vector<double> shifted(static_cast<std::size_t>(a));
            const double* row = pi.row(i);
            for (int v = 0; v < a; ++v) shifted[static_cast<std::size_t>(v)] = row[v] + gumbel_draw(rng);
            xt.tokens[i] = argmax_row(shifted.data(), a);
        }
    }
    // Mask mass at t = 0 sits at the floor; the restricted argmax would hide a bug, so
    // report leftover mask tokens instead.
    for (int tok : xt.tokens)
        if (tok >= xt.vocab.k) throw NumericError("ancestral_sample: mask survived to t = 0");
    return xt;
}

} // namespace dice
