#include "dice/denoise.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dice {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Mixes template one-hots with posterior template weights into a per-position field.
// Weights arrive as unnormalized log scores; -inf entries are dead templates.
LogitField mix_templates(const std::vector<const WeightedTemplate*>& templates,
                         std::vector<double> log_scores, int d, const Vocab& vocab) {
    const int n = static_cast<int>(templates.size());
    const double z = log_sum_exp(log_scores.data(), n);
    if (!std::isfinite(z)) {
        throw NumericError("template denoiser: input is inconsistent with every template");
    }
    std::vector<double> w(n);
    for (int m = 0; m < n; ++m) w[m] = std::exp(log_scores[m] - z);

    const int a = vocab.alphabet_size();
    LogitField out(d, a, kLogitFloor);
    std::vector<double> acc(a);
    for (int i = 0; i < d; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int m = 0; m < n; ++m) acc[templates[m]->tokens[i]] += w[m];
        for (int v = 0; v < a; ++v) {
            if (acc[v] > 0.0) out.at(i, v) = std::max(std::log(acc[v]), kLogitFloor);
        }
    }
    return out;
}

// Shared template-denoiser skeleton; subclasses provide the per-position emission
// log p(observed | clean, t).
class TemplateDenoiserBase : public Denoiser {
  public:
    explicit TemplateDenoiserBase(const Fixture& f) : fixture_(f) {
        if (f.type != FixtureType::template_mixture) {
            throw ConfigError("template denoiser needs a template-mixture fixture");
        }
    }

    Vocab vocab() const override { return fixture_.vocab; }

    LogitField evaluate(const TokenSeq& xt, Condition c, int t) const override {
        if (xt.size() != fixture_.d) throw ConfigError("denoiser: sequence length mismatch");
        validate_tokens(xt);
        check_step(t);

        std::vector<const WeightedTemplate*> templates;
        std::vector<double> scores;
        auto add_condition = [&](const ConditionModel& cm, double log_prior) {
            for (const auto& tmpl : cm.templates) {
                double s = log_prior + std::log(tmpl.weight);
                for (int i = 0; i < fixture_.d && s != kNegInf; ++i) {
                    s += emission_log_prob(xt.tokens[i], tmpl.tokens[i], t, i);
                }
                templates.push_back(&tmpl);
                scores.push_back(s);
            }
        };
        if (c.is_unconditional()) {
            for (const auto& cm : fixture_.conditions) add_condition(cm, std::log(cm.prior));
        } else {
            add_condition(fixture_.condition(c.label), 0.0);
        }
        return mix_templates(templates, std::move(scores), fixture_.d, fixture_.vocab);
    }

  protected:
    virtual double emission_log_prob(int observed, int clean, int t, int pos) const = 0;
    virtual void check_step(int t) const = 0;

    const Fixture& fixture_;
};

class PlanAwareTemplateDenoiser final : public TemplateDenoiserBase {
  public:
    PlanAwareTemplateDenoiser(const Fixture& f, const MaskPlan& plan)
        : TemplateDenoiserBase(f), plan_(plan) {
        if (plan.D != f.d) throw ConfigError("plan length does not match fixture");
    }

  protected:
    // Mismatches score the floor rather than -inf: a steered edit can place tokens no
    // template predicted, and the posterior must stay defined (it collapses onto the
    // least-contradicted templates, e^-70 per extra mismatch). Consistent inputs are
    // unaffected; the floor-sized crumbs vanish below double precision.
    double emission_log_prob(int observed, int clean, int t, int pos) const override {
        if (plan_.masked(t, pos)) return 0.0; // hidden: carries no evidence
        return observed == clean ? 0.0 : kLogitFloor;
    }
    void check_step(int t) const override {
        if (t < 0 || t > plan_.T) throw ConfigError("denoiser step outside [0, T]");
    }

  private:
    const MaskPlan& plan_;
};

class MarginalTemplateDenoiser final : public TemplateDenoiserBase {
  public:
    MarginalTemplateDenoiser(const Fixture& f, const MaskSchedule& sched, int T, NoiseSource src)
        : TemplateDenoiserBase(f), sched_(sched), T_(T), source_(src) {
        if (T < 1) throw ConfigError("denoiser needs T >= 1");
        if (src == NoiseSource::mask_token && !f.vocab.has_mask_token) {
            throw ConfigError("mask-token noise needs a vocab with a mask token");
        }
    }

  protected:
    // Impossible observations score the floor, same convention as the plan-aware form.
    double emission_log_prob(int observed, int clean, int t, int) const override {
        const double rho = sched_.ratio_at(static_cast<double>(t) / T_);
        if (source_ == NoiseSource::mask_token) {
            if (observed == fixture_.vocab.mask_id())
                return rho > 0.0 ? std::max(std::log(rho), kLogitFloor) : kLogitFloor;
            if (observed != clean) return kLogitFloor;
            return rho < 1.0 ? std::max(std::log1p(-rho), kLogitFloor) : kLogitFloor;
        }
        // Random-token noise: the observation may be surviving signal or a noise draw
        // that happens to look clean, so the hit probability mixes both routes.
        const double p = (observed == clean ? 1.0 - rho : 0.0) + rho / fixture_.vocab.k;
        return p > 0.0 ? std::max(std::log(p), kLogitFloor) : kLogitFloor;
    }
    void check_step(int t) const override {
        if (t < 0 || t > T_) throw ConfigError("denoiser step outside [0, T]");
    }

  private:
    const MaskSchedule& sched_;
    int T_;
    NoiseSource source_;
};

class MultinomialTemplateDenoiser final : public TemplateDenoiserBase {
  public:
    MultinomialTemplateDenoiser(const Fixture& f, const DiffusionSchedule& s)
        : TemplateDenoiserBase(f), sched_(s) {
        if (!f.vocab.has_mask_token || f.vocab.k != s.K) {
            throw ConfigError("fixture vocab does not match diffusion schedule");
        }
    }

  protected:
    double emission_log_prob(int observed, int clean, int t, int) const override {
        const double p = qt_bar_prob(sched_, t, observed, clean);
        return p > 0.0 ? std::max(std::log(p), kLogitFloor) : kLogitFloor;
    }
    void check_step(int t) const override {
        if (t < 0 || t > sched_.T) throw ConfigError("denoiser step outside [0, T]");
    }

  private:
    const DiffusionSchedule& sched_;
};

class MarkovDenoiser final : public Denoiser {
  public:
    MarkovDenoiser(const Fixture& f, const DiffusionSchedule& s) : fixture_(f), sched_(s) {
        if (f.type != FixtureType::markov) throw ConfigError("markov denoiser needs a markov fixture");
        if (!f.vocab.has_mask_token || f.vocab.k != s.K) {
            throw ConfigError("fixture vocab does not match diffusion schedule");
        }
    }

    Vocab vocab() const override { return fixture_.vocab; }

    LogitField evaluate(const TokenSeq& xt, Condition c, int t) const override {
        if (xt.size() != fixture_.d) throw ConfigError("denoiser: sequence length mismatch");
        validate_tokens(xt);
        if (t < 0 || t > sched_.T) throw ConfigError("denoiser step outside [0, T]");

        const int d = fixture_.d, k = fixture_.vocab.k;
        // Emissions shared by all conditions: log q(x_t[i] | x0[i] = s), floored so the
        // chain posterior stays defined on states the kernel cannot reach.
        std::vector<double> em(static_cast<std::size_t>(d) * k);
        for (int i = 0; i < d; ++i) {
            for (int s = 0; s < k; ++s) {
                const double p = qt_bar_prob(sched_, t, xt.tokens[i], s);
                em[static_cast<std::size_t>(i) * k + s] =
                    p > 0.0 ? std::max(std::log(p), kLogitFloor) : kLogitFloor;
            }
        }

        std::vector<const ConditionModel*> models;
        if (c.is_unconditional()) {
            for (const auto& cm : fixture_.conditions) models.push_back(&cm);
        } else {
            models.push_back(&fixture_.condition(c.label));
        }

        const int a = fixture_.vocab.alphabet_size();
        std::vector<double> mixed(static_cast<std::size_t>(d) * k, 0.0);
        std::vector<double> cond_scores;
        std::vector<std::vector<double>> cond_marginals;
        for (const auto* cm : models) {
            double logz = 0.0;
            auto marg = forward_backward(*cm, em, d, k, &logz);
            cond_scores.push_back(std::log(c.is_unconditional() ? cm->prior : 1.0) + logz);
            cond_marginals.push_back(std::move(marg));
        }
        const double z = log_sum_exp(cond_scores.data(), static_cast<int>(cond_scores.size()));
        if (!std::isfinite(z)) {
            throw NumericError("markov denoiser: input has zero likelihood under every condition");
        }
        for (std::size_t m = 0; m < cond_marginals.size(); ++m) {
            const double w = std::exp(cond_scores[m] - z);
            for (std::size_t idx = 0; idx < mixed.size(); ++idx) {
                mixed[idx] += w * cond_marginals[m][idx];
            }
        }

        LogitField out(d, a, kLogitFloor);
        for (int i = 0; i < d; ++i) {
            for (int s = 0; s < k; ++s) {
                const double p = mixed[static_cast<std::size_t>(i) * k + s];
                if (p > 0.0) out.at(i, s) = std::max(std::log(p), kLogitFloor);
            }
        }
        return out;
    }

  private:
    // Exact smoothing marginals p(x0[i] = s | evidence) in probability space, with the
    // chain likelihood returned through logz. Log-space recursions keep long chains stable.
    static std::vector<double> forward_backward(const ConditionModel& cm,
                                                const std::vector<double>& em, int d, int k,
                                                double* logz) {
        std::vector<double> fwd(static_cast<std::size_t>(d) * k, kNegInf);
        std::vector<double> bwd(static_cast<std::size_t>(d) * k, kNegInf);
        std::vector<double> tmp(k);
        for (int s = 0; s < k; ++s) {
            const double p0 = cm.chain.initial[s];
            fwd[s] = (p0 > 0.0 ? std::log(p0) : kNegInf) + em[s];
        }
        for (int i = 1; i < d; ++i) {
            for (int s = 0; s < k; ++s) {
                for (int u = 0; u < k; ++u) {
                    const double tr = cm.chain.trans(u, s, k);
                    tmp[u] = fwd[static_cast<std::size_t>(i - 1) * k + u] +
                             (tr > 0.0 ? std::log(tr) : kNegInf);
                }
                fwd[static_cast<std::size_t>(i) * k + s] =
                    log_sum_exp(tmp.data(), k) + em[static_cast<std::size_t>(i) * k + s];
            }
        }
        for (int s = 0; s < k; ++s) bwd[static_cast<std::size_t>(d - 1) * k + s] = 0.0;
        for (int i = d - 2; i >= 0; --i) {
            for (int s = 0; s < k; ++s) {
                for (int u = 0; u < k; ++u) {
                    const double tr = cm.chain.trans(s, u, k);
                    tmp[u] = (tr > 0.0 ? std::log(tr) : kNegInf) +
                             em[static_cast<std::size_t>(i + 1) * k + u] +
                             bwd[static_cast<std::size_t>(i + 1) * k + u];
                }
                bwd[static_cast<std::size_t>(i) * k + s] = log_sum_exp(tmp.data(), k);
            }
        }
        *logz = log_sum_exp(fwd.data() + static_cast<std::size_t>(d - 1) * k, k);
        if (!std::isfinite(*logz)) {
            throw NumericError("markov denoiser: zero-likelihood evidence");
        }
        std::vector<double> marg(static_cast<std::size_t>(d) * k, 0.0);
        for (int i = 0; i < d; ++i) {
            for (int s = 0; s < k; ++s) {
                const std::size_t idx = static_cast<std::size_t>(i) * k + s;
                const double lp = fwd[idx] + bwd[idx] - *logz;
                marg[idx] = lp == kNegInf ? 0.0 : std::exp(lp);
            }
        }
        return marg;
    }

    const Fixture& fixture_;
    const DiffusionSchedule& sched_;
};

} // namespace

std::unique_ptr<Denoiser> make_template_denoiser_plan_aware(const Fixture& f, const MaskPlan& plan) {
    auto den = std::make_unique<PlanAwareTemplateDenoiser>(f, plan);
    validate_determinism(*den, f.d, plan.T);
    return den;
}

std::unique_ptr<Denoiser> make_template_denoiser_marginal(const Fixture& f,
                                                          const MaskSchedule& sched, int T,
                                                          NoiseSource source) {
    auto den = std::make_unique<MarginalTemplateDenoiser>(f, sched, T, source);
    validate_determinism(*den, f.d, T);
    return den;
}

std::unique_ptr<Denoiser> make_template_denoiser_multinomial(const Fixture& f,
                                                             const DiffusionSchedule& sched) {
    auto den = std::make_unique<MultinomialTemplateDenoiser>(f, sched);
    validate_determinism(*den, f.d, sched.T);
    return den;
}

std::unique_ptr<Denoiser> make_markov_denoiser(const Fixture& f, const DiffusionSchedule& sched) {
    auto den = std::make_unique<MarkovDenoiser>(f, sched);
    validate_determinism(*den, f.d, sched.T);
    return den;
}

LogitField cfg_combine(const LogitField& cond, const LogitField& uncond, double scale) {
    if (!cond.same_shape(uncond)) throw ConfigError("cfg_combine: shape mismatch");
    validate_finite(cond, "cfg_combine cond");
    validate_finite(uncond, "cfg_combine uncond");
    LogitField out = cond;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = uncond.values[i] + scale * (cond.values[i] - uncond.values[i]);
    }
    return log_normalize(out);
}

void validate_determinism(const Denoiser& den, int d, int T) {
    const Vocab vocab = den.vocab();
    // Two probes: a cycling data-token sequence at t just above 0, and (when a mask token
    // exists) the fully-masked input at t = T.
    TokenSeq cyc;
    cyc.vocab = vocab;
    cyc.tokens.resize(d);
    for (int i = 0; i < d; ++i) cyc.tokens[i] = static_cast<std::int32_t>(i % vocab.k);
    std::vector<std::pair<TokenSeq, int>> probes;
    probes.emplace_back(cyc, 0);
    if (vocab.has_mask_token) {
        TokenSeq masked;
        masked.vocab = vocab;
        masked.tokens.assign(d, static_cast<std::int32_t>(vocab.mask_id()));
        probes.emplace_back(std::move(masked), T);
    }
    for (const auto& [probe, t] : probes) {
        LogitField a, b;
        try {
            a = den.evaluate(probe, Condition::unconditional(), t);
            b = den.evaluate(probe, Condition::unconditional(), t);
        } catch (const NumericError&) {
            continue; // probe off-support for this model; purity is vetted by the other probe
        }
        if (a.values != b.values) {
            throw ConfigError("denoiser is not deterministic: repeated evaluation differs");
        }
    }
}

} // namespace dice
