#include "dice/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <unordered_map>

#include "dice/denoise.hpp"
#include "dice/error.hpp"
#include "dice/multinomial.hpp"

namespace dice {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void check_mi_args(const GaussianDDPMSchedule& s, int D, int t) {
    if (D < 1) throw ConfigError("mi: dimension must be positive");
    if (t < 1 || t > s.T) throw ConfigError("mi: step out of range");
}

// Signal and noise variances of z_t = x'_{t-1} - sqrt(alpha_t) x_t given x0 ~ N(0,1):
// the x0 coefficient collapses to beta_t sqrt(abar(t-1)).
struct ZDecomp {
    double signal_sd; // coefficient on x0
    double noise_var; // variance of the residual part
};

ZDecomp z_decomposition(const GaussianDDPMSchedule& s, int t) {
    const double beta = s.beta[static_cast<std::size_t>(t) - 1];
    const double alpha = s.alpha[static_cast<std::size_t>(t) - 1];
    const double a_prev = s.abar(t - 1);
    return {beta * std::sqrt(a_prev), 1.0 - a_prev + alpha * (1.0 - s.abar(t))};
}

double normal_draw(std::mt19937_64& rng) {
    const double u1 = std::max(uniform01(rng), kUniformEps);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

} // namespace

double mi_closed_form(const GaussianDDPMSchedule& s, int D, int t) {
    check_mi_args(s, D, t);
    const double beta = s.beta[static_cast<std::size_t>(t) - 1];
    const double a_prev = s.abar(t - 1);
    const double v = 1.0 - a_prev + s.alpha[static_cast<std::size_t>(t) - 1] * (1.0 - s.abar(t));
    if (!(v > 0.0)) throw NumericError("mi: degenerate noise variance");
    return 0.5 * D * std::log((beta * beta * a_prev + v) / v);
}

double mi_gaussian_corr(const GaussianDDPMSchedule& s, int D, int t) {
    check_mi_args(s, D, t);
    const ZDecomp d = z_decomposition(s, t);
    const double var_x0 = 1.0;
    const double cov = d.signal_sd * var_x0;
    const double var_z = d.signal_sd * d.signal_sd * var_x0 + d.noise_var;
    if (!(var_z > 0.0)) throw NumericError("mi: degenerate noise variance");
    const double rho2 = cov * cov / (var_x0 * var_z);
    return -0.5 * D * std::log1p(-rho2);
}

MICurve mi_curve(const GaussianDDPMSchedule& s, int D) {
    MICurve c;
    c.D = D;
    c.schedule_fingerprint = s.fingerprint();
    c.mi_nats.reserve(static_cast<std::size_t>(s.T));
    for (int t = 1; t <= s.T; ++t) c.mi_nats.push_back(mi_closed_form(s, D, t));
    return c;
}

double mi_monte_carlo(const GaussianDDPMSchedule& s, int D, int t, int n,
                      std::mt19937_64& rng) {
    check_mi_args(s, D, t);
    if (n < 100000) throw ConfigError("mi_monte_carlo: needs at least 1e5 samples");

    const double sa_prev = std::sqrt(s.abar(t - 1));
    const double na_prev = std::sqrt(1.0 - s.abar(t - 1));
    const double sa = std::sqrt(s.abar(t));
    const double na = std::sqrt(1.0 - s.abar(t));
    const double salpha = std::sqrt(s.alpha[static_cast<std::size_t>(t) - 1]);

    double sx = 0.0, sz = 0.0, sxx = 0.0, szz = 0.0, sxz = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x0 = normal_draw(rng);
        const double x_prev = sa_prev * x0 + na_prev * normal_draw(rng);
        const double x_t = sa * x0 + na * normal_draw(rng);
        const double z = x_prev - salpha * x_t;
        sx += x0;
        sz += z;
        sxx += x0 * x0;
        szz += z * z;
        sxz += x0 * z;
    }
    const double inv = 1.0 / n;
    const double var_x = sxx * inv - sx * inv * sx * inv;
    const double var_z = szz * inv - sz * inv * sz * inv;
    const double cov = sxz * inv - sx * inv * sz * inv;
    if (!(var_x > 0.0) || !(var_z > 0.0))
        throw NumericError("mi_monte_carlo: degenerate sample variance");
    const double rho2 = cov * cov / (var_x * var_z);
    if (!(rho2 < 1.0)) throw NumericError("mi_monte_carlo: degenerate correlation");
    return -0.5 * D * std::log1p(-rho2);
}

double plug_in_mi(const std::vector<int>& x_atoms, const std::vector<int>& s_atoms) {
    if (x_atoms.empty() || x_atoms.size() != s_atoms.size())
        throw ConfigError("plug_in_mi: atom streams must be paired and nonempty");
    std::unordered_map<std::uint64_t, int> joint;
    std::unordered_map<int, int> mx, ms;
    for (std::size_t i = 0; i < x_atoms.size(); ++i) {
        const std::uint64_t key =
            (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x_atoms[i])) << 32) |
            static_cast<std::uint32_t>(s_atoms[i]);
        ++joint[key];
        ++mx[x_atoms[i]];
        ++ms[s_atoms[i]];
    }
    const double n = static_cast<double>(x_atoms.size());
    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        const int x = static_cast<int>(key >> 32);
        const int s = static_cast<int>(key & 0xffffffffu);
        mi += (c / n) * std::log(c * n / (static_cast<double>(mx[x]) * ms[s]));
    }
    return mi;
}

MiProbeResult discrete_latent_mi_probe(const Fixture& f, const DiffusionSchedule& sched,
                                       int t, int n, std::mt19937_64& rng, bool shuffle_z) {
    if (t < 1 || t > sched.T) throw ConfigError("mi probe: step out of range");
    if (n < 100000) throw ConfigError("mi probe: needs at least 1e5 samples");
    if (!f.vocab.has_mask_token || f.vocab.k != sched.K)
        throw ConfigError("mi probe: fixture vocab does not match schedule");
    const int k = f.vocab.k;
    const int a = f.vocab.alphabet_size();
    const int d = f.d;
    if (std::pow(static_cast<double>(k), d) > 1e4 + 0.5)
        throw ConfigError("mi probe: clean atom space exceeds 1e4");
    if (std::pow(static_cast<double>(a), d) >= 2147483647.0)
        throw ConfigError("mi probe: summary atom space overflows");

    std::unique_ptr<Denoiser> den = f.type == FixtureType::template_mixture
                                        ? make_template_denoiser_multinomial(f, sched)
                                        : make_markov_denoiser(f, sched);

    std::vector<double> prior_cum;
    prior_cum.reserve(f.conditions.size());
    double acc = 0.0;
    for (const ConditionModel& c : f.conditions) {
        acc += c.prior;
        prior_cum.push_back(acc);
    }

    std::vector<int> xs, ss;
    xs.reserve(static_cast<std::size_t>(n));
    ss.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = uniform01(rng) * acc;
        std::size_t ci = 0;
        while (ci + 1 < prior_cum.size() && u >= prior_cum[ci]) ++ci;
        const int label = f.conditions[ci].label;

        TokenSeq x0 = sample_from(f, label, rng);
        TokenSeq xt = q_sample(sched, t, x0, rng);
        TokenSeq x_prev = q_sample(sched, t - 1, x0, rng);

        LogitField logp = den->evaluate(xt, Condition{label}, t);
        LogitField pi = inference_posterior(sched, t, xt, logp);
        LogitField z = log_onehot(x_prev, a);
        for (std::size_t j = 0; j < z.values.size(); ++j) z.values[j] -= pi.values[j];

        int x_atom = 0, s_atom = 0;
        for (int p = 0; p < d; ++p) {
            x_atom = x_atom * k + x0.tokens[p];
            s_atom = s_atom * a + argmax_row(z.row(p), a);
        }
        xs.push_back(x_atom);
        ss.push_back(s_atom);
    }

    if (shuffle_z && n > 1) std::rotate(ss.begin(), ss.begin() + 1, ss.end());

    MiProbeResult out;
    out.mi_nats = plug_in_mi(xs, ss);
    std::unordered_map<int, int> ux, us;
    for (int v : xs) ++ux[v];
    for (int v : ss) ++us[v];
    out.x_cells = static_cast<int>(ux.size());
    out.s_cells = static_cast<int>(us.size());
    out.undersampled = static_cast<double>(n) < 5.0 * out.x_cells * out.s_cells;
    return out;
}

EditMetrics compute_edit_metrics(const TokenSeq& x0, const TokenSeq& x_edit, const Fixture& f,
                                 int source_label, int target_label, double eta) {
    if (x0.size() != x_edit.size() || !(x0.vocab == x_edit.vocab))
        throw ConfigError("edit metrics: sequences are not comparable");
    if (x0.size() == 0) throw ConfigError("edit metrics: empty sequences");
    EditMetrics m;
    int equal = 0;
    for (int i = 0; i < x0.size(); ++i)
        if (x0.tokens[i] == x_edit.tokens[i]) ++equal;
    m.hamming_similarity = static_cast<double>(equal) / x0.size();
    m.token_accuracy = equal == x0.size() ? 1.0 : 0.0;
    m.edit_success = classify_prefers(f, x_edit, source_label, target_label, eta) ? 1.0 : 0.0;
    return m;
}

} // namespace dice
