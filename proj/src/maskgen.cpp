#include "dice/maskgen.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace dice {

NoiseSource noise_source_from_string(const std::string& s) {
    if (s == "mask-token") return NoiseSource::mask_token;
    if (s == "random-token") return NoiseSource::random_token;
    throw ConfigError("unknown noise source: " + s);
}

std::string to_string(NoiseSource n) {
    return n == NoiseSource::mask_token ? "mask-token" : "random-token";
}

int MaskPlan::masked_count_at(int t) const {
    if (t == 0) return 0;
    const std::uint8_t* row = masks.data() + static_cast<std::size_t>(t - 1) * D;
    return static_cast<int>(std::count(row, row + D, std::uint8_t{1}));
}

MaskPlan generate_mask_plan(const MaskSchedule& sched, int d, int T, const Vocab& vocab,
                            NoiseSource source, std::mt19937_64& rng) {
    if (d < 1 || T < 1) throw ConfigError("mask plan needs D >= 1 and T >= 1");
    if (source == NoiseSource::mask_token && !vocab.has_mask_token) {
        throw ConfigError("mask-token noise needs a vocab with a mask token");
    }
    MaskPlan plan;
    plan.D = d;
    plan.T = T;
    plan.source = source;
    plan.mode = sched.mode;
    plan.masks.assign(static_cast<std::size_t>(T) * d, 0);

    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    auto shuffle_prefix = [&](int count) {
        // Partial Fisher-Yates; the first `count` entries become a uniform subset.
        for (int i = 0; i < count; ++i) {
            const int j = i + uniform_below(rng, d - i);
            std::swap(perm[i], perm[j]);
        }
    };

    if (sched.mode == MaskMode::inclusive) {
        shuffle_prefix(d); // one full permutation; prefixes give nested masks
        for (int t = 1; t <= T; ++t) {
            const int count = masked_count(sched, d, static_cast<double>(t) / T);
            std::uint8_t* row = plan.masks.data() + static_cast<std::size_t>(t - 1) * d;
            for (int i = 0; i < count; ++i) row[perm[i]] = 1;
        }
    } else {
        for (int t = 1; t <= T; ++t) {
            const int count = masked_count(sched, d, static_cast<double>(t) / T);
            shuffle_prefix(count);
            std::uint8_t* row = plan.masks.data() + static_cast<std::size_t>(t - 1) * d;
            for (int i = 0; i < count; ++i) row[perm[i]] = 1;
        }
    }

    plan.noise.resize(d);
    for (int i = 0; i < d; ++i) {
        plan.noise[i] = source == NoiseSource::mask_token
                            ? static_cast<std::int32_t>(vocab.mask_id())
                            : static_cast<std::int32_t>(uniform_below(rng, vocab.k));
    }
    return plan;
}

TokenSeq renoise(const TokenSeq& x0hat, const MaskPlan& plan, int t) {
    if (x0hat.size() != plan.D) throw ConfigError("renoise: sequence length mismatch");
    if (t < 0 || t > plan.T) throw ConfigError("renoise: step outside [0, T]");
    TokenSeq out = x0hat;
    for (int i = 0; i < plan.D; ++i) {
        if (plan.masked(t, i)) out.tokens[i] = plan.noise[i];
    }
    return out;
}

TokenSeq mgm_sample(const Denoiser& den, const MaskPlan& plan, Condition c,
                    std::mt19937_64& rng, const TokenSeq* x_init) {
    const Vocab vocab = den.vocab();
    TokenSeq base;
    if (x_init != nullptr) {
        if (x_init->size() != plan.D) throw ConfigError("mgm_sample: x_init length mismatch");
        base = *x_init;
    } else {
        base.vocab = vocab;
        base.tokens = plan.noise;
    }
    TokenSeq xt = renoise(base, plan, plan.T);

    const int a = vocab.alphabet_size();
    const int data_n = vocab.has_mask_token ? vocab.k : a;
    std::vector<double> row(data_n);
    for (int t = plan.T; t >= 1; --t) {
        const LogitField logits = den.evaluate(xt, c, t);
        if (logits.rows != plan.D || logits.cols != a) {
            throw ConfigError("mgm_sample: denoiser field shape mismatch");
        }
        TokenSeq x0hat;
        x0hat.vocab = vocab;
        x0hat.tokens.resize(plan.D);
        for (int i = 0; i < plan.D; ++i) {
            const double* lv = logits.row(i);
            for (int v = 0; v < data_n; ++v) row[v] = lv[v] + gumbel_draw(rng);
            x0hat.tokens[i] = static_cast<std::int32_t>(argmax_row(row.data(), data_n));
        }
        xt = renoise(x0hat, plan, t - 1);
    }
    return xt;
}

} // namespace dice
