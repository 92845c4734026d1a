#pragma once

#include <cstdint>
#include <vector>

#include "dice/core.hpp"
#include "dice/denoiser.hpp"
#include "dice/schedules.hpp"

namespace dice {

// Replacement source for masked positions: a dedicated mask token, or a random data
// token drawn once and reused across all steps.
enum class NoiseSource { mask_token, random_token };

NoiseSource noise_source_from_string(const std::string& s);
std::string to_string(NoiseSource n);

// Frozen corruption plan for a masked-generation run: which positions are hidden at each
// step plus the noise map that fills them. Step masks are rows 1..T; step 0 is empty.
struct MaskPlan {
    int D = 0;
    int T = 0;
    NoiseSource source = NoiseSource::mask_token;
    MaskMode mode = MaskMode::inclusive;
    std::vector<std::uint8_t> masks; // T x D, row t-1 is m_t
    std::vector<std::int32_t> noise; // D

    bool masked(int t, int i) const {
        return t >= 1 && masks[static_cast<std::size_t>(t - 1) * D + i] != 0;
    }
    int masked_count_at(int t) const;
};

// Draw a full plan: per-step masked counts follow the ratio curve (round half up), the
// inclusive mode nests masks via a single permutation prefix, and the noise map comes
// from the vocab (all mask ids, or uniform data tokens).
MaskPlan generate_mask_plan(const MaskSchedule& sched, int d, int T, const Vocab& vocab,
                            NoiseSource source, std::mt19937_64& rng);

// Overlay: keep x0hat outside the step-t mask, noise inside it. t = 0 is the identity.
TokenSeq renoise(const TokenSeq& x0hat, const MaskPlan& plan, int t);

// Plain masked-generation sampler: predict clean tokens, sample with Gumbel noise,
// re-hide per the plan, repeat from t = T down to 1. x_init seeds positions the step-T
// mask leaves visible (defaults to the noise map; irrelevant when r(1) = 1).
TokenSeq mgm_sample(const Denoiser& den, const MaskPlan& plan, Condition c,
                    std::mt19937_64& rng, const TokenSeq* x_init = nullptr);

} // namespace dice
