#pragma once

#include <memory>

#include "dice/denoiser.hpp"
#include "dice/fixture.hpp"
#include "dice/maskgen.hpp"
#include "dice/multinomial.hpp"
#include "dice/schedules.hpp"

namespace dice {

// Exact Bayes denoisers over the toy fixtures. Each returns per-position log p(x0 | x_t, c)
// with the mask column (when present) pinned at the floor. All referenced objects
// (fixture, plan, schedules) must outlive the denoiser. Impossible observations score the
// floor rather than -log 0, so evidence a steered edit pushed off-support collapses the
// posterior onto the least-contradicted explanations instead of failing.

// Masked-generation denoiser that knows the corruption plan: positions hidden at step t
// contribute nothing, visible positions are exact-match evidence (floored on mismatch).
std::unique_ptr<Denoiser> make_template_denoiser_plan_aware(const Fixture& f, const MaskPlan& plan);

// Plan-unaware masked-generation denoiser using the marginal corruption likelihood at
// mask ratio r(t/T): a mask observation is uninformative; a data observation is either
// surviving signal or (for random-token noise) a noise token that happens to look clean.
std::unique_ptr<Denoiser> make_template_denoiser_marginal(const Fixture& f,
                                                          const MaskSchedule& sched, int T,
                                                          NoiseSource source);

// Template denoiser under the multinomial corruption kernel q(x_t | x0).
std::unique_ptr<Denoiser> make_template_denoiser_multinomial(const Fixture& f,
                                                             const DiffusionSchedule& sched);

// Markov-chain denoiser under the multinomial kernel, exact via forward-backward.
std::unique_ptr<Denoiser> make_markov_denoiser(const Fixture& f, const DiffusionSchedule& sched);

// Classifier-free-guidance combination: uncond + scale * (cond - uncond), then
// log-normalized. scale = 1 returns the conditional logits (up to normalization).
LogitField cfg_combine(const LogitField& cond, const LogitField& uncond, double scale);

// Evaluates the denoiser twice on probe inputs and insists on bitwise-equal outputs.
// The factories above run this; it exists separately so external denoisers can be vetted.
void validate_determinism(const Denoiser& den, int d, int T);

} // namespace dice
