#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "dice/denoise.hpp"
#include "dice/error.hpp"
#include "dice/fixture.hpp"
#include "dice/maskgen.hpp"
#include "dice/rng.hpp"
#include "support/oracles.hpp"

using namespace dice;

namespace {

std::string fixture_dir() { return std::string(DICE_SOURCE_DIR) + "/fixtures"; }

const char* kTemplateFixture = R"({
  "type": "template-mixture",
  "k": 5,
  "has_mask_token": true,
  "d": 6,
  "conditions": [
    {
      "label": 0,
      "prior": 0.75,
      "templates": [
        {"weight": 0.4, "tokens": [0, 1, 2, 3, 4, 0]},
        {"weight": 0.3, "tokens": [0, 1, 2, 3, 4, 1]},
        {"weight": 0.2, "tokens": [1, 2, 3, 4, 0, 2]},
        {"weight": 0.1, "tokens": [4, 4, 4, 4, 4, 3]}
      ]
    },
    {
      "label": 1,
      "prior": 0.25,
      "templates": [
        {"weight": 1.0, "tokens": [2, 2, 2, 2, 2, 2]}
      ]
    }
  ]
})";

const char* kMarkovFixture = R"({
  "type": "markov",
  "k": 3,
  "has_mask_token": true,
  "d": 2,
  "conditions": [
    {
      "label": 0,
      "prior": 1.0,
      "initial": [0.5, 0.3, 0.2],
      "transition": [[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.1, 0.2, 0.7]]
    }
  ]
})";

MaskPlan manual_plan(int d, int T, int mask_id) {
    MaskPlan plan;
    plan.D = d;
    plan.T = T;
    plan.source = NoiseSource::mask_token;
    plan.mode = MaskMode::inclusive;
    plan.masks.assign(static_cast<std::size_t>(T) * d, 0);
    plan.noise.assign(static_cast<std::size_t>(d), mask_id);
    return plan;
}

void check_rows_match(const LogitField& logits, const std::vector<std::vector<double>>& probs,
                      double tol) {
    REQUIRE(logits.rows == static_cast<int>(probs.size()));
    for (int r = 0; r < logits.rows; ++r) {
        for (int c = 0; c < static_cast<int>(probs[static_cast<std::size_t>(r)].size()); ++c) {
            CHECK(std::fabs(std::exp(logits.at(r, c)) - probs[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) < tol);
        }
    }
}

} // namespace

TEST_CASE("plan-aware denoiser mixes all templates when everything is hidden") {
    const Fixture f = parse_fixture(kTemplateFixture);
    MaskPlan plan = manual_plan(6, 2, f.vocab.mask_id());
    for (int i = 0; i < 6; ++i) plan.masks[static_cast<std::size_t>(6 + i)] = 1; // step 2 hides all
    const auto den = make_template_denoiser_plan_aware(f, plan);

    TokenSeq xt;
    xt.vocab = f.vocab;
    xt.tokens.assign(6, f.vocab.mask_id());
    const LogitField out = den->evaluate(xt, Condition{0}, 2);

    const std::vector<bool> visible(6, false);
    const auto want = oracle::template_posterior_visible(f, 0, xt.tokens, visible);
    check_rows_match(out, want, 1e-12);
    for (int r = 0; r < 6; ++r) CHECK(out.at(r, 5) == kLogitFloor); // mask column stays floored
}

TEST_CASE("plan-aware denoiser is a point mass on fully visible input") {
    const Fixture f = parse_fixture(kTemplateFixture);
    const MaskPlan plan = manual_plan(6, 2, f.vocab.mask_id()); // nothing ever hidden
    const auto den = make_template_denoiser_plan_aware(f, plan);

    TokenSeq xt;
    xt.vocab = f.vocab;
    xt.tokens = {1, 2, 3, 4, 0, 2}; // template 2 of condition 0
    const LogitField out = den->evaluate(xt, Condition{0}, 1);
    for (int r = 0; r < 6; ++r) {
        CHECK(out.at(r, xt.tokens[static_cast<std::size_t>(r)]) == doctest::Approx(0.0).epsilon(1e-12));
        for (int c = 0; c < 6; ++c) {
            if (c != xt.tokens[static_cast<std::size_t>(r)]) CHECK(out.at(r, c) == kLogitFloor);
        }
    }
}

TEST_CASE("plan-aware denoiser matches enumeration on a partial mask") {
    const Fixture f = parse_fixture(kTemplateFixture);
    MaskPlan plan = manual_plan(6, 4, f.vocab.mask_id());
    for (int i : {1, 3, 5}) plan.masks[static_cast<std::size_t>(6 * 1 + i)] = 1; // step 2 row
    const auto den = make_template_denoiser_plan_aware(f, plan);

    TokenSeq x0;
    x0.vocab = f.vocab;
    x0.tokens = {0, 1, 2, 3, 4, 1};
    const TokenSeq xt = renoise(x0, plan, 2);

    const LogitField out = den->evaluate(xt, Condition{0}, 2);
    std::vector<bool> visible(6, true);
    for (int i : {1, 3, 5}) visible[static_cast<std::size_t>(i)] = false;
    const auto want = oracle::template_posterior_visible(f, 0, xt.tokens, visible);
    check_rows_match(out, want, 1e-12);
}

TEST_CASE("plan-aware denoiser collapses onto the least-contradicted templates") {
    // Evidence outside every template's support must not blow up: each visible mismatch
    // costs one floor factor, so the posterior lands on the templates with the fewest
    // contradictions and anything one mismatch behind is e^-70 away.
    const Fixture f = parse_fixture(kTemplateFixture);
    const MaskPlan plan = manual_plan(6, 2, f.vocab.mask_id());
    const auto den = make_template_denoiser_plan_aware(f, plan);

    TokenSeq xt;
    xt.vocab = f.vocab;
    xt.tokens = {2, 2, 2, 2, 2, 2}; // matches no condition-0 template anywhere in full
    const LogitField out = den->evaluate(xt, Condition{0}, 1);
    // [1,2,3,4,0,2] agrees at two positions, every other template at most one.
    const std::vector<int> nearest = {1, 2, 3, 4, 0, 2};
    double mass = 0.0;
    for (int i = 0; i < 6; ++i) {
        CHECK(std::exp(out.at(i, nearest[static_cast<std::size_t>(i)])) ==
              doctest::Approx(1.0).epsilon(1e-12));
        for (int v = 0; v < out.cols; ++v) mass += std::exp(out.at(i, v));
    }
    CHECK(mass == doctest::Approx(6.0).epsilon(1e-9));

    // A probe equidistant from all templates reproduces the prior weight mixture.
    xt.tokens = {3, 3, 3, 3, 3, 3}; // exactly one agreement with each template
    const LogitField tie = den->evaluate(xt, Condition{0}, 1);
    const std::vector<std::int32_t> blank(6, f.vocab.mask_id());
    const auto mixture = oracle::template_posterior_visible(
        f, 0, blank, std::vector<bool>(6, false));
    check_rows_match(tie, mixture, 1e-12);
}

TEST_CASE("marginal denoiser applies the mask-token likelihood") {
    const Fixture f = parse_fixture(kTemplateFixture);
    const MaskSchedule sched{MaskCurve::linear, MaskMode::inclusive};
    const int T = 4;
    const auto den = make_template_denoiser_marginal(f, sched, T, NoiseSource::mask_token);

    const int t = 2; // rho = 0.5
    const double rho = 0.5;
    TokenSeq xt;
    xt.vocab = f.vocab;
    xt.tokens = {0, 5, 2, 5, 4, 5};
    const LogitField out = den->evaluate(xt, Condition{0}, t);

    std::vector<std::vector<double>> emission(6, std::vector<double>(5, 0.0));
    for (int i = 0; i < 6; ++i) {
        for (int clean = 0; clean < 5; ++clean) {
            const int obs = xt.tokens[static_cast<std::size_t>(i)];
            emission[static_cast<std::size_t>(i)][static_cast<std::size_t>(clean)] =
                obs == f.vocab.mask_id() ? rho : (obs == clean ? 1.0 - rho : 0.0);
        }
    }
    const auto want = oracle::template_posterior_emission(f, 0, emission);
    check_rows_match(out, want, 1e-12);
}

TEST_CASE("marginal denoiser applies the random-token likelihood") {
    const Fixture f = parse_fixture(kTemplateFixture);
    const MaskSchedule sched{MaskCurve::linear, MaskMode::inclusive};
    const int T = 4;
    const auto den = make_template_denoiser_marginal(f, sched, T, NoiseSource::random_token);

    const int t = 3; // rho = 0.75
    const double rho = 0.75;
    TokenSeq xt;
    xt.vocab = f.vocab;
    xt.tokens = {0, 3, 2, 0, 4, 2}; // data tokens only
    const LogitField out = den->evaluate(xt, Condition{0}, t);

    std::vector<std::vector<double>> emission(6, std::vector<double>(5, 0.0));
    for (int i = 0; i < 6; ++i) {
        for (int clean = 0; clean < 5; ++clean) {
            const int obs = xt.tokens[static_cast<std::size_t>(i)];
            emission[static_cast<std::size_t>(i)][static_cast<std::size_t>(clean)] =
                (obs == clean ? 1.0 - rho : 0.0) + rho / 5.0;
        }
    }
    const auto want = oracle::template_posterior_emission(f, 0, emission);
    check_rows_match(out, want, 1e-12);
}

TEST_CASE("multinomial template denoiser matches the kernel-weighted mixture") {
    const Fixture f = parse_fixture(kTemplateFixture);
    const DiffusionSchedule s = make_vq_schedule(8, 5, SchedulePreset::mask_and_replace);
    const auto den = make_template_denoiser_multinomial(f, s);

    const int t = 5;
    TokenSeq xt;
    xt.vocab = f.vocab;
    xt.tokens = {0, 5, 3, 3, 4, 5};
    const LogitField out = den->evaluate(xt, Condition{0}, t);

    std::vector<std::vector<double>> emission(6, std::vector<double>(5, 0.0));
    for (int clean = 0; clean < 5; ++clean) {
        const std::vector<double> q = oracle::qbar_vector(s, t, clean);
        for (int i = 0; i < 6; ++i) {
            emission[static_cast<std::size_t>(i)][static_cast<std::size_t>(clean)] =
                q[static_cast<std::size_t>(xt.tokens[static_cast<std::size_t>(i)])];
        }
    }
    const auto want = oracle::template_posterior_emission(f, 0, emission);
    check_rows_match(out, want, 1e-10);
}

TEST_CASE("unconditional evaluation mixes conditions by their priors") {
    const Fixture f = parse_fixture(kTemplateFixture);
    MaskPlan plan = manual_plan(6, 1, f.vocab.mask_id());
    for (int i = 0; i < 6; ++i) plan.masks[static_cast<std::size_t>(i)] = 1;
    const auto den = make_template_denoiser_plan_aware(f, plan);

    TokenSeq xt;
    xt.vocab = f.vocab;
    xt.tokens.assign(6, f.vocab.mask_id());
    const LogitField out = den->evaluate(xt, Condition::unconditional(), 1);

    const std::vector<bool> hidden(6, false);
    const auto c0 = oracle::template_posterior_visible(f, 0, xt.tokens, hidden);
    const auto c1 = oracle::template_posterior_visible(f, 1, xt.tokens, hidden);
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 5; ++c) {
            const double want = 0.75 * c0[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] +
                                0.25 * c1[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            CHECK(std::fabs(std::exp(out.at(r, c)) - want) < 1e-12);
        }
    }
}

TEST_CASE("markov denoiser under a full mask returns the chain marginals") {
    const Fixture f = load_fixture(fixture_dir() + "/markov_pair.json");
    const DiffusionSchedule s = make_vq_schedule(4, 5, SchedulePreset::mask_only);
    const auto den = make_markov_denoiser(f, s);

    TokenSeq xt;
    xt.vocab = f.vocab;
    xt.tokens.assign(static_cast<std::size_t>(f.d), f.vocab.mask_id());
    const LogitField out = den->evaluate(xt, Condition{0}, 4);
    const auto want = oracle::markov_chain_marginals(f, 0);
    check_rows_match(out, want, 1e-10);
}

TEST_CASE("markov denoiser matches exhaustive bayes on a tiny chain") {
    const Fixture f = parse_fixture(kMarkovFixture);
    const DiffusionSchedule s = make_vq_schedule(6, 3, SchedulePreset::mask_and_replace);
    const auto den = make_markov_denoiser(f, s);

    for (int t : {1, 3, 6}) {
        for (std::int32_t a = 0; a <= 3; ++a) {
            for (std::int32_t b = 0; b <= 3; ++b) {
                TokenSeq xt;
                xt.vocab = f.vocab;
                xt.tokens = {a, b};
                const LogitField out = den->evaluate(xt, Condition{0}, t);

                std::vector<std::vector<double>> emission(2, std::vector<double>(3, 0.0));
                for (int clean = 0; clean < 3; ++clean) {
                    const std::vector<double> q = oracle::qbar_vector(s, t, clean);
                    emission[0][static_cast<std::size_t>(clean)] = q[static_cast<std::size_t>(a)];
                    emission[1][static_cast<std::size_t>(clean)] = q[static_cast<std::size_t>(b)];
                }
                const auto want = oracle::markov_posterior_enumeration(f, 0, emission);
                check_rows_match(out, want, 1e-10);
            }
        }
    }
}

TEST_CASE("markov denoiser pins clean observations when nothing was corrupted") {
    const Fixture f = parse_fixture(kMarkovFixture);
    const DiffusionSchedule s = make_vq_schedule(2, 3, {1.0, 0.5}, {0.0, 0.3});
    const auto den = make_markov_denoiser(f, s);

    TokenSeq xt;
    xt.vocab = f.vocab;
    xt.tokens = {2, 0};
    const LogitField out = den->evaluate(xt, Condition{0}, 1); // alpha_bar(1) = 1
    for (int r = 0; r < 2; ++r) {
        CHECK(std::exp(out.at(r, xt.tokens[static_cast<std::size_t>(r)])) ==
              doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("guidance combination interpolates between the two fields") {
    auto rng = make_rng(31, 0);
    LogitField cond(4, 6);
    LogitField uncond(4, 6);
    for (double& v : cond.values) v = 4.0 * uniform01(rng) - 2.0;
    for (double& v : uncond.values) v = 4.0 * uniform01(rng) - 2.0;
    cond = log_normalize(cond);
    uncond = log_normalize(uncond);

    const LogitField at1 = cfg_combine(cond, uncond, 1.0);
    for (std::size_t i = 0; i < at1.values.size(); ++i) {
        CHECK(std::fabs(at1.values[i] - cond.values[i]) < 1e-12);
    }
    const LogitField at0 = cfg_combine(cond, uncond, 0.0);
    for (std::size_t i = 0; i < at0.values.size(); ++i) {
        CHECK(std::fabs(at0.values[i] - uncond.values[i]) < 1e-12);
    }
    const LogitField at10 = cfg_combine(cond, uncond, 10.0);
    for (int r = 0; r < at10.rows; ++r) {
        double total = 0.0;
        for (int c = 0; c < at10.cols; ++c) total += std::exp(at10.at(r, c));
        CHECK(std::fabs(total - 1.0) < 1e-9);
    }

    LogitField small(2, 6);
    CHECK_THROWS_AS(cfg_combine(cond, small, 1.0), ConfigError);
}

TEST_CASE("determinism probe accepts the library denoisers and rejects stateful ones") {
    const Fixture f = parse_fixture(kTemplateFixture);
    const DiffusionSchedule s = make_vq_schedule(8, 5, SchedulePreset::mask_and_replace);
    const auto den = make_template_denoiser_multinomial(f, s);
    CHECK_NOTHROW(validate_determinism(*den, f.d, s.T));

    struct Drifting : Denoiser {
        Vocab v{5, true};
        mutable double bump = 0.0;
        LogitField evaluate(const TokenSeq& xt, Condition, int) const override {
            bump += 0.5;
            LogitField out(xt.size(), v.alphabet_size(), -1.0);
            out.at(0, 0) = bump;
            return log_normalize(out);
        }
        Vocab vocab() const override { return v; }
    } drifting;
    CHECK_THROWS_AS(validate_determinism(drifting, 6, 8), ConfigError);
}
