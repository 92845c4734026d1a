#pragma once

#include <string>
#include <vector>

#include "dice/core.hpp"
#include "dice/rng.hpp"

namespace dice {

// Toy data distributions with exactly computable posteriors. Two flavors: a weighted
// template mixture per condition, or a first-order Markov chain per condition.
enum class FixtureType { template_mixture, markov };

struct WeightedTemplate {
    std::vector<std::int32_t> tokens;
    double weight = 0.0;
};

struct MarkovChainModel {
    std::vector<double> initial;    // K
    std::vector<double> transition; // K x K row-major, rows sum to 1

    double trans(int from, int to, int k) const {
        return transition[static_cast<std::size_t>(from) * k + to];
    }
};

struct ConditionModel {
    int label = 0;
    double prior = 0.0;
    std::vector<WeightedTemplate> templates; // template_mixture only
    MarkovChainModel chain;                  // markov only
};

struct Fixture {
    FixtureType type = FixtureType::template_mixture;
    Vocab vocab;
    int d = 0;
    std::vector<ConditionModel> conditions;

    const ConditionModel& condition(int label) const;
    bool has_condition(int label) const;
};

// Parse and fully validate (token ranges, stochasticity of weights/priors/rows).
Fixture parse_fixture(const std::string& json_text);
Fixture load_fixture(const std::string& path); // IoError if unreadable

// Draw a clean sequence from one condition.
TokenSeq sample_from(const Fixture& f, int label, std::mt19937_64& rng);

// log p(x | c). Template mixtures use a per-position noisy-channel smoothing eta
// (eta = 0 gives the exact mixture, -inf off support); Markov chains are exact and
// ignore eta.
double log_likelihood(const Fixture& f, const TokenSeq& x, int label, double eta);

// True if the Bayes classifier (priors + smoothed likelihoods) prefers target over source.
bool classify_prefers(const Fixture& f, const TokenSeq& x, int source_label, int target_label,
                      double eta);

} // namespace dice
