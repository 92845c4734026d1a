#include "dice/fixture.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace dice {

namespace {

using nlohmann::json;

constexpr double kStochTol = 1e-9;

void check_distribution(const std::vector<double>& p, const char* what) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + ": bad entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kStochTol) {
        throw ConfigError(std::string(what) + ": entries sum to " + std::to_string(sum) +
                          ", expected 1");
    }
}

int draw_categorical(const std::vector<double>& p, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size() - 1);
}

} // namespace

const ConditionModel& Fixture::condition(int label) const {
    for (const auto& c : conditions) {
        if (c.label == label) return c;
    }
    throw ConfigError("fixture has no condition with label " + std::to_string(label));
}

bool Fixture::has_condition(int label) const {
    for (const auto& c : conditions) {
        if (c.label == label) return true;
    }
    return false;
}

Fixture parse_fixture(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("fixture is not valid JSON: ") + e.what());
    }

    Fixture f;
    const std::string type = j.at("type").get<std::string>();
    if (type == "template-mixture") {
        f.type = FixtureType::template_mixture;
    } else if (type == "markov") {
        f.type = FixtureType::markov;
    } else {
        throw ConfigError("unknown fixture type: " + type);
    }
    f.vocab.k = j.at("k").get<int>();
    f.vocab.has_mask_token = j.at("has_mask_token").get<bool>();
    f.d = j.at("d").get<int>();
    if (f.vocab.k < 2) throw ConfigError("fixture needs at least two data tokens");
    if (f.d < 1) throw ConfigError("fixture needs d >= 1");

    std::vector<double> priors;
    for (const auto& jc : j.at("conditions")) {
        ConditionModel c;
        c.label = jc.at("label").get<int>();
        if (c.label < 0) throw ConfigError("condition labels must be nonnegative");
        c.prior = jc.at("prior").get<double>();
        priors.push_back(c.prior);

        if (f.type == FixtureType::template_mixture) {
            std::vector<double> weights;
            for (const auto& jt : jc.at("templates")) {
                WeightedTemplate t;
                t.weight = jt.at("weight").get<double>();
                for (const auto& tok : jt.at("tokens")) {
                    const int v = tok.get<int>();
                    if (v < 0 || v >= f.vocab.k) {
                        throw ConfigError("template token outside data alphabet");
                    }
                    t.tokens.push_back(static_cast<std::int32_t>(v));
                }
                if (static_cast<int>(t.tokens.size()) != f.d) {
                    throw ConfigError("template length does not match d");
                }
                weights.push_back(t.weight);
                c.templates.push_back(std::move(t));
            }
            if (c.templates.empty()) throw ConfigError("condition has no templates");
            check_distribution(weights, "template weights");
        } else {
            c.chain.initial = jc.at("initial").get<std::vector<double>>();
            if (static_cast<int>(c.chain.initial.size()) != f.vocab.k) {
                throw ConfigError("initial distribution length mismatch");
            }
            check_distribution(c.chain.initial, "initial distribution");
            const auto& jt = jc.at("transition");
            if (static_cast<int>(jt.size()) != f.vocab.k) {
                throw ConfigError("transition matrix must have K rows");
            }
            for (const auto& jrow : jt) {
                const auto row = jrow.get<std::vector<double>>();
                if (static_cast<int>(row.size()) != f.vocab.k) {
                    throw ConfigError("transition matrix must have K columns");
                }
                check_distribution(row, "transition row");
                c.chain.transition.insert(c.chain.transition.end(), row.begin(), row.end());
            }
        }
        f.conditions.push_back(std::move(c));
    }
    if (f.conditions.empty()) throw ConfigError("fixture has no conditions");
    for (std::size_t i = 0; i < f.conditions.size(); ++i) {
        for (std::size_t k = i + 1; k < f.conditions.size(); ++k) {
            if (f.conditions[i].label == f.conditions[k].label) {
                throw ConfigError("duplicate condition label");
            }
        }
    }
    check_distribution(priors, "condition priors");
    return f;
}

Fixture load_fixture(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open fixture file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("failed reading fixture file: " + path);
    return parse_fixture(ss.str());
}

TokenSeq sample_from(const Fixture& f, int label, std::mt19937_64& rng) {
    const ConditionModel& c = f.condition(label);
    TokenSeq x;
    x.vocab = f.vocab;
    x.tokens.resize(f.d);
    if (f.type == FixtureType::template_mixture) {
        std::vector<double> w;
        w.reserve(c.templates.size());
        for (const auto& t : c.templates) w.push_back(t.weight);
        x.tokens = c.templates[draw_categorical(w, rng)].tokens;
    } else {
        int prev = draw_categorical(c.chain.initial, rng);
        x.tokens[0] = static_cast<std::int32_t>(prev);
        std::vector<double> row(f.vocab.k);
        for (int i = 1; i < f.d; ++i) {
            for (int s = 0; s < f.vocab.k; ++s) row[s] = c.chain.trans(prev, s, f.vocab.k);
            prev = draw_categorical(row, rng);
            x.tokens[i] = static_cast<std::int32_t>(prev);
        }
    }
    return x;
}

double log_likelihood(const Fixture& f, const TokenSeq& x, int label, double eta) {
    if (x.size() != f.d) throw ConfigError("sequence length does not match fixture");
    const ConditionModel& c = f.condition(label);
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();

    if (f.type == FixtureType::markov) {
        double ll = 0.0;
        const int k = f.vocab.k;
        const double p0 = c.chain.initial[x.tokens[0]];
        if (p0 <= 0.0) return neg_inf;
        ll += std::log(p0);
        for (int i = 1; i < f.d; ++i) {
            const double p = c.chain.trans(x.tokens[i - 1], x.tokens[i], k);
            if (p <= 0.0) return neg_inf;
            ll += std::log(p);
        }
        return ll;
    }

    if (eta < 0.0 || eta > 1.0) throw ConfigError("classifier smoothing must lie in [0,1]");
    const double log_hit = eta < 1.0 ? std::log1p(-eta + eta / f.vocab.k) : std::log(eta / f.vocab.k);
    const double log_miss = eta > 0.0 ? std::log(eta / f.vocab.k) : neg_inf;
    std::vector<double> per_template;
    per_template.reserve(c.templates.size());
    for (const auto& t : c.templates) {
        double ll = std::log(t.weight);
        for (int i = 0; i < f.d; ++i) {
            ll += t.tokens[i] == x.tokens[i] ? log_hit : log_miss;
            if (ll == neg_inf) break;
        }
        per_template.push_back(ll);
    }
    return log_sum_exp(per_template.data(), static_cast<int>(per_template.size()));
}

bool classify_prefers(const Fixture& f, const TokenSeq& x, int source_label, int target_label,
                      double eta) {
    const double ls = std::log(f.condition(source_label).prior) +
                      log_likelihood(f, x, source_label, eta);
    const double lt = std::log(f.condition(target_label).prior) +
                      log_likelihood(f, x, target_label, eta);
    return lt > ls;
}

} // namespace dice
