#include "dice/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dice {

void validate_tokens(const TokenSeq& seq) {
    const int a = seq.vocab.alphabet_size();
    if (a <= 0) throw ConfigError("vocab has no tokens");
    for (std::int32_t t : seq.tokens) {
        if (t < 0 || t >= a) {
            throw ConfigError("token id " + std::to_string(t) + " outside alphabet of size " +
                              std::to_string(a));
        }
    }
}

void validate_finite(const LogitField& f, const char* what) {
    for (double v : f.values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(what) + ": non-finite logit entry");
        }
    }
}

double gumbel_draw(std::mt19937_64& rng) {
    double u = uniform01(rng);
    u = std::min(std::max(u, kUniformEps), 1.0 - kUniformEps);
    return -std::log(-std::log(u));
}

GumbelField sample_gumbel(int rows, int cols, std::uint64_t seed, std::uint64_t stream,
                          double mu, double beta) {
    if (rows <= 0 || cols <= 0) throw ConfigError("sample_gumbel: empty shape");
    if (!(beta > 0.0)) throw ConfigError("sample_gumbel: scale must be positive");
    GumbelField g;
    g.rows = rows;
    g.cols = cols;
    g.mu = mu;
    g.beta = beta;
    g.seed = seed;
    g.stream = stream;
    g.values.resize(static_cast<std::size_t>(rows) * cols);
    auto rng = make_rng(seed, stream);
    for (double& v : g.values) v = mu + beta * gumbel_draw(rng);
    return g;
}

int argmax_row(const double* v, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i) {
        if (v[i] > v[best]) best = i; // strict: ties keep the lowest index
    }
    if (v[best] == -std::numeric_limits<double>::infinity()) {
        throw NumericError("argmax over a row with no finite entry");
    }
    return best;
}

TokenSeq gumbel_argmax(const LogitField& logits, const GumbelField& g, const Vocab& vocab) {
    if (logits.rows != g.rows || logits.cols != g.cols) {
        throw ConfigError("gumbel_argmax: shape mismatch");
    }
    if (logits.cols != vocab.alphabet_size()) {
        throw ConfigError("gumbel_argmax: field width does not match vocab");
    }
    TokenSeq out;
    out.vocab = vocab;
    out.tokens.resize(logits.rows);
    std::vector<double> row(logits.cols);
    for (int r = 0; r < logits.rows; ++r) {
        const double* lv = logits.row(r);
        const double* gv = g.values.data() + static_cast<std::size_t>(r) * g.cols;
        for (int c = 0; c < logits.cols; ++c) {
            if (std::isnan(lv[c])) throw NumericError("gumbel_argmax: NaN logit");
            row[c] = lv[c] + gv[c];
        }
        out.tokens[r] = static_cast<std::int32_t>(argmax_row(row.data(), logits.cols));
    }
    return out;
}

TokenSeq argmax_rows(const LogitField& logits, const Vocab& vocab, bool restrict_to_data) {
    if (logits.cols != vocab.alphabet_size()) {
        throw ConfigError("argmax_rows: field width does not match vocab");
    }
    int n = logits.cols;
    if (restrict_to_data && vocab.has_mask_token) n = vocab.k;
    TokenSeq out;
    out.vocab = vocab;
    out.tokens.resize(logits.rows);
    for (int r = 0; r < logits.rows; ++r) {
        out.tokens[r] = static_cast<std::int32_t>(argmax_row(logits.row(r), n));
    }
    return out;
}

LogitField log_onehot(const TokenSeq& seq, int cols) {
    validate_tokens(seq);
    LogitField f(seq.size(), cols, kLogitFloor);
    for (int r = 0; r < seq.size(); ++r) {
        if (seq.tokens[r] >= cols) throw ConfigError("log_onehot: token outside field width");
        f.at(r, seq.tokens[r]) = 0.0;
    }
    return f;
}

double log_sum_exp(const double* v, int n) {
    double m = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) m = std::max(m, v[i]);
    if (m == -std::numeric_limits<double>::infinity()) return m;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(v[i] - m);
    return m + std::log(s);
}

LogitField log_normalize(const LogitField& f) {
    validate_finite(f, "log_normalize");
    LogitField out = f;
    for (int r = 0; r < out.rows; ++r) {
        double* row = out.row(r);
        const double lse = log_sum_exp(row, out.cols);
        if (!std::isfinite(lse)) throw NumericError("log_normalize: row has no mass");
        for (int c = 0; c < out.cols; ++c) {
            row[c] = std::max(row[c] - lse, out.floor_value);
        }
    }
    return out;
}

} // namespace dice
