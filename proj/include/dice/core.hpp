#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dice/error.hpp"
#include "dice/rng.hpp"

namespace dice {

// Finite stand-in for log(0) in stored logit fields. Anything at or below the floor is
// treated as "no mass". Kept well away from double overflow so fields can be subtracted.
inline constexpr double kLogitFloor = -70.0;

// Euler-Mascheroni constant; the mean of a standard Gumbel draw.
inline constexpr double kEulerGamma = 0.5772156649015329;

// Uniform draws are clamped to [kUniformEps, 1 - kUniformEps] before the double log,
// so a Gumbel sample is always finite.
inline constexpr double kUniformEps = 1e-12;

struct Vocab {
    int k = 0;                 // number of data tokens, ids 0..k-1
    bool has_mask_token = false;

    int alphabet_size() const { return k + (has_mask_token ? 1 : 0); }
    int mask_id() const { return k; } // only meaningful when has_mask_token
    bool operator==(const Vocab&) const = default;
};

struct TokenSeq {
    Vocab vocab;
    std::vector<std::int32_t> tokens;

    int size() const { return static_cast<int>(tokens.size()); }
    bool operator==(const TokenSeq&) const = default;
};

// Throws ConfigError if any token id is outside the vocab alphabet.
void validate_tokens(const TokenSeq& seq);

// Dense row-major D x A field of log-domain values. Rows are positions, columns token ids.
// Fields holding log-probabilities keep entries in [floor_value, 0]; residuals and other
// derived fields may exceed that range but must stay finite.
struct LogitField {
    int rows = 0;
    int cols = 0;
    double floor_value = kLogitFloor;
    std::vector<double> values;

    LogitField() = default;
    LogitField(int r, int c, double fill = kLogitFloor, double floor = kLogitFloor)
        : rows(r), cols(c), floor_value(floor), values(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    double* row(int r) { return values.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return values.data() + static_cast<std::size_t>(r) * cols; }
    bool same_shape(const LogitField& o) const { return rows == o.rows && cols == o.cols; }
};

// Throws NumericError if any entry is NaN or +/-inf.
void validate_finite(const LogitField& f, const char* what);

// Gumbel(mu, beta) draws with the provenance needed to reproduce them.
struct GumbelField {
    int rows = 0;
    int cols = 0;
    double mu = 0.0;
    double beta = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::vector<double> values;

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// One standard Gumbel scalar from the inverse CDF, uniform clamped per kUniformEps.
double gumbel_draw(std::mt19937_64& rng);

// Field of Gumbel(mu, beta) draws; records (seed, stream) so a field can be re-derived.
GumbelField sample_gumbel(int rows, int cols, std::uint64_t seed, std::uint64_t stream,
                          double mu = 0.0, double beta = 1.0);

// argmax over one row with ties broken toward the lowest index. n must be positive and
// entries must not all be -inf.
int argmax_row(const double* v, int n);

// Per-row argmax of logits + g. Shapes must match; result tokens index the field columns.
TokenSeq gumbel_argmax(const LogitField& logits, const GumbelField& g, const Vocab& vocab);

// Row-wise argmax without noise. When restrict_to_data is set, the mask column (if any)
// is excluded, which is what x0 predictions require.
TokenSeq argmax_rows(const LogitField& logits, const Vocab& vocab, bool restrict_to_data);

// log-onehot encoding: 0 at the token's column, floor elsewhere.
LogitField log_onehot(const TokenSeq& seq, int cols);

// Row-wise x - logsumexp(x), clamped at the floor afterwards. The result's rows
// exp-normalize to 1 up to floor-sized crumbs.
LogitField log_normalize(const LogitField& f);

// logsumexp of a contiguous range; returns -inf for an empty or all--inf range.
double log_sum_exp(const double* v, int n);

} // namespace dice
