#pragma once

#include "dice/core.hpp"

namespace dice {

// Conditioning label for a denoiser. Negative label means unconditional (the model's
// prior mixture over conditions), which is what classifier-free guidance contrasts with.
struct Condition {
    int label = -1;

    bool is_unconditional() const { return label < 0; }
    static Condition unconditional() { return Condition{-1}; }
    bool operator==(const Condition&) const = default;
};

// A denoiser maps a corrupted sequence at step t to per-position log-probabilities over
// clean tokens (mask column pinned at the floor). Implementations must be pure functions
// of (x_t, c, t); validate_determinism probes that at construction time.
struct Denoiser {
    virtual ~Denoiser() = default;
    virtual LogitField evaluate(const TokenSeq& xt, Condition c, int t) const = 0;
    virtual Vocab vocab() const = 0;
};

} // namespace dice
