#pragma once

#include <string>

#include "melc/error.hpp"

namespace melc {

enum class EvalMode { exact, discard, bin };

std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(const std::string& s);

/// How the three ip terms of the divergence are evaluated.
/// epsilon is the acceptable absolute error per ip value; p_fraction is the
/// discard bound's p (1 keeps the guarantee unconditional). refine_p enables
/// the optional two-pass threshold refinement (estimate the discarded
/// fraction with the conservative threshold, recompute, sweep again).
struct ApproxConfig {
    EvalMode mode = EvalMode::exact;
    double epsilon = 0.0;
    double p_fraction = 1.0;
    bool refine_p = false;

    void validate() const {
        if (epsilon < 0.0) throw Error("epsilon must be >= 0");
        if (!(p_fraction > 0.0 && p_fraction <= 1.0))
            throw Error("p_fraction must be in (0, 1]");
    }
};

}  // namespace melc
