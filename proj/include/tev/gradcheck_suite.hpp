#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tev {

struct GradSuiteEntry {
    std::string fragment;
    double max_rel_error = 0.0;
    size_t elements = 0;
};

struct GradSuiteReport {
    std::vector<GradSuiteEntry> entries;
    double max_rel_error = 0.0;
    bool passed(double tolerance = 1e-4) const { return max_rel_error < tolerance; }
};

/// Finite-difference verification of every backward pass: dense, conv2d, a
/// conv+maxpool composite, a 5-step LSTM, and LSTM + weighted cross-entropy,
/// across `n_seeds` random instantiations each (64-bit mode).
GradSuiteReport run_gradcheck_suite(int n_seeds, std::ostream* log);

} // namespace tev
