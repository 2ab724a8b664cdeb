#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dbp {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;  // position in the checked function's inputs
    std::size_t worst_index = 0;
};

/// Gradient checks of every differentiable op, each network block, both
/// losses, and the full model loss at N=8, α=2, C=8.
std::vector<GradCheckEntry> run_grad_check_suite(std::uint64_t seed = 7);

inline constexpr double kGradCheckTolerance = 1e-4;

}  // namespace dbp
