#pragma once

// Central finite-difference oracle for the policy loss. Test-only: it
// relies on nothing but forward loss evaluation.

#include <algorithm>
#include <cmath>
#include <span>

#include "rds/policy.hpp"

namespace rds::testing {

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t worst_block = 0;
    std::size_t compared = 0;
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

inline GradientCheck check_policy_gradient(const PolicyParams& policy, std::span<const Action> actions,
                                           const PolicyData& data, const LossTerms& terms,
                                           const PolicyParams& analytic, double h = 1e-5) {
    GradientCheck out;
    PolicyParams probe = policy;
    auto blocks = probe.blocks();
    const auto grads = analytic.blocks();
    for (std::size_t b = 0; b < PolicyParams::kBlockCount; ++b) {
        for (Eigen::Index i = 0; i < blocks[b]->rows(); ++i) {
            for (Eigen::Index j = 0; j < blocks[b]->cols(); ++j) {
                const double saved = (*blocks[b])(i, j);
                (*blocks[b])(i, j) = saved + h;
                const double up = compute_loss(probe, actions, data, terms).total();
                (*blocks[b])(i, j) = saved - h;
                const double down = compute_loss(probe, actions, data, terms).total();
                (*blocks[b])(i, j) = saved;
                const double numeric = (up - down) / (2.0 * h);
                const double err = relative_error((*grads[b])(i, j), numeric);
                if (err > out.max_relative_error) {
                    out.max_relative_error = err;
                    out.worst_block = b;
                }
                ++out.compared;
            }
        }
    }
    return out;
}

}  // namespace rds::testing
