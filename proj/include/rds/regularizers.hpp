#pragma once

#include <span>
#include <vector>

#include "rds/dataset.hpp"

namespace rds {

struct RegularizerConfig {
    double gamma = 0.9;  // ratio scale
    double psi = 0.1;    // i.i.d. scale
    double r = 0.75;     // target train fraction
    int knn_k = 1;       // neighbour order of the continuous KL estimate

    void validate() const;
};

/// gamma * |mean_prob - r|
double ratio_penalty(double mean_prob, double r, double gamma);

/// Discrete KL(p || q) in nats. Where q has a zero on p's support, q is
/// smoothed by 1e-9 and renormalized first.
double kl_discrete(std::span<const double> p, std::span<const double> q);

/// Nearest-neighbour KL(P || Q) estimate for 1-D samples:
/// (1/n) sum_i log(nu_k(x_i) / rho_k(x_i)) + log(m / (n - 1)), where rho_k is
/// the k-th neighbour distance within `samples_p` (self excluded) and nu_k
/// the k-th neighbour distance into `samples_q`. Distances are floored at
/// 1e-12. The raw estimate can be slightly negative.
double kl_continuous_perez_cruz(std::span<const double> samples_p, std::span<const double> samples_q, int k = 1);

struct SoftIidPenalty {
    double value = 0.0;
    std::vector<double> gradient;  // d value / d action_probs[i]
};

/// psi * KL(p_test || p_train) between probability-weighted class
/// distributions: p_train(c) = sum_{y_i=c} pi_i / sum_i pi_i, p_test likewise
/// with weights 1 - pi_i. Classification only.
SoftIidPenalty iid_penalty_soft(std::span<const double> action_probs, std::span<const int> labels, TaskKind task,
                                double psi);

}  // namespace rds
