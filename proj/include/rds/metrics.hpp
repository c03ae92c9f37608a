#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "rds/dataset.hpp"
#include "rds/learners.hpp"
#include "rds/rng.hpp"

namespace rds {

enum class MetricKind { Auc, MicroF1, RSquared };

std::string_view to_string(MetricKind metric);
MetricKind metric_kind_from_string(std::string_view name);

/// Throws ValidationError unless `metric` applies to `task`: AUC needs a
/// binary task, micro-F1 any classification, R² regression.
void check_metric_compatible(MetricKind metric, TaskKind task);

/// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked
/// correctly, ties credited 0.5. O(n log n).
double auc(std::span<const int> labels, std::span<const double> scores);

/// Micro-averaged F1. For single-label predictions this equals accuracy.
double micro_f1(std::span<const int> labels, std::span<const int> predictions);

double r_squared(std::span<const double> targets, std::span<const double> predictions);

/// Elementwise mean of K prediction matrices. With `probability_rows`,
/// rows drifting from unit sum by more than 1e-9 are renormalized.
Eigen::MatrixXd soft_vote(std::span<const Eigen::MatrixXd> per_learner, bool probability_rows);

/// Applies `metric` to raw predictions (probability rows or values).
/// Class decisions for micro-F1 are the row argmax, lowest index on ties.
double metric_value(MetricKind metric, TaskKind task, const Eigen::MatrixXd& predictions,
                    const Eigen::VectorXd& targets);

enum class RewardMode { Deterministic, Stochastic };

struct RewardMechanism {
    RewardMode mode = RewardMode::Deterministic;
    std::vector<double> rho;  // Stochastic only

    static RewardMechanism deterministic() { return {RewardMode::Deterministic, {}}; }
    static RewardMechanism stochastic(std::vector<double> rho);
    static RewardMechanism uniform(std::size_t num_learners);

    void validate(std::size_t num_learners) const;
};

/// One draw from rho; the caller holds the per-run stream.
std::size_t choose_learner(const RewardMechanism& mechanism, Rng& episode_rng);

/// Episode return R_tau on the test side. Deterministic: metric of the soft
/// vote over all `models`. Stochastic: `models` holds exactly the chosen
/// learner.
double episode_return(const RewardMechanism& mechanism, std::span<const FittedModel> models,
                      const Eigen::MatrixXd& test_features, const Eigen::VectorXd& test_targets, MetricKind metric);

/// Same, from precomputed per-model predictions.
double episode_return(const RewardMechanism& mechanism, std::span<const Eigen::MatrixXd> predictions,
                      const Eigen::VectorXd& test_targets, MetricKind metric, TaskKind task);

}  // namespace rds
