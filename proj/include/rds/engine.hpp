#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rds/dataset.hpp"
#include "rds/learners.hpp"
#include "rds/metrics.hpp"
#include "rds/policy.hpp"
#include "rds/split.hpp"

namespace rds {

struct RunConfig {
    RewardMode mechanism = RewardMode::Deterministic;
    std::vector<double> rho;  // Stochastic only; empty means uniform
    std::vector<LearnerSpec> learners;
    MetricKind metric = MetricKind::Auc;
    double ratio = 0.75;
    int episodes = 150;
    double alpha = 1.0;
    double gamma = 0.9;
    double psi = 0.1;
    int knn_k = 1;
    int hidden_size = 32;
    double learning_rate = 1e-3;
    int warmup_episodes = 0;  // linear learning-rate ramp over the first episodes; 0 disables
    std::uint64_t seed = 0;
    bool baseline_subtraction = false;  // moving-average reward baseline, kept per learner under Stochastic
    double baseline_decay = 0.9;
    int convergence_window = 25;  // 0 disables early stopping
    bool concurrent_learners = false;
    int pretrain_passes = 200;
    double pretrain_learning_rate = 1e-2;

    void validate(TaskKind task) const;
    RewardMechanism reward_mechanism() const;
};

/// Learner specs with seeds drawn from the master seed's "learner" stream.
std::vector<LearnerSpec> seeded_learners(std::span<const LearnerKind> kinds, std::uint64_t master_seed,
                                         std::string_view stream = "learner");

struct EpisodeLog {
    int episode = 0;
    double reward = 0.0;         // R_tau (worst observed for failed episodes)
    double reward_shaped = 0.0;  // R_tau minus the regression i.i.d. penalty
    double ratio = 0.0;          // achieved train fraction of the sampled split
    double greedy_ratio = 0.0;   // train fraction of the greedy split after the update
    double mean_prob = 0.0;
    LossBreakdown loss;
    std::vector<double> learner_metrics;  // NaN where a learner was not scored
    std::optional<std::size_t> chosen_learner;
    double seconds = 0.0;
    bool failed = false;
    std::string failure;
};

struct RunResult {
    SplitAssignment split;  // greedy decode of the final policy
    std::vector<EpisodeLog> episodes;
    PolicyParams policy;
    PretrainResult pretrain;
    std::optional<SplitAssignment> best_sampled;
    double best_sampled_reward = 0.0;
    bool greedy_fallback = false;  // greedy split was degenerate; `split` is best_sampled
    bool early_stopped = false;
};

using EpisodeCallback = std::function<void(const EpisodeLog&)>;

/// Episodic policy-gradient training of the split policy, followed by a
/// greedy decode of the final policy.
RunResult run_rds(const Dataset& dataset, const RunConfig& config, const EpisodeCallback& on_episode = {});

/// Seeded Fisher-Yates shuffle; the first round(r * M) samples train.
SplitAssignment baseline_random(const Dataset& dataset, double r, std::uint64_t seed);

/// Per-class shuffle with largest-remainder allocation of round(r * M)
/// training samples; classes with >= 2 samples land on both sides.
SplitAssignment baseline_stratified(const Dataset& dataset, double r, std::uint64_t seed);

struct SplitEvaluation {
    std::vector<double> learner_metrics;
    double ensemble_metric = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<double> train_class_pmf;  // classification only
    std::vector<double> test_class_pmf;
};

SplitEvaluation evaluate_split(const Dataset& dataset, const SplitAssignment& assignment,
                               std::span<const LearnerSpec> learners, MetricKind metric);

/// Binary Gaussian-cluster data: two clusters per class around opposite
/// corners (scaled by class_sep) of the informative subspace, followed by
/// independent N(0,1) distractor columns. Rows are shuffled.
Dataset synth_madelon(int n_samples, int n_informative, int n_distractors, double class_sep, std::uint64_t seed,
                      double positive_fraction = 0.5);

/// y = x . w + noise * N(0,1), x ~ N(0, I), w ~ N(0, 1) per feature.
Dataset synth_linear(int n_samples, int n_features, double noise, std::uint64_t seed);

}  // namespace rds
