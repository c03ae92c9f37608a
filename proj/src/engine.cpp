#include "rds/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "rds/error.hpp"
#include "rds/regularizers.hpp"
#include "rds/rng.hpp"

namespace rds {

void RunConfig::validate(TaskKind task) const {
    if (episodes < 1) throw ValidationError("episodes must be >= 1");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("ratio must lie in (0, 1)");
    if (!(alpha >= 0.0) || !(gamma >= 0.0) || !(psi >= 0.0)) throw ValidationError("scales must be nonnegative");
    if (knn_k < 1) throw ValidationError("knn_k must be >= 1");
    if (hidden_size < 1) throw ValidationError("hidden_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (warmup_episodes < 0) throw ValidationError("warmup_episodes must be >= 0");
    if (convergence_window < 0) throw ValidationError("convergence_window must be >= 0");
    if (pretrain_passes < 0) throw ValidationError("pretrain_passes must be >= 0");
    if (learners.empty()) throw ValidationError("at least one learner is required");
    check_metric_compatible(metric, task);
    for (const auto& spec : learners) {
        if (spec.kind == LearnerKind::LogisticRegression && !task.is_classification())
            throw ValidationError("logistic_regression requires a classification task");
        if (spec.kind == LearnerKind::RidgeRegression && task.is_classification())
            throw ValidationError("ridge_regression requires a regression task");
    }
    reward_mechanism().validate(learners.size());
}

RewardMechanism RunConfig::reward_mechanism() const {
    if (mechanism == RewardMode::Deterministic) return RewardMechanism::deterministic();
    if (rho.empty()) return RewardMechanism::uniform(learners.size());
    return {RewardMode::Stochastic, rho};
}

std::vector<LearnerSpec> seeded_learners(std::span<const LearnerKind> kinds, std::uint64_t master_seed,
                                         std::string_view stream) {
    std::vector<LearnerSpec> specs;
    for (std::size_t k = 0; k < kinds.size(); ++k)
        specs.push_back({kinds[k], LearnerHyperparameters{}, Rng::derive_seed(master_seed, stream, k)});
    return specs;
}

namespace {

struct SideData {
    Eigen::MatrixXd features;
    Eigen::VectorXd targets;
};

SideData gather(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
    SideData side;
    side.features.resize(static_cast<Eigen::Index>(rows.size()), ds.dim());
    side.targets.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        side.features.row(static_cast<Eigen::Index>(k)) = ds.features.row(rows[k]);
        side.targets[static_cast<Eigen::Index>(k)] = ds.targets[rows[k]];
    }
    return side;
}

// Fits each listed learner on train and predicts test. Results come back in
// `which` order regardless of execution order.
std::vector<Eigen::MatrixXd> fit_and_predict(std::span<const LearnerSpec> learners, const std::vector<std::size_t>& which,
                                             const SideData& train, const SideData& test, TaskKind task,
                                             bool concurrent) {
    const auto job = [&](std::size_t k) {
        const FittedModel model = fit(learners[k], train.features, train.targets, task);
        return model.predict(test.features);
    };
    std::vector<Eigen::MatrixXd> out;
    out.reserve(which.size());
    if (concurrent && which.size() > 1) {
        std::vector<std::future<Eigen::MatrixXd>> futures;
        for (const std::size_t k : which) futures.push_back(std::async(std::launch::async, job, k));
        for (auto& f : futures) out.push_back(f.get());
    } else {
        for (const std::size_t k : which) out.push_back(job(k));
    }
    return out;
}

void require_min_class_count(const Dataset& ds) {
    if (!ds.task.is_classification()) return;
    std::vector<Eigen::Index> all(static_cast<std::size_t>(ds.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    const auto counts = class_counts(ds, all);
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] == 1)
            throw ValidationError("class " + std::to_string(c) + " has a single sample; each class needs >= 2");
}

double mean_of(const std::vector<EpisodeLog>& logs, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += logs[i].reward_shaped;
    return s / static_cast<double>(end - begin);
}

bool converged(const std::vector<EpisodeLog>& logs, int window) {
    if (window <= 0) return false;
    const auto w = static_cast<std::size_t>(window);
    if (logs.size() < 2 * w) return false;
    const std::size_t n = logs.size();
    double lo = INFINITY;
    double hi = -INFINITY;
    for (std::size_t i = n - w; i < n; ++i) {
        lo = std::min(lo, logs[i].greedy_ratio);
        hi = std::max(hi, logs[i].greedy_ratio);
    }
    const bool ratio_stable = hi - lo <= 0.01;
    const bool reward_flat = mean_of(logs, n - w, n) <= mean_of(logs, n - 2 * w, n - w);
    return ratio_stable && reward_flat;
}

}  // namespace

RunResult run_rds(const Dataset& dataset, const RunConfig& config, const EpisodeCallback& on_episode) {
    dataset.validate();
    config.validate(dataset.task);
    require_min_class_count(dataset);

    const TaskKind task = dataset.task;
    const PolicyData data = PolicyData::from_dataset(dataset);
    const RewardMechanism mechanism = config.reward_mechanism();
    const Rng master(config.seed);

    const int target_width = data.input_size() - static_cast<int>(dataset.dim());
    PolicyParams initial = init_policy(static_cast<int>(dataset.dim()), target_width, config.hidden_size,
                                       Rng::derive_seed(config.seed, "policy_init"));

    RunResult result;
    result.pretrain = pretrain(initial, data, config.ratio, config.pretrain_passes, config.pretrain_learning_rate);
    PolicyParams policy = result.pretrain.policy;
    OptimizerState optimizer = OptimizerState::for_policy(policy, config.learning_rate);

    Rng trajectory_rng = master.derive("trajectory");
    Rng rho_rng = master.derive("rho");

    const std::size_t k_learners = config.learners.size();
    std::vector<std::size_t> all_learners(k_learners);
    std::iota(all_learners.begin(), all_learners.end(), std::size_t{0});

    std::optional<double> worst_reward;
    // One moving average per learner under the stochastic mechanism, one in total otherwise.
    std::vector<std::optional<double>> moving_baselines(mechanism.mode == RewardMode::Stochastic ? k_learners : 1);
    int failed_count = 0;
    result.best_sampled_reward = -std::numeric_limits<double>::infinity();

    for (int episode = 0; episode < config.episodes; ++episode) {
        const auto started = std::chrono::steady_clock::now();
        EpisodeLog log;
        log.episode = episode;
        log.learner_metrics.assign(k_learners, std::numeric_limits<double>::quiet_NaN());

        const Trajectory trajectory = sample_trajectory(policy, data, trajectory_rng);
        const SplitAssignment split = trajectory.assignment();
        log.ratio = split.achieved_ratio;
        log.mean_prob = trajectory.mean_action_prob();
        if (mechanism.mode == RewardMode::Stochastic) log.chosen_learner = choose_learner(mechanism, rho_rng);

        double reward = 0.0;
        double shaped = 0.0;
        double iid_shaping = 0.0;
        try {
            if (!split.valid()) throw DegenerateSplitError("sampled split has an empty side");
            const auto train_rows = split.train_rows();
            const auto test_rows = split.test_rows();
            const SideData train = gather(dataset, train_rows);
            const SideData test = gather(dataset, test_rows);
            const std::vector<std::size_t> which =
                log.chosen_learner ? std::vector<std::size_t>{*log.chosen_learner} : all_learners;
            const std::vector<Eigen::MatrixXd> predictions =
                fit_and_predict(config.learners, which, train, test, task, config.concurrent_learners);
            for (std::size_t i = 0; i < which.size(); ++i)
                log.learner_metrics[which[i]] = metric_value(config.metric, task, predictions[i], test.targets);
            reward = episode_return(mechanism, predictions, test.targets, config.metric, task);
            shaped = reward;
            if (!task.is_classification() && config.psi > 0.0) {
                const std::vector<double> test_y(test.targets.data(), test.targets.data() + test.targets.size());
                const std::vector<double> train_y(train.targets.data(), train.targets.data() + train.targets.size());
                const double kl = std::max(0.0, kl_continuous_perez_cruz(test_y, train_y, config.knn_k));
                iid_shaping = config.psi * kl;
                shaped = reward - iid_shaping;
            }
            if (!std::isfinite(shaped)) throw DivergenceError("non-finite episode return");
        } catch (const Error& e) {
            log.failed = true;
            log.failure = e.what();
        }

        if (log.failed) {
            ++failed_count;
            reward = shaped = worst_reward.value_or(0.0);
        } else {
            worst_reward = worst_reward ? std::min(*worst_reward, shaped) : shaped;
            if (shaped > result.best_sampled_reward) {
                result.best_sampled_reward = shaped;
                result.best_sampled = split;
            }
        }
        log.reward = reward;
        log.reward_shaped = shaped;

        double signal = shaped;
        if (config.baseline_subtraction) {
            auto& moving = moving_baselines[log.chosen_learner.value_or(0)];
            const double b = moving.value_or(shaped);
            signal = shaped - b;
            // Failure rewards are synthetic; letting them into the average would cancel their penalty.
            if (!log.failed) moving = config.baseline_decay * b + (1.0 - config.baseline_decay) * shaped;
        }

        const LossTerms terms{config.alpha, config.gamma, task.is_classification() ? config.psi : 0.0, config.ratio,
                              signal};
        auto [loss, grads] = compute_loss_and_grads(policy, trajectory, data, terms);
        if (!task.is_classification()) loss.iid = iid_shaping;
        log.loss = loss;
        if (config.warmup_episodes > 0)
            optimizer.learning_rate =
                config.learning_rate * std::min(1.0, (episode + 1) / static_cast<double>(config.warmup_episodes));
        rmsprop_update(policy, grads, optimizer);
        if (!policy.all_finite()) throw DivergenceError("policy parameters became non-finite");

        log.greedy_ratio = SplitAssignment::from_actions(greedy_actions(policy, data)).achieved_ratio;
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.episodes.push_back(log);
        if (on_episode) on_episode(result.episodes.back());

        if (2 * failed_count > config.episodes)
            throw RunAborted("more than half of the episodes failed (" + std::to_string(failed_count) + " of " +
                             std::to_string(config.episodes) + "); last failure: " + log.failure);
        if (converged(result.episodes, config.convergence_window)) {
            result.early_stopped = true;
            break;
        }
    }

    result.policy = policy;
    try {
        result.split = greedy_decode(policy, data);
    } catch (const DegenerateSplitError& e) {
        if (!result.best_sampled)
            throw RunAborted(std::string("greedy split is degenerate and no valid sampled split exists: ") + e.what());
        result.split = *result.best_sampled;
        result.greedy_fallback = true;
    }
    return result;
}

SplitAssignment baseline_random(const Dataset& dataset, double r, std::uint64_t seed) {
    if (!(r > 0.0 && r < 1.0)) throw ValidationError("ratio must lie in (0, 1)");
    const auto m = static_cast<std::size_t>(dataset.size());
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = m; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(r * static_cast<double>(m)));
    std::vector<Action> actions(m, Action::Test);
    for (std::size_t k = 0; k < n_train; ++k) actions[order[k]] = Action::Train;
    return SplitAssignment::from_actions(std::move(actions));
}

SplitAssignment baseline_stratified(const Dataset& dataset, double r, std::uint64_t seed) {
    if (!(r > 0.0 && r < 1.0)) throw ValidationError("ratio must lie in (0, 1)");
    if (!dataset.task.is_classification()) throw ValidationError("stratified requires classification");
    const auto m = static_cast<std::size_t>(dataset.size());
    const auto classes = static_cast<std::size_t>(dataset.task.num_classes);
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < m; ++i) members[static_cast<std::size_t>(dataset.label(static_cast<Eigen::Index>(i)))].push_back(i);
    for (std::size_t c = 0; c < classes; ++c)
        if (members[c].size() == 1)
            throw ValidationError("stratified: class " + std::to_string(c) + " has a single sample");

    const auto total = static_cast<std::size_t>(std::llround(r * static_cast<double>(m)));
    std::vector<double> quota(classes);
    std::vector<std::size_t> alloc(classes);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        quota[c] = static_cast<double>(total) * static_cast<double>(members[c].size()) / static_cast<double>(m);
        alloc[c] = static_cast<std::size_t>(std::floor(quota[c]));
        assigned += alloc[c];
    }
    // Largest remainder; ties go to the lower class index.
    std::vector<std::size_t> by_remainder(classes);
    std::iota(by_remainder.begin(), by_remainder.end(), std::size_t{0});
    std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
        return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
    });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % classes) {
        const std::size_t c = by_remainder[k];
        if (alloc[c] < members[c].size()) {
            ++alloc[c];
            ++assigned;
        }
    }

    // Keep every class with >= 2 samples on both sides, moving single units
    // to or from the class with the most slack relative to its quota.
    const auto lower = [&](std::size_t c) -> std::size_t { return members[c].size() >= 2 ? 1 : 0; };
    const auto upper = [&](std::size_t c) -> std::size_t {
        return members[c].size() >= 2 ? members[c].size() - 1 : members[c].size();
    };
    for (std::size_t c = 0; c < classes; ++c) {
        while (alloc[c] < lower(c) || alloc[c] > upper(c)) {
            const bool raise = alloc[c] < lower(c);
            std::optional<std::size_t> donor;
            double best = -INFINITY;
            for (std::size_t o = 0; o < classes; ++o) {
                if (o == c) continue;
                const double slack = raise ? static_cast<double>(alloc[o]) - quota[o] : quota[o] - static_cast<double>(alloc[o]);
                const bool movable = raise ? alloc[o] > lower(o) : alloc[o] < upper(o);
                if (movable && slack > best) {
                    best = slack;
                    donor = o;
                }
            }
            if (!donor) throw ValidationError("stratified: cannot place every class on both sides");
            if (raise) {
                ++alloc[c];
                --alloc[*donor];
            } else {
                --alloc[c];
                ++alloc[*donor];
            }
        }
    }

    Rng rng(seed);
    std::vector<Action> actions(m, Action::Test);
    for (std::size_t c = 0; c < classes; ++c) {
        Rng stream = rng.derive("class", c);
        auto& idx = members[c];
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[stream.below(i)]);
        for (std::size_t k = 0; k < alloc[c]; ++k) actions[idx[k]] = Action::Train;
    }
    return SplitAssignment::from_actions(std::move(actions));
}

SplitEvaluation evaluate_split(const Dataset& dataset, const SplitAssignment& assignment,
                               std::span<const LearnerSpec> learners, MetricKind metric) {
    if (static_cast<Eigen::Index>(assignment.size()) != dataset.size())
        throw ValidationError("assignment length does not match dataset size");
    if (!assignment.valid()) throw DegenerateSplitError("cannot evaluate a split with an empty side");
    if (learners.empty()) throw ValidationError("at least one learner is required");
    check_metric_compatible(metric, dataset.task);

    const auto train_rows = assignment.train_rows();
    const auto test_rows = assignment.test_rows();
    const SideData train = gather(dataset, train_rows);
    const SideData test = gather(dataset, test_rows);
    std::vector<std::size_t> all(learners.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto predictions = fit_and_predict(learners, all, train, test, dataset.task, false);

    SplitEvaluation out;
    for (const auto& p : predictions) out.learner_metrics.push_back(metric_value(metric, dataset.task, p, test.targets));
    out.ensemble_metric = metric_value(metric, dataset.task, soft_vote(predictions, dataset.task.is_classification()),
                                       test.targets);
    out.n_train = assignment.n_train;
    out.n_test = assignment.n_test;
    if (dataset.task.is_classification()) {
        out.train_class_pmf = class_pmf(dataset, train_rows);
        out.test_class_pmf = class_pmf(dataset, test_rows);
    }
    return out;
}

Dataset synth_madelon(int n_samples, int n_informative, int n_distractors, double class_sep, std::uint64_t seed,
                      double positive_fraction) {
    if (n_samples < 4 || n_informative < 1 || n_distractors < 0)
        throw ValidationError("synth_madelon: counts must be positive");
    if (!(positive_fraction > 0.0 && positive_fraction < 1.0))
        throw ValidationError("synth_madelon: positive_fraction must lie in (0, 1)");
    const Rng base(seed);
    Rng layout = base.derive("layout");
    Rng noise = base.derive("noise");
    Rng order_rng = base.derive("order");

    const Eigen::Index d = n_informative + n_distractors;
    // Class axis and a within-class cluster offset, both on hypercube corners.
    Eigen::VectorXd axis(n_informative);
    Eigen::MatrixXd offsets(2, n_informative);
    for (Eigen::Index j = 0; j < n_informative; ++j) axis[j] = layout.uniform() < 0.5 ? -1.0 : 1.0;
    for (Eigen::Index c = 0; c < 2; ++c)
        for (Eigen::Index j = 0; j < n_informative; ++j) offsets(c, j) = layout.uniform() < 0.5 ? -1.0 : 1.0;

    const auto positives =
        std::clamp<long long>(std::llround(positive_fraction * n_samples), 1, static_cast<long long>(n_samples) - 1);
    std::vector<int> labels(static_cast<std::size_t>(n_samples), 0);
    std::fill(labels.begin(), labels.begin() + positives, 1);
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[order_rng.below(i)]);

    Dataset ds;
    ds.task = TaskKind::binary();
    ds.features.resize(n_samples, d);
    ds.targets.resize(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        const double sign = y == 1 ? 1.0 : -1.0;
        const double cluster = noise.uniform() < 0.5 ? -1.0 : 1.0;
        for (Eigen::Index j = 0; j < n_informative; ++j)
            ds.features(i, j) = 0.5 * class_sep * (sign * axis[j] + cluster * offsets(y, j)) + noise.normal();
        for (Eigen::Index j = n_informative; j < d; ++j) ds.features(i, j) = noise.normal();
        ds.targets[i] = y;
        ds.ids.push_back(std::to_string(i));
    }
    for (Eigen::Index j = 0; j < d; ++j)
        ds.feature_names.push_back((j < n_informative ? "inf_" : "dis_") + std::to_string(j));
    return ds;
}

Dataset synth_linear(int n_samples, int n_features, double noise, std::uint64_t seed) {
    if (n_samples < 4 || n_features < 1) throw ValidationError("synth_linear: counts must be positive");
    const Rng base(seed);
    Rng weights_rng = base.derive("weights");
    Rng sample_rng = base.derive("samples");
    Eigen::VectorXd w(n_features);
    for (Eigen::Index j = 0; j < n_features; ++j) w[j] = weights_rng.normal();
    Dataset ds;
    ds.task = TaskKind::regression();
    ds.features.resize(n_samples, n_features);
    ds.targets.resize(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        for (Eigen::Index j = 0; j < n_features; ++j) ds.features(i, j) = sample_rng.normal();
        ds.targets[i] = ds.features.row(i).dot(w) + noise * sample_rng.normal();
        ds.ids.push_back(std::to_string(i));
    }
    for (Eigen::Index j = 0; j < n_features; ++j) ds.feature_names.push_back("x" + std::to_string(j));
    return ds;
}

}  // namespace rds
