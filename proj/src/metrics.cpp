#include "rds/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rds/error.hpp"

namespace rds {

std::string_view to_string(MetricKind metric) {
    switch (metric) {
        case MetricKind::Auc: return "auc";
        case MetricKind::MicroF1: return "micro_f1";
        case MetricKind::RSquared: return "r2";
    }
    return "unknown";
}

MetricKind metric_kind_from_string(std::string_view name) {
    if (name == "auc") return MetricKind::Auc;
    if (name == "micro_f1" || name == "f1") return MetricKind::MicroF1;
    if (name == "r2" || name == "r_squared") return MetricKind::RSquared;
    throw ValidationError("unknown metric '" + std::string(name) + "'");
}

void check_metric_compatible(MetricKind metric, TaskKind task) {
    switch (metric) {
        case MetricKind::Auc:
            if (task.type != TaskType::BinaryClassification)
                throw ValidationError("auc requires a binary classification task");
            return;
        case MetricKind::MicroF1:
            if (!task.is_classification()) throw ValidationError("micro_f1 requires a classification task");
            return;
        case MetricKind::RSquared:
            if (task.is_classification()) throw ValidationError("r2 requires a regression task");
            return;
    }
}

double auc(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) throw ValidationError("auc: labels and scores differ in length");
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of midranks of the positives.
    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                positive_rank_sum += midrank;
                ++positives;
            } else if (labels[order[k]] != 0) {
                throw ValidationError("auc: labels must be 0 or 1");
            }
        }
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw ValidationError("auc: single-class labels");
    const double np = static_cast<double>(positives);
    const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(negatives));
}

double micro_f1(std::span<const int> labels, std::span<const int> predictions) {
    if (labels.size() != predictions.size()) throw ValidationError("micro_f1: lengths differ");
    if (labels.empty()) throw ValidationError("micro_f1: empty input");
    // Micro TP summed over classes is the diagonal count; every miss is
    // simultaneously one FP and one FN, so precision = recall = accuracy.
    std::size_t tp = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) tp += labels[i] == predictions[i] ? 1 : 0;
    const double fp = static_cast<double>(labels.size() - tp);
    const double fn = fp;
    const double t = static_cast<double>(tp);
    if (t == 0.0) return 0.0;
    return 2.0 * t / (2.0 * t + fp + fn);
}

double r_squared(std::span<const double> targets, std::span<const double> predictions) {
    if (targets.size() != predictions.size()) throw ValidationError("r2: lengths differ");
    if (targets.size() < 2) throw ValidationError("r2: need at least 2 targets");
    const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
        ss_tot += (targets[i] - mean) * (targets[i] - mean);
    }
    if (ss_tot == 0.0) throw ValidationError("r2: constant targets");
    return 1.0 - ss_res / ss_tot;
}

Eigen::MatrixXd soft_vote(std::span<const Eigen::MatrixXd> per_learner, bool probability_rows) {
    if (per_learner.empty()) throw ValidationError("soft_vote: no predictions");
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(per_learner.front().rows(), per_learner.front().cols());
    for (const auto& p : per_learner) {
        if (p.rows() != mean.rows() || p.cols() != mean.cols()) throw ValidationError("soft_vote: shape mismatch");
        mean += p;
    }
    mean /= static_cast<double>(per_learner.size());
    if (probability_rows) {
        for (Eigen::Index i = 0; i < mean.rows(); ++i) {
            const double s = mean.row(i).sum();
            if (std::abs(s - 1.0) > 1e-9 && s > 0.0) mean.row(i) /= s;
        }
    }
    return mean;
}

double metric_value(MetricKind metric, TaskKind task, const Eigen::MatrixXd& predictions,
                    const Eigen::VectorXd& targets) {
    check_metric_compatible(metric, task);
    if (predictions.rows() != targets.size()) throw ValidationError("metric: prediction/target count mismatch");
    const auto n = static_cast<std::size_t>(targets.size());
    switch (metric) {
        case MetricKind::Auc: {
            std::vector<int> labels(n);
            std::vector<double> scores(n);
            for (std::size_t i = 0; i < n; ++i) {
                labels[i] = static_cast<int>(targets[static_cast<Eigen::Index>(i)]);
                scores[i] = predictions(static_cast<Eigen::Index>(i), 1);
            }
            return auc(labels, scores);
        }
        case MetricKind::MicroF1: {
            std::vector<int> labels(n);
            std::vector<int> decided(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto row = static_cast<Eigen::Index>(i);
                labels[i] = static_cast<int>(targets[row]);
                Eigen::Index best = 0;
                predictions.row(row).maxCoeff(&best);
                decided[i] = static_cast<int>(best);
            }
            return micro_f1(labels, decided);
        }
        case MetricKind::RSquared: {
            std::vector<double> t(targets.data(), targets.data() + targets.size());
            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i) p[i] = predictions(static_cast<Eigen::Index>(i), 0);
            return r_squared(t, p);
        }
    }
    throw ValidationError("unknown metric");
}

RewardMechanism RewardMechanism::stochastic(std::vector<double> rho) {
    RewardMechanism m{RewardMode::Stochastic, std::move(rho)};
    m.validate(m.rho.size());
    return m;
}

RewardMechanism RewardMechanism::uniform(std::size_t num_learners) {
    if (num_learners == 0) throw ValidationError("rho needs at least one learner");
    return {RewardMode::Stochastic, std::vector<double>(num_learners, 1.0 / static_cast<double>(num_learners))};
}

void RewardMechanism::validate(std::size_t num_learners) const {
    if (mode == RewardMode::Deterministic) return;
    if (rho.size() != num_learners)
        throw ValidationError("rho has " + std::to_string(rho.size()) + " entries for " +
                              std::to_string(num_learners) + " learners");
    double sum = 0.0;
    for (const double w : rho) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("rho entries must be finite and nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("rho must sum to 1");
}

std::size_t choose_learner(const RewardMechanism& mechanism, Rng& episode_rng) {
    if (mechanism.mode != RewardMode::Stochastic)
        throw ValidationError("choose_learner: mechanism is deterministic");
    if (mechanism.rho.empty()) throw ValidationError("choose_learner: empty rho");
    const double u = episode_rng.uniform();
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < mechanism.rho.size(); ++k) {
        if (mechanism.rho[k] <= 0.0) continue;
        last_positive = k;
        cumulative += mechanism.rho[k];
        if (u < cumulative) return k;
    }
    return last_positive;
}

double episode_return(const RewardMechanism& mechanism, std::span<const Eigen::MatrixXd> predictions,
                      const Eigen::VectorXd& test_targets, MetricKind metric, TaskKind task) {
    if (predictions.empty()) throw ValidationError("episode_return: no predictions");
    if (mechanism.mode == RewardMode::Stochastic) {
        if (predictions.size() != 1)
            throw ValidationError("episode_return: stochastic mode scores exactly the chosen learner");
        return metric_value(metric, task, predictions.front(), test_targets);
    }
    return metric_value(metric, task, soft_vote(predictions, task.is_classification()), test_targets);
}

double episode_return(const RewardMechanism& mechanism, std::span<const FittedModel> models,
                      const Eigen::MatrixXd& test_features, const Eigen::VectorXd& test_targets, MetricKind metric) {
    if (models.empty()) throw ValidationError("episode_return: no models");
    std::vector<Eigen::MatrixXd> predictions;
    predictions.reserve(models.size());
    for (const auto& m : models) predictions.push_back(m.predict(test_features));
    return episode_return(mechanism, predictions, test_targets, metric, models.front().task());
}

}  // namespace rds
