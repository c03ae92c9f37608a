#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "rds/error.hpp"
#include "rds/metrics.hpp"
#include "rds/rng.hpp"

using namespace rds;

namespace {

double brute_force_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    double credit = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) credit += 1.0;
            else if (scores[i] == scores[j]) credit += 0.5;
        }
    }
    return credit / pairs;
}

double accuracy_oracle(const std::vector<int>& labels, const std::vector<int>& predictions) {
    int hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += labels[i] == predictions[i];
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double r2_oracle(const std::vector<double>& y, const std::vector<double>& f) {
    double mean = 0.0;
    for (const double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - f[i]) * (y[i] - f[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    return 1.0 - ss_res / ss_tot;
}

Eigen::MatrixXd rows(std::initializer_list<std::array<double, 2>> values) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 2);
    Eigen::Index i = 0;
    for (const auto& r : values) {
        m(i, 0) = r[0];
        m(i, 1) = r[1];
        ++i;
    }
    return m;
}

}  // namespace

TEST_CASE("auc examples") {
    CHECK(auc(std::vector<int>{1, 1, 0, 0}, std::vector<double>{.9, .8, .2, .1}) == 1.0);
    CHECK(auc(std::vector<int>{1, 0}, std::vector<double>{.5, .5}) == 0.5);
    CHECK(auc(std::vector<int>{1, 0, 1, 0}, std::vector<double>{.9, .8, .7, .1}) == 0.75);
    CHECK_THROWS_AS(auc(std::vector<int>{1, 1}, std::vector<double>{.1, .2}), ValidationError);
    CHECK_THROWS_AS(auc(std::vector<int>{1, 0}, std::vector<double>{.1}), ValidationError);
}

TEST_CASE("auc matches brute-force pair counting on random instances") {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(49);
        std::vector<int> labels(n);
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = rng.bernoulli(0.4) ? 1 : 0;
            scores[i] = static_cast<double>(rng.below(8)) / 8.0;  // coarse grid forces ties
        }
        labels[0] = 1;
        labels[1] = 0;
        worst = std::max(worst, std::abs(auc(labels, scores) - brute_force_auc(labels, scores)));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("micro_f1 equals accuracy") {
    CHECK(micro_f1(std::vector<int>{0, 1, 2, 2}, std::vector<int>{0, 1, 2, 1}) == 0.75);
    CHECK(micro_f1(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}) == 1.0);
    CHECK(micro_f1(std::vector<int>{0, 1, 2}, std::vector<int>{1, 2, 0}) == 0.0);
    CHECK_THROWS_AS(micro_f1(std::vector<int>{}, std::vector<int>{}), ValidationError);

    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(50);
        std::vector<int> labels(n);
        std::vector<int> predictions(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.below(4));
            predictions[i] = static_cast<int>(rng.below(4));
        }
        CHECK(std::abs(micro_f1(labels, predictions) - accuracy_oracle(labels, predictions)) <= 1e-12);
    }
}

TEST_CASE("r_squared follows its definition") {
    CHECK(r_squared(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 4}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r_squared(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 1.0);
    CHECK(r_squared(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 2}) == 0.0);
    CHECK_THROWS_AS(r_squared(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), ValidationError);
    CHECK_THROWS_AS(r_squared(std::vector<double>{2}, std::vector<double>{2}), ValidationError);

    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(49);
        std::vector<double> y(n);
        std::vector<double> f(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.normal();
            f[i] = y[i] + 0.5 * rng.normal();
        }
        CHECK(std::abs(r_squared(y, f) - r2_oracle(y, f)) <= 1e-12);
    }
}

TEST_CASE("metric compatibility gates") {
    CHECK_NOTHROW(check_metric_compatible(MetricKind::Auc, TaskKind::binary()));
    CHECK_THROWS_AS(check_metric_compatible(MetricKind::Auc, TaskKind::multiclass(3)), ValidationError);
    CHECK_NOTHROW(check_metric_compatible(MetricKind::MicroF1, TaskKind::multiclass(3)));
    CHECK_THROWS_AS(check_metric_compatible(MetricKind::MicroF1, TaskKind::regression()), ValidationError);
    CHECK_THROWS_AS(check_metric_compatible(MetricKind::RSquared, TaskKind::binary()), ValidationError);
    CHECK(metric_kind_from_string(to_string(MetricKind::RSquared)) == MetricKind::RSquared);
}

TEST_CASE("soft_vote averages predictions") {
    const std::vector<Eigen::MatrixXd> probs = {rows({{0.2, 0.8}, {0.6, 0.4}}), rows({{0.4, 0.6}, {0.9, 0.1}})};
    const Eigen::MatrixXd vote = soft_vote(probs, true);
    CHECK(vote(0, 1) == doctest::Approx(0.7));
    CHECK(vote(1, 0) == doctest::Approx(0.75));

    const std::vector<Eigen::MatrixXd> same = {rows({{0.3, 0.7}}), rows({{0.3, 0.7}}), rows({{0.3, 0.7}})};
    CHECK(soft_vote(same, true).isApprox(same[0], 1e-15));

    Eigen::MatrixXd a(2, 1);
    Eigen::MatrixXd b(2, 1);
    a << 1.0, 3.0;
    b << 2.0, 5.0;
    const std::vector<Eigen::MatrixXd> values = {a, b};
    const Eigen::MatrixXd mean = soft_vote(values, false);
    CHECK(mean(0, 0) == 1.5);
    CHECK(mean(1, 0) == 4.0);

    const std::vector<Eigen::MatrixXd> mismatched = {a, rows({{0.5, 0.5}})};
    CHECK_THROWS_AS(soft_vote(mismatched, false), ValidationError);
}

TEST_CASE("auc invariants") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + rng.below(30);
        std::vector<int> labels(n);
        std::vector<double> scores(n);
        std::vector<double> negated(n);
        std::vector<double> transformed(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = i % 2;
            scores[i] = rng.normal();
            negated[i] = -scores[i];
            transformed[i] = std::exp(3.0 * scores[i]) + 1.0;
        }
        CHECK(auc(labels, scores) + auc(labels, negated) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(auc(labels, transformed) == auc(labels, scores));
    }
}

TEST_CASE("soft_vote examples") {
    const std::vector<Eigen::MatrixXd> single = {rows({{0.3, 0.7}, {0.9, 0.1}})};
    CHECK(soft_vote(single, true) == single[0]);

    std::vector<Eigen::MatrixXd> values;
    for (const double v : {0.2, 0.4, 0.6}) values.push_back(Eigen::MatrixXd::Constant(1, 1, v));
    CHECK(soft_vote(values, false)(0, 0) == doctest::Approx(0.4).epsilon(1e-15));

    const std::vector<Eigen::MatrixXd> opposite = {rows({{1, 0}}), rows({{0, 1}})};
    CHECK(soft_vote(opposite, true) == rows({{0.5, 0.5}}));

    const std::vector<Eigen::MatrixXd> forward = {rows({{0.2, 0.8}}), rows({{0.6, 0.4}}), rows({{0.5, 0.5}})};
    const std::vector<Eigen::MatrixXd> backward = {forward[2], forward[1], forward[0]};
    CHECK(soft_vote(forward, true).isApprox(soft_vote(backward, true), 1e-15));

    const std::vector<Eigen::MatrixXd> mismatched = {rows({{0.5, 0.5}}), rows({{0.5, 0.5}, {0.5, 0.5}})};
    CHECK_THROWS_AS(soft_vote(mismatched, true), ValidationError);
}

TEST_CASE("episode return: soft vote of learners scoring 0.6 and 0.8 gives 0.7") {
    // One positive (index 0) and five negatives, so each pair is worth 0.2.
    Eigen::VectorXd targets(6);
    targets << 1, 0, 0, 0, 0, 0;
    const std::vector<double> a_scores = {0.5, 0.1, 0.2, 0.3, 0.7, 0.9};
    const std::vector<double> b_scores = {0.5, 0.1, 0.2, 0.4, 0.3, 0.6};
    auto as_probs = [](const std::vector<double>& s) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(s.size()), 2);
        for (std::size_t i = 0; i < s.size(); ++i) m.row(static_cast<Eigen::Index>(i)) << 1.0 - s[i], s[i];
        return m;
    };
    const std::vector<int> labels = {1, 0, 0, 0, 0, 0};
    std::vector<double> averaged(6);
    for (std::size_t i = 0; i < 6; ++i) averaged[i] = (a_scores[i] + b_scores[i]) / 2.0;
    REQUIRE(brute_force_auc(labels, a_scores) == doctest::Approx(0.6));
    REQUIRE(brute_force_auc(labels, b_scores) == doctest::Approx(0.8));
    REQUIRE(brute_force_auc(labels, averaged) == doctest::Approx(0.7));

    const std::vector<Eigen::MatrixXd> both = {as_probs(a_scores), as_probs(b_scores)};
    CHECK(episode_return(RewardMechanism::deterministic(), both, targets, MetricKind::Auc, TaskKind::binary()) ==
          doctest::Approx(0.7).epsilon(1e-12));

    const std::vector<Eigen::MatrixXd> chosen = {both[1]};
    CHECK(episode_return(RewardMechanism::stochastic({0.0, 1.0}), chosen, targets, MetricKind::Auc,
                         TaskKind::binary()) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK_THROWS_AS(episode_return(RewardMechanism::uniform(2), both, targets, MetricKind::Auc, TaskKind::binary()),
                    ValidationError);

    const std::vector<Eigen::MatrixXd> twins = {both[0], both[0], both[0]};
    CHECK(episode_return(RewardMechanism::deterministic(), twins, targets, MetricKind::Auc, TaskKind::binary()) ==
          doctest::Approx(0.6).epsilon(1e-12));
    const std::vector<Eigen::MatrixXd> one = {both[0]};
    CHECK(episode_return(RewardMechanism::deterministic(), one, targets, MetricKind::Auc, TaskKind::binary()) ==
          episode_return(RewardMechanism::stochastic({1.0}), one, targets, MetricKind::Auc, TaskKind::binary()));
}

TEST_CASE("micro-F1 reward decides by argmax of the averaged probabilities") {
    Eigen::VectorXd targets(3);
    targets << 0, 1, 2;
    Eigen::MatrixXd a(3, 3);
    Eigen::MatrixXd b(3, 3);
    a << 0.6, 0.4, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0;
    b << 0.0, 1.0, 0.0, 0.1, 0.9, 0.0, 0.4, 0.0, 0.6;
    const std::vector<Eigen::MatrixXd> both = {a, b};
    // Averages: row 0 -> [0.3, 0.7, 0] wrong, row 1 -> [0.3, 0.7, 0] right, row 2 -> [0.2, 0, 0.8] right.
    CHECK(episode_return(RewardMechanism::deterministic(), both, targets, MetricKind::MicroF1,
                         TaskKind::multiclass(3)) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("rho validation and learner choice frequencies") {
    CHECK_THROWS_AS(RewardMechanism::stochastic({0.5, 0.6}), ValidationError);
    CHECK_THROWS_AS(RewardMechanism::stochastic({-0.1, 1.1}), ValidationError);
    CHECK_THROWS_AS(RewardMechanism::uniform(3).validate(2), ValidationError);
    Rng det_rng(1);
    CHECK_THROWS_AS(choose_learner(RewardMechanism::deterministic(), det_rng), ValidationError);

    Rng degenerate_rng(3);
    for (int i = 0; i < 100; ++i) CHECK(choose_learner(RewardMechanism::stochastic({1, 0, 0}), degenerate_rng) == 0);

    Rng rng(77);
    std::array<int, 3> counts{};
    for (int i = 0; i < 3000; ++i) counts[choose_learner(RewardMechanism::uniform(3), rng)]++;
    for (const int c : counts) CHECK(std::abs(c / 3000.0 - 1.0 / 3.0) <= 0.05);

    Rng first(42);
    Rng second(42);
    for (int i = 0; i < 50; ++i)
        CHECK(choose_learner(RewardMechanism::uniform(4), first) == choose_learner(RewardMechanism::uniform(4), second));
}
