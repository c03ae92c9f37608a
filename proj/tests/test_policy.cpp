#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gradient_check.hpp"
#include "rds/engine.hpp"
#include "rds/error.hpp"
#include "rds/policy.hpp"

using namespace rds;

namespace {

PolicyData toy_data(int m, int d, std::uint64_t seed, TaskKind task = TaskKind::binary()) {
    Dataset ds;
    ds.task = task;
    Rng rng(seed);
    ds.features.resize(m, d);
    ds.targets.resize(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < d; ++j) ds.features(i, j) = rng.normal();
        ds.targets[i] = task.is_classification() ? static_cast<double>(i % task.num_classes) : rng.normal();
        ds.ids.push_back(std::to_string(i));
    }
    return PolicyData::from_dataset(ds);
}

}  // namespace

TEST_CASE("init_policy is seeded, bounded and shaped by D + target width") {
    const PolicyParams a = init_policy(4, 2, 8, 7);
    const PolicyParams b = init_policy(4, 2, 8, 7);
    CHECK(a == b);
    CHECK_FALSE(a == init_policy(4, 2, 8, 8));
    const double bound = 1.0 / std::sqrt(8.0);
    for (const auto* block : a.blocks()) CHECK(block->cwiseAbs().maxCoeff() <= bound);

    const PolicyParams tiny = init_policy(1, 1, 1, 0);
    CHECK(tiny.reset_input.cols() == 2);
    CHECK(tiny.update_input.cols() == 2);
    CHECK(tiny.candidate_input.cols() == 2);
    CHECK(tiny.head_weights.rows() == 2);
}

TEST_CASE("encode_target") {
    const auto three = TargetEncoder::for_classes(TaskKind::multiclass(3));
    CHECK(encode_target(1, three) == Eigen::Vector3d(0, 1, 0));
    CHECK_THROWS_AS(encode_target(3, three), ValidationError);
    const auto two = TargetEncoder::for_classes(TaskKind::binary());
    CHECK(encode_target(0, two) == Eigen::Vector2d(1, 0));

    Dataset reg;
    reg.task = TaskKind::regression();
    reg.features = Eigen::MatrixXd::Ones(4, 1);
    reg.targets = Eigen::Vector4d(1, 2, 3, 6);
    reg.ids = {"a", "b", "c", "d"};
    const auto enc = TargetEncoder::fit(reg);
    CHECK(encode_target(3.0, enc)[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("step: symmetric logits, purity, hand-computed one-unit cell") {
    PolicyParams zero = PolicyParams::zeros(3, 4);
    const StepResult s = step(zero, Eigen::VectorXd::Zero(4), Eigen::Vector3d(1, -2, 0.5));
    CHECK(s.p_train == 0.5);

    const PolicyParams p = init_policy(2, 1, 5, 3);
    const Eigen::VectorXd h = Eigen::VectorXd::LinSpaced(5, -0.5, 0.5);
    const Eigen::Vector3d x(0.3, -1.0, 1.0);
    const StepResult a = step(p, h, x);
    const StepResult b = step(p, h, x);
    CHECK(a.p_train == b.p_train);
    CHECK(a.hidden == b.hidden);

    // One hidden unit, one input, hand-evaluated.
    PolicyParams u = PolicyParams::zeros(1, 1);
    u.reset_input(0, 0) = 0.5;
    u.reset_recurrent(0, 0) = -0.3;
    u.reset_bias(0, 0) = 0.1;
    u.update_input(0, 0) = -0.2;
    u.update_recurrent(0, 0) = 0.4;
    u.update_bias(0, 0) = 0.05;
    u.candidate_input(0, 0) = 0.7;
    u.candidate_recurrent(0, 0) = 0.6;
    u.candidate_bias(0, 0) = -0.1;
    u.head_weights(0, 0) = 1.5;
    u.head_weights(1, 0) = -0.5;
    u.head_bias(0, 0) = 0.2;
    u.head_bias(1, 0) = 0.0;
    const double hin = 0.25;
    const double xin = -0.8;
    const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double r = sig(0.5 * xin - 0.3 * hin + 0.1);
    const double z = sig(-0.2 * xin + 0.4 * hin + 0.05);
    const double n = std::tanh(0.7 * xin + r * (0.6 * hin) - 0.1);
    const double hout = (1 - z) * n + z * hin;
    const double p_train = sig((1.5 * hout + 0.2) - (-0.5 * hout));
    const StepResult got = step(u, Eigen::VectorXd::Constant(1, hin), Eigen::VectorXd::Constant(1, xin));
    CHECK(std::abs(got.hidden[0] - hout) < 1e-10);
    CHECK(std::abs(got.p_train - p_train) < 1e-10);
}

TEST_CASE("step rejects non-finite input") {
    const PolicyParams p = init_policy(2, 1, 3, 1);
    Eigen::Vector3d x(0, std::nan(""), 1);
    CHECK_THROWS_AS(step(p, Eigen::VectorXd::Zero(3), x), DivergenceError);
}

TEST_CASE("trajectory log-prob equals the sum over stored action probabilities") {
    const PolicyData data = toy_data(30, 3, 11);
    const PolicyParams p = init_policy(3, 2, 6, 5);
    Rng rng(99);
    const Trajectory t = sample_trajectory(p, data, rng);
    double recomputed = 0.0;
    for (std::size_t i = 0; i < t.actions.size(); ++i)
        recomputed += std::log(t.actions[i] == Action::Train ? t.action_probs[i] : 1.0 - t.action_probs[i]);
    CHECK(std::abs(recomputed - t.log_prob) < 1e-10);
    for (const double prob : t.action_probs) CHECK((prob > 0.0 && prob < 1.0));

    Rng rng2(99);
    const Trajectory again = sample_trajectory(p, data, rng2);
    CHECK(again.actions == t.actions);
    CHECK(again.action_probs == t.action_probs);
}

TEST_CASE("saturated train policy: plain recurrence and clamped log-prob") {
    const PolicyData data = toy_data(12, 2, 4);
    PolicyParams p = init_policy(2, 2, 4, 8);
    p.head_bias(0, 0) = 100.0;
    Rng rng(1);
    const Trajectory t = sample_trajectory(p, data, rng);
    for (const Action a : t.actions) CHECK(a == Action::Train);
    CHECK(t.log_prob == doctest::Approx(12 * std::log(1.0 - 1e-6)).epsilon(1e-9));

    Eigen::VectorXd h = Eigen::VectorXd::Zero(4);
    for (Eigen::Index i = 0; i < data.steps(); ++i) h = step(p, h, data.inputs.row(i).transpose()).hidden;
    CHECK((h - t.trace.back().hidden_out).cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS(greedy_decode(p, data), DegenerateSplitError);
}

TEST_CASE("test samples do not update the retained hidden state") {
    const PolicyData data = toy_data(6, 2, 9);
    const PolicyParams p = init_policy(2, 2, 3, 2);
    const std::vector<Action> actions{Action::Train, Action::Test, Action::Test,
                                      Action::Train, Action::Test, Action::Train};
    const Trajectory t = replay_trajectory(p, data, actions);
    CHECK(t.trace[1].hidden_in == t.trace[0].hidden_out);
    CHECK(t.trace[2].hidden_in == t.trace[0].hidden_out);
    CHECK(t.trace[3].hidden_in == t.trace[0].hidden_out);
    CHECK(t.trace[4].hidden_in == t.trace[3].hidden_out);
    CHECK(t.trace[5].hidden_in == t.trace[3].hidden_out);
}

TEST_CASE("greedy decode is deterministic and independent of RNG state") {
    const PolicyData data = toy_data(40, 3, 21);
    PolicyParams p = init_policy(3, 2, 6, 17);
    // Tie-break: an exactly symmetric policy sends everything to train.
    const auto ties = greedy_actions(PolicyParams::zeros(5, 6), data);
    for (const Action a : ties) CHECK(a == Action::Train);

    p.head_weights.row(0) *= 40.0;  // spread the probabilities across 0.5
    const auto a = greedy_actions(p, data);
    Rng noise(5);
    for (int i = 0; i < 100; ++i) noise.next_u64();
    CHECK(greedy_actions(p, data) == a);
}

TEST_CASE("loss terms at their zero points") {
    const PolicyData data = toy_data(10, 4, 3);
    const PolicyParams p = init_policy(4, 2, 8, 31);
    Rng rng(2);
    const Trajectory t = sample_trajectory(p, data, rng);

    LossTerms terms{1.0, 0.0, 0.0, 0.5, 0.0};
    const auto [loss, grads] = compute_loss_and_grads(p, t, data, terms);
    CHECK(loss.theta == 0.0);
    for (const auto* b : grads.blocks()) CHECK(b->cwiseAbs().maxCoeff() == 0.0);

    terms.gamma = 0.9;
    terms.ratio = t.mean_action_prob();
    const auto [loss2, grads2] = compute_loss_and_grads(p, t, data, terms);
    CHECK(loss2.ratio == 0.0);
}

TEST_CASE("analytic policy gradient matches central finite differences") {
    for (const std::uint64_t seed : {1u, 2u, 3u}) {
        const PolicyData data = toy_data(10, 4, 100 + seed);
        const PolicyParams p = init_policy(4, 2, 8, seed);
        Rng rng(seed);
        const Trajectory t = sample_trajectory(p, data, rng);
        // Keep the ratio term away from its kink.
        const LossTerms terms{1.0, 0.9, 0.1, t.mean_action_prob() > 0.5 ? 0.2 : 0.8, 0.73};
        const auto [loss, grads] = compute_loss_and_grads(p, t, data, terms);
        const auto check = testing::check_policy_gradient(p, t.actions, data, terms, grads);
        INFO("seed " << seed << " worst block " << PolicyParams::block_names()[check.worst_block]);
        CHECK(check.compared == p.parameter_count());
        CHECK(check.max_relative_error <= 1e-4);
    }
}

TEST_CASE("rmsprop update rule") {
    PolicyParams p = init_policy(1, 1, 1, 4);
    const PolicyParams before = p;
    OptimizerState state = OptimizerState::for_policy(p);
    rmsprop_update(p, p.zeros_like(), state);
    CHECK(p == before);

    PolicyParams grads = p.zeros_like();
    grads.head_bias(0, 0) = 1.0;
    OptimizerState fresh = OptimizerState::for_policy(p, 0.001, 0.99, 1e-8);
    PolicyParams q = p;
    rmsprop_update(q, grads, fresh);
    CHECK(q.head_bias(0, 0) - p.head_bias(0, 0) == doctest::Approx(-0.001 / (0.1 + 1e-8)).epsilon(1e-12));
    CHECK(fresh.accumulators.head_bias(0, 0) == doctest::Approx(0.01));

    PolicyParams r = p;
    OptimizerState again = OptimizerState::for_policy(p, 0.001, 0.99, 1e-8);
    rmsprop_update(r, grads, again);
    CHECK(r == q);
}

TEST_CASE("pretrain reaches the target ratio") {
    const PolicyData data = toy_data(200, 3, 55);
    for (const double r : {0.5, 0.75, 0.769}) {
        const PretrainResult res = pretrain(init_policy(3, 2, 8, 12), data, r, 300);
        CHECK(res.converged);
        CHECK(std::abs(res.mean_prob - r) <= 0.01);
        Rng rng(3);
        const Trajectory t = sample_trajectory(res.policy, data, rng);
        CHECK(std::abs(t.mean_action_prob() - r) <= 0.05);
    }
    const PretrainResult half = pretrain(init_policy(3, 2, 8, 12), data, 0.5, 300);
    CHECK(half.passes <= 5);
    CHECK_THROWS_AS(pretrain(init_policy(3, 2, 8, 12), data, 1.0, 10), ValidationError);
}

TEST_CASE("policy checkpoint round-trips bit-exactly") {
    PolicyParams p = init_policy(5, 2, 7, 1234);
    p.head_bias(0, 0) = 1.0 / 3.0;
    std::stringstream buf;
    save_policy(p, buf);
    const PolicyParams back = load_policy(buf);
    CHECK(back == p);

    std::stringstream bad("rds-policy 2\n");
    CHECK_THROWS_AS(load_policy(bad), ValidationError);
}
