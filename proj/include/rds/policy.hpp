#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "rds/dataset.hpp"
#include "rds/rng.hpp"
#include "rds/split.hpp"

namespace rds {

/// GRU cell weights plus the two-logit (train, test) linear head.
///
///   r  = sigmoid(W_r x + U_r h + b_r)
///   z  = sigmoid(W_z x + U_z h + b_z)
///   n  = tanh(W_n x + r * (U_n h) + b_n)
///   h' = (1 - z) * n + z * h
///   p_train = softmax(V h' + c)[train]
struct PolicyParams {
    static constexpr std::size_t kBlockCount = 11;

    int input_size = 0;   // E = D + target encoding width
    int hidden_size = 0;  // H
    std::uint64_t seed = 0;

    Eigen::MatrixXd reset_input, reset_recurrent, reset_bias;              // H x E, H x H, H x 1
    Eigen::MatrixXd update_input, update_recurrent, update_bias;           // H x E, H x H, H x 1
    Eigen::MatrixXd candidate_input, candidate_recurrent, candidate_bias;  // H x E, H x H, H x 1
    Eigen::MatrixXd head_weights;                                          // 2 x H, row 0 = train
    Eigen::MatrixXd head_bias;                                             // 2 x 1

    static PolicyParams zeros(int input_size, int hidden_size);
    PolicyParams zeros_like() const { return zeros(input_size, hidden_size); }

    std::array<Eigen::MatrixXd*, kBlockCount> blocks();
    std::array<const Eigen::MatrixXd*, kBlockCount> blocks() const;
    static const std::array<std::string_view, kBlockCount>& block_names();

    std::size_t parameter_count() const;
    bool all_finite() const;

    friend bool operator==(const PolicyParams& a, const PolicyParams& b);
};

/// Seeded uniform initialization in [-1/sqrt(H), 1/sqrt(H)].
PolicyParams init_policy(int feature_dim, int target_width, int hidden_size, std::uint64_t seed);

/// Encodes a target for the policy input: one-hot for classification, a
/// single z-scored scalar for regression.
class TargetEncoder {
public:
    static TargetEncoder fit(const Dataset& dataset);
    static TargetEncoder for_classes(TaskKind task);

    int width() const;
    Eigen::VectorXd encode(double y) const;

private:
    TaskKind task_;
    double mean_ = 0.0;
    double stddev_ = 1.0;
};

inline Eigen::VectorXd encode_target(double y, const TargetEncoder& encoder) { return encoder.encode(y); }

/// The dataset as the policy observes it: full-dataset z-scored features
/// concatenated with the encoded target, one row per step.
struct PolicyData {
    Eigen::MatrixXd inputs;  // M x E
    TaskKind task;
    std::vector<int> labels;  // classification only

    static PolicyData from_dataset(const Dataset& dataset);

    Eigen::Index steps() const { return inputs.rows(); }
    int input_size() const { return static_cast<int>(inputs.cols()); }
};

inline constexpr double kMinActionProb = 1e-6;
inline constexpr double kMaxActionProb = 1.0 - 1e-6;

/// Whether the hidden state produced at a step becomes the memory carried to
/// the next step. Samples assigned to test are skipped from memory.
constexpr bool carries_hidden(Action action) { return action == Action::Train; }

struct StepResult {
    Eigen::VectorXd hidden;
    double p_train = 0.5;  // clamped to [kMinActionProb, kMaxActionProb]
};

/// One GRU step from the retained hidden state. Throws DivergenceError on a
/// non-finite intermediate.
StepResult step(const PolicyParams& policy, const Eigen::VectorXd& retained_hidden, const Eigen::VectorXd& input);

/// Forward activations of one step, kept for backpropagation.
struct StepTrace {
    Eigen::VectorXd hidden_in;
    Eigen::VectorXd reset;
    Eigen::VectorXd update;
    Eigen::VectorXd candidate;
    Eigen::VectorXd recurrent_candidate;  // U_n h_in
    Eigen::VectorXd hidden_out;
    bool clamped = false;
};

struct Trajectory {
    std::vector<double> action_probs;  // p(train | s_t)
    std::vector<Action> actions;
    double log_prob = 0.0;
    std::vector<StepTrace> trace;

    double mean_action_prob() const;
    SplitAssignment assignment() const { return SplitAssignment::from_actions(actions); }
};

Trajectory sample_trajectory(const PolicyParams& policy, const PolicyData& data, Rng& rng);

/// Re-runs the policy along fixed actions (teacher forcing).
Trajectory replay_trajectory(const PolicyParams& policy, const PolicyData& data, std::span<const Action> actions);

/// Per-step argmax actions, ties (p = 0.5) to train. Never throws on a
/// degenerate result.
std::vector<Action> greedy_actions(const PolicyParams& policy, const PolicyData& data);

/// Greedy split; throws DegenerateSplitError if either side is empty.
SplitAssignment greedy_decode(const PolicyParams& policy, const PolicyData& data);

struct LossTerms {
    double alpha = 1.0;
    double gamma = 0.9;
    double psi = 0.1;
    double ratio = 0.75;
    double shaped_return = 0.0;
};

struct LossBreakdown {
    double theta = 0.0;  // -alpha * log_prob * R
    double ratio = 0.0;  // gamma * |mean p - r|
    double iid = 0.0;    // psi * KL(p_test || p_train), soft, classification only
    double total() const { return theta + ratio + iid; }
};

/// Total loss of `trajectory` under `policy` and its exact gradient by
/// backpropagation through the retained-hidden graph.
std::pair<LossBreakdown, PolicyParams> compute_loss_and_grads(const PolicyParams& policy, const Trajectory& trajectory,
                                                              const PolicyData& data, const LossTerms& terms);

/// Loss value only (used by finite-difference checks).
LossBreakdown compute_loss(const PolicyParams& policy, std::span<const Action> actions, const PolicyData& data,
                           const LossTerms& terms);

struct OptimizerState {
    PolicyParams accumulators;
    long steps = 0;
    double learning_rate = 1e-3;
    double decay = 0.99;
    double epsilon = 1e-8;

    static OptimizerState for_policy(const PolicyParams& policy, double learning_rate = 1e-3, double decay = 0.99,
                                     double epsilon = 1e-8);
};

/// acc <- d * acc + (1 - d) * g^2;  theta <- theta - lr * g / (sqrt(acc) + eps)
void rmsprop_update(PolicyParams& policy, const PolicyParams& gradients, OptimizerState& state);

struct PretrainResult {
    PolicyParams policy;
    int passes = 0;
    double mean_prob = 0.0;
    bool converged = false;
};

/// Fits p_train to the constant `ratio` by binary cross-entropy over passes
/// through the data (hidden carry follows greedy actions) until
/// |mean p - ratio| <= 0.01 or `max_passes` is reached. On non-convergence
/// returns the best pass seen with `converged = false`.
PretrainResult pretrain(const PolicyParams& policy, const PolicyData& data, double ratio, int max_passes,
                        double learning_rate = 1e-2);

void save_policy(const PolicyParams& policy, std::ostream& out);
PolicyParams load_policy(std::istream& in);

}  // namespace rds
