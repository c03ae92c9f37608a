#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "rds/dataset.hpp"

namespace rds {

enum class LearnerKind { LogisticRegression, RidgeRegression, DecisionTree, RandomForest, Mlp };

std::string_view to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(std::string_view name);

/// Fixed training settings. Only the fields relevant to a spec's kind are
/// read; the defaults are the documented reference configuration.
struct LearnerHyperparameters {
    // LogisticRegression: full-batch gradient descent on mean cross-entropy + l2/2 |W|^2.
    double l2 = 1e-2;
    double tolerance = 1e-6;
    int max_epochs = 500;
    // RidgeRegression: closed-form normal equations.
    double ridge_lambda = 1.0;
    // DecisionTree / RandomForest: CART.
    int max_depth = 8;
    int min_leaf = 2;
    int num_trees = 16;
    int max_features = 0;  // 0: all features for a tree, floor(sqrt(D)) for a forest
    // Mlp: one tanh hidden layer, RMSprop on mini-batches.
    int hidden_units = 64;
    int epochs = 200;
    double learning_rate = 1e-3;
    int batch_size = 32;

    friend bool operator==(const LearnerHyperparameters&, const LearnerHyperparameters&) = default;
};

struct LearnerSpec {
    LearnerKind kind = LearnerKind::LogisticRegression;
    LearnerHyperparameters hyperparameters;
    std::uint64_t seed = 0;

    friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

namespace detail {

struct LinearParams {
    Eigen::MatrixXd weights;  // C x D (classification) or D x 1 (ridge)
    Eigen::VectorXd bias;     // C (classification) or 1
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    Eigen::VectorXd value;  // class proportions or {mean}
};

struct TreeParams {
    std::vector<TreeNode> nodes;
};

struct ForestParams {
    std::vector<TreeParams> trees;
};

struct MlpParams {
    Eigen::MatrixXd w1;  // H x D
    Eigen::VectorXd b1;  // H
    Eigen::MatrixXd w2;  // O x H
    Eigen::VectorXd b2;  // O
    double target_mean = 0.0;  // regression output de-standardization
    double target_scale = 1.0;
};

/// Mean loss of the MLP on (inputs, targets) and, if `grad` is non-null,
/// its gradient. Classification: softmax cross-entropy with integer class
/// targets; regression: half mean squared error on the given targets.
double mlp_loss(const MlpParams& params, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                bool classification, MlpParams* grad);

}  // namespace detail

/// A trained learner. Immutable; `predict` is a pure function of the model
/// and the input features.
class FittedModel {
public:
    using Parameters = std::variant<detail::LinearParams, detail::TreeParams, detail::ForestParams, detail::MlpParams>;

    FittedModel(LearnerSpec spec, TaskKind task, FeatureScaling scaler, Parameters params);

    const LearnerSpec& spec() const { return spec_; }
    const TaskKind& task() const { return task_; }
    const FeatureScaling& train_scaler() const { return scaler_; }
    const Parameters& parameters() const { return params_; }
    Eigen::Index input_dim() const { return scaler_.mean.size(); }

    /// Classification: N x C probability rows. Regression: N x 1 values.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& features) const;

    /// Linear models only: coefficients expressed in the original feature units.
    Eigen::VectorXd linear_coefficients(int output = 0) const;
    double linear_intercept(int output = 0) const;

private:
    LearnerSpec spec_;
    TaskKind task_;
    FeatureScaling scaler_;
    Parameters params_;
};

FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& train_features, const Eigen::VectorXd& train_targets,
                TaskKind task);

inline Eigen::MatrixXd predict(const FittedModel& model, const Eigen::MatrixXd& features) {
    return model.predict(features);
}

}  // namespace rds
