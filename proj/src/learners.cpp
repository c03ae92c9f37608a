#include "rds/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "rds/error.hpp"
#include "rds/rng.hpp"

namespace rds {

std::string_view to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::LogisticRegression: return "logistic_regression";
        case LearnerKind::RidgeRegression: return "ridge_regression";
        case LearnerKind::DecisionTree: return "decision_tree";
        case LearnerKind::RandomForest: return "random_forest";
        case LearnerKind::Mlp: return "mlp";
    }
    return "unknown";
}

LearnerKind learner_kind_from_string(std::string_view name) {
    if (name == "logistic_regression" || name == "lr") return LearnerKind::LogisticRegression;
    if (name == "ridge_regression" || name == "ridge") return LearnerKind::RidgeRegression;
    if (name == "decision_tree" || name == "tree") return LearnerKind::DecisionTree;
    if (name == "random_forest" || name == "rf") return LearnerKind::RandomForest;
    if (name == "mlp") return LearnerKind::Mlp;
    throw ValidationError("unknown learner kind '" + std::string(name) + "'");
}

namespace {

void softmax_rows(Eigen::MatrixXd& logits) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - mx).exp();
        logits.row(i) /= logits.row(i).sum();
    }
}

// ---------------------------------------------------------------------------
// Logistic regression (multinomial, L2)

double largest_gram_eigenvalue(const Eigen::MatrixXd& x) {
    // Power iteration on [x 1]^T [x 1] / n.
    const double n = static_cast<double>(x.rows());
    Eigen::VectorXd v = Eigen::VectorXd::Ones(x.cols() + 1);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 50; ++it) {
        const Eigen::VectorXd xv = x * v.head(x.cols()) + Eigen::VectorXd::Constant(x.rows(), v[x.cols()]);
        Eigen::VectorXd w(x.cols() + 1);
        w.head(x.cols()) = x.transpose() * xv / n;
        w[x.cols()] = xv.sum() / n;
        const double norm = w.norm();
        if (norm == 0.0) return 1.0;
        lambda = norm;
        v = w / norm;
    }
    return lambda;
}

detail::LinearParams fit_logistic(const LearnerHyperparameters& hp, const Eigen::MatrixXd& x,
                                  const std::vector<int>& y, int num_classes) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, num_classes);
    for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;

    // Softmax cross-entropy has curvature at most 1/2 along the Gram spectrum.
    const double lipschitz = 0.5 * largest_gram_eigenvalue(x) * 1.05 + hp.l2;
    const double step = 1.0 / lipschitz;

    detail::LinearParams p{Eigen::MatrixXd::Zero(num_classes, d), Eigen::VectorXd::Zero(num_classes)};
    detail::LinearParams prev = p;
    detail::LinearParams look = p;
    for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
        Eigen::MatrixXd probs = (x * look.weights.transpose()).rowwise() + look.bias.transpose();
        softmax_rows(probs);
        const Eigen::MatrixXd residual = (probs - onehot) * inv_n;
        const Eigen::MatrixXd grad_w = residual.transpose() * x + hp.l2 * look.weights;
        const Eigen::VectorXd grad_b = residual.colwise().sum().transpose();
        if (!grad_w.allFinite() || !grad_b.allFinite())
            throw DivergenceError("logistic regression: non-finite gradient at epoch " + std::to_string(epoch));
        const double gmax = std::max(grad_w.cwiseAbs().maxCoeff(), grad_b.cwiseAbs().maxCoeff());
        if (gmax < hp.tolerance) {
            p = look;
            break;
        }
        prev = p;
        p.weights = look.weights - step * grad_w;
        p.bias = look.bias - step * grad_b;
        // Nesterov extrapolation.
        const double momentum = static_cast<double>(epoch) / (static_cast<double>(epoch) + 3.0);
        look.weights = p.weights + momentum * (p.weights - prev.weights);
        look.bias = p.bias + momentum * (p.bias - prev.bias);
    }
    Eigen::MatrixXd logits = (x * p.weights.transpose()).rowwise() + p.bias.transpose();
    softmax_rows(logits);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss -= std::log(std::max(logits(i, y[static_cast<std::size_t>(i)]), 1e-300));
    if (!std::isfinite(loss)) throw DivergenceError("logistic regression: non-finite loss");
    return p;
}

// ---------------------------------------------------------------------------
// Ridge regression

detail::LinearParams fit_ridge(const LearnerHyperparameters& hp, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const double mean_y = y.mean();
    const Eigen::VectorXd yc = y.array() - mean_y;
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += hp.ridge_lambda;
    const Eigen::VectorXd rhs = x.transpose() * yc;
    Eigen::VectorXd w;
    if (hp.ridge_lambda > 0.0) w = gram.ldlt().solve(rhs);
    else w = gram.completeOrthogonalDecomposition().solve(rhs);
    if (!w.allFinite()) throw DivergenceError("ridge regression: non-finite solution");
    detail::LinearParams p;
    p.weights = w;  // D x 1
    p.bias = Eigen::VectorXd::Constant(1, mean_y);
    return p;
}

// ---------------------------------------------------------------------------
// CART

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int num_classes, const LearnerHyperparameters& hp,
                int max_features, Rng* rng)
        : x_(x), y_(y), num_classes_(num_classes), hp_(hp), max_features_(max_features), rng_(rng) {
        features_.resize(static_cast<std::size_t>(x.cols()));
        std::iota(features_.begin(), features_.end(), 0);
    }

    detail::TreeParams build(std::vector<Eigen::Index> rows) {
        nodes_.clear();
        grow(rows, 0);
        return detail::TreeParams{std::move(nodes_)};
    }

private:
    bool classification() const { return num_classes_ > 0; }

    Eigen::VectorXd leaf_value(const std::vector<Eigen::Index>& rows) const {
        if (classification()) {
            Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_classes_);
            for (const auto i : rows) counts[static_cast<Eigen::Index>(y_[i])] += 1.0;
            return counts / static_cast<double>(rows.size());
        }
        double sum = 0.0;
        for (const auto i : rows) sum += y_[i];
        return Eigen::VectorXd::Constant(1, sum / static_cast<double>(rows.size()));
    }

    // n * impurity, for a class-count vector or (sum, sum of squares).
    double gini_mass(const std::vector<double>& counts, double n) const {
        if (n <= 0) return 0.0;
        double sq = 0.0;
        for (const double c : counts) sq += c * c;
        return n - sq / n;
    }

    int grow(std::vector<Eigen::Index>& rows, int depth) {
        const int index = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        nodes_[static_cast<std::size_t>(index)].value = leaf_value(rows);

        const auto n = rows.size();
        const auto min_leaf = static_cast<std::size_t>(std::max(1, hp_.min_leaf));
        if (depth >= hp_.max_depth || n < 2 * min_leaf) return index;

        const Eigen::VectorXd& value = nodes_[static_cast<std::size_t>(index)].value;
        if (classification() && value.maxCoeff() >= 1.0) return index;

        // Candidate features: a seeded partial shuffle when subsampling.
        std::size_t n_candidates = features_.size();
        if (max_features_ > 0 && static_cast<std::size_t>(max_features_) < features_.size() && rng_ != nullptr) {
            n_candidates = static_cast<std::size_t>(max_features_);
            for (std::size_t k = 0; k < n_candidates; ++k) {
                const std::size_t j = k + rng_->below(features_.size() - k);
                std::swap(features_[k], features_[j]);
            }
        }

        std::vector<double> total(classification() ? static_cast<std::size_t>(num_classes_) : 2, 0.0);
        for (const auto i : rows) accumulate(total, y_[i], 1.0);
        const double parent = impurity_mass(total, static_cast<double>(n));

        double best = parent - 1e-12 * std::max(1.0, std::abs(parent));
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::pair<double, Eigen::Index>> order(n);
        std::vector<double> left(total.size());
        std::vector<double> right(total.size());
        for (std::size_t k = 0; k < n_candidates; ++k) {
            const int f = features_[k];
            for (std::size_t r = 0; r < n; ++r) order[r] = {x_(rows[r], f), rows[r]};
            std::sort(order.begin(), order.end());
            if (order.front().first == order.back().first) continue;
            std::fill(left.begin(), left.end(), 0.0);
            for (std::size_t r = 0; r + 1 < n; ++r) {
                accumulate(left, y_[order[r].second], 1.0);
                const std::size_t n_left = r + 1;
                if (order[r].first == order[r + 1].first) continue;
                if (n_left < min_leaf || n - n_left < min_leaf) continue;
                for (std::size_t c = 0; c < right.size(); ++c) right[c] = total[c] - left[c];
                const double mass = impurity_mass(left, static_cast<double>(n_left)) +
                                    impurity_mass(right, static_cast<double>(n - n_left));
                if (mass < best) {
                    best = mass;
                    best_feature = f;
                    best_threshold = 0.5 * (order[r].first + order[r + 1].first);
                }
            }
        }
        if (best_feature < 0) return index;

        std::vector<Eigen::Index> left_rows;
        std::vector<Eigen::Index> right_rows;
        for (const auto i : rows) (x_(i, best_feature) <= best_threshold ? left_rows : right_rows).push_back(i);
        rows.clear();
        rows.shrink_to_fit();

        const int l = grow(left_rows, depth + 1);
        const int r = grow(right_rows, depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(index)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return index;
    }

    void accumulate(std::vector<double>& stats, double y, double w) const {
        if (classification()) {
            stats[static_cast<std::size_t>(y)] += w;
        } else {
            stats[0] += w * y;
            stats[1] += w * y * y;
        }
    }

    double impurity_mass(const std::vector<double>& stats, double n) const {
        if (classification()) return gini_mass(stats, n);
        if (n <= 0) return 0.0;
        return stats[1] - stats[0] * stats[0] / n;
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& y_;
    int num_classes_;
    const LearnerHyperparameters& hp_;
    int max_features_;
    Rng* rng_;
    std::vector<int> features_;
    std::vector<detail::TreeNode> nodes_;
};

Eigen::VectorXd tree_predict_row(const detail::TreeParams& tree, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    int node = 0;
    while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& n = tree.nodes[static_cast<std::size_t>(node)];
        node = row[n.feature] <= n.threshold ? n.left : n.right;
    }
    return tree.nodes[static_cast<std::size_t>(node)].value;
}

detail::TreeParams fit_tree(const LearnerHyperparameters& hp, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            int num_classes) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    TreeBuilder builder(x, y, num_classes, hp, hp.max_features, nullptr);
    return builder.build(std::move(rows));
}

detail::ForestParams fit_forest(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                int num_classes) {
    const auto& hp = spec.hyperparameters;
    const int max_features = hp.max_features > 0
                                 ? hp.max_features
                                 : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols())))));
    const Rng base(spec.seed);
    const auto n = static_cast<std::size_t>(x.rows());
    detail::ForestParams forest;
    for (int t = 0; t < hp.num_trees; ++t) {
        Rng stream = base.derive("bootstrap", static_cast<std::uint64_t>(t));
        std::vector<Eigen::Index> rows(n);
        for (auto& r : rows) r = static_cast<Eigen::Index>(stream.below(n));
        std::sort(rows.begin(), rows.end());
        TreeBuilder builder(x, y, num_classes, hp, max_features, &stream);
        forest.trees.push_back(builder.build(std::move(rows)));
    }
    return forest;
}

// ---------------------------------------------------------------------------
// MLP

detail::MlpParams fit_mlp(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          int num_classes) {
    const auto& hp = spec.hyperparameters;
    const bool classification = num_classes > 0;
    const Eigen::Index d = x.cols();
    const Eigen::Index h = hp.hidden_units;
    const Eigen::Index out = classification ? num_classes : 1;
    const Rng base(spec.seed);

    detail::MlpParams p;
    Rng init = base.derive("mlp_init");
    const auto uniform_fill = [&init](Eigen::MatrixXd& m, double bound) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = (2.0 * init.uniform() - 1.0) * bound;
    };
    const double b1 = 1.0 / std::sqrt(static_cast<double>(d));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(h));
    p.w1.resize(h, d);
    uniform_fill(p.w1, b1);
    Eigen::MatrixXd tmp(h, 1);
    uniform_fill(tmp, b1);
    p.b1 = tmp.col(0);
    p.w2.resize(out, h);
    uniform_fill(p.w2, b2);
    tmp.resize(out, 1);
    uniform_fill(tmp, b2);
    p.b2 = tmp.col(0);

    Eigen::VectorXd targets = y;
    if (!classification) {
        p.target_mean = y.mean();
        const double sd = std::sqrt((y.array() - p.target_mean).square().mean());
        p.target_scale = sd < FeatureScaling::kMinStddev ? 1.0 : sd;
        targets = (y.array() - p.target_mean) / p.target_scale;
    }

    constexpr double kDecay = 0.99;
    constexpr double kEps = 1e-8;
    detail::MlpParams acc{Eigen::MatrixXd::Zero(h, d), Eigen::VectorXd::Zero(h), Eigen::MatrixXd::Zero(out, h),
                          Eigen::VectorXd::Zero(out), 0.0, 1.0};
    const auto rms_step = [&](auto& param, auto& accum, const auto& grad) {
        accum = kDecay * accum.array() + (1.0 - kDecay) * grad.array().square();
        param.array() -= hp.learning_rate * grad.array() / (accum.array().sqrt() + kEps);
    };

    Rng shuffle = base.derive("mlp_shuffle");
    const auto n = static_cast<std::size_t>(x.rows());
    const auto batch = static_cast<std::size_t>(std::max(1, hp.batch_size));
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::MatrixXd xb;
    Eigen::VectorXd yb;
    detail::MlpParams grad;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            const auto rows = static_cast<Eigen::Index>(stop - start);
            xb.resize(rows, d);
            yb.resize(rows);
            for (std::size_t r = start; r < stop; ++r) {
                xb.row(static_cast<Eigen::Index>(r - start)) = x.row(order[r]);
                yb[static_cast<Eigen::Index>(r - start)] = targets[order[r]];
            }
            const double loss = detail::mlp_loss(p, xb, yb, classification, &grad);
            if (!std::isfinite(loss))
                throw DivergenceError("mlp: non-finite loss at epoch " + std::to_string(epoch));
            rms_step(p.w1, acc.w1, grad.w1);
            rms_step(p.b1, acc.b1, grad.b1);
            rms_step(p.w2, acc.w2, grad.w2);
            rms_step(p.b2, acc.b2, grad.b2);
        }
    }
    return p;
}

Eigen::MatrixXd mlp_forward(const detail::MlpParams& p, const Eigen::MatrixXd& x, bool classification) {
    const Eigen::MatrixXd hidden = ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).array().tanh().matrix();
    Eigen::MatrixXd out = (hidden * p.w2.transpose()).rowwise() + p.b2.transpose();
    if (classification) softmax_rows(out);
    else out = out.array() * p.target_scale + p.target_mean;
    return out;
}

}  // namespace

namespace detail {

double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool classification,
                MlpParams* grad) {
    const Eigen::Index n = x.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    const Eigen::MatrixXd hidden = ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).array().tanh().matrix();
    Eigen::MatrixXd out = (hidden * p.w2.transpose()).rowwise() + p.b2.transpose();
    double loss = 0.0;
    Eigen::MatrixXd d_out;
    if (classification) {
        softmax_rows(out);
        d_out = out;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto c = static_cast<Eigen::Index>(y[i]);
            loss -= std::log(std::max(out(i, c), 1e-300));
            d_out(i, c) -= 1.0;
        }
        loss *= inv_n;
        d_out *= inv_n;
    } else {
        const Eigen::VectorXd diff = out.col(0) - y;
        loss = 0.5 * diff.squaredNorm() * inv_n;
        d_out = diff * inv_n;
    }
    if (grad != nullptr) {
        grad->w2 = d_out.transpose() * hidden;
        grad->b2 = d_out.colwise().sum().transpose();
        const Eigen::MatrixXd d_hidden =
            ((d_out * p.w2).array() * (1.0 - hidden.array().square())).matrix();
        grad->w1 = d_hidden.transpose() * x;
        grad->b1 = d_hidden.colwise().sum().transpose();
    }
    return loss;
}

}  // namespace detail

FittedModel::FittedModel(LearnerSpec spec, TaskKind task, FeatureScaling scaler, Parameters params)
    : spec_(std::move(spec)), task_(task), scaler_(std::move(scaler)), params_(std::move(params)) {}

Eigen::MatrixXd FittedModel::predict(const Eigen::MatrixXd& features) const {
    if (features.cols() != input_dim())
        throw ValidationError("predict: expected " + std::to_string(input_dim()) + " feature columns, got " +
                              std::to_string(features.cols()));
    const Eigen::MatrixXd x = scaler_.apply(features);
    const bool classification = task_.is_classification();
    const Eigen::Index outputs = classification ? task_.num_classes : 1;

    struct Visitor {
        const Eigen::MatrixXd& x;
        bool classification;
        Eigen::Index outputs;

        Eigen::MatrixXd operator()(const detail::LinearParams& p) const {
            if (classification) {
                Eigen::MatrixXd logits = (x * p.weights.transpose()).rowwise() + p.bias.transpose();
                softmax_rows(logits);
                return logits;
            }
            return (x * p.weights).array() + p.bias[0];
        }
        Eigen::MatrixXd operator()(const detail::TreeParams& p) const {
            Eigen::MatrixXd out(x.rows(), outputs);
            for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = tree_predict_row(p, x.row(i)).transpose();
            return out;
        }
        Eigen::MatrixXd operator()(const detail::ForestParams& p) const {
            Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), outputs);
            for (const auto& tree : p.trees)
                for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) += tree_predict_row(tree, x.row(i)).transpose();
            return out / static_cast<double>(p.trees.size());
        }
        Eigen::MatrixXd operator()(const detail::MlpParams& p) const { return mlp_forward(p, x, classification); }
    };
    return std::visit(Visitor{x, classification, outputs}, params_);
}

Eigen::VectorXd FittedModel::linear_coefficients(int output) const {
    const auto* p = std::get_if<detail::LinearParams>(&params_);
    if (p == nullptr) throw ValidationError("linear_coefficients: not a linear model");
    const Eigen::VectorXd w = task_.is_classification() ? Eigen::VectorXd(p->weights.row(output).transpose())
                                                        : Eigen::VectorXd(p->weights.col(0));
    Eigen::VectorXd out(w.size());
    for (Eigen::Index j = 0; j < w.size(); ++j)
        out[j] = scaler_.stddev[j] < FeatureScaling::kMinStddev ? 0.0 : w[j] / scaler_.stddev[j];
    return out;
}

double FittedModel::linear_intercept(int output) const {
    const auto* p = std::get_if<detail::LinearParams>(&params_);
    if (p == nullptr) throw ValidationError("linear_intercept: not a linear model");
    const Eigen::VectorXd coef = linear_coefficients(output);
    return p->bias[task_.is_classification() ? output : 0] - coef.dot(scaler_.mean.transpose());
}

FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& train_features, const Eigen::VectorXd& train_targets,
                TaskKind task) {
    const Eigen::Index n = train_features.rows();
    if (n < 2) throw ValidationError("fit: need at least 2 training samples, got " + std::to_string(n));
    if (train_targets.size() != n) throw ValidationError("fit: target count does not match feature rows");
    if (!train_features.allFinite() || !train_targets.allFinite()) throw ValidationError("fit: non-finite input");

    int num_classes = 0;
    std::vector<int> labels;
    if (task.is_classification()) {
        num_classes = task.num_classes;
        labels.resize(static_cast<std::size_t>(n));
        std::vector<bool> present(static_cast<std::size_t>(num_classes), false);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = static_cast<int>(train_targets[i]);
            if (c < 0 || c >= num_classes || c != train_targets[i])
                throw ValidationError("fit: invalid class label at row " + std::to_string(i));
            labels[static_cast<std::size_t>(i)] = c;
            present[static_cast<std::size_t>(c)] = true;
        }
        if (std::count(present.begin(), present.end(), true) < 2)
            throw ValidationError("fit: single-class classification training set");
    }

    FeatureScaling scaler = FeatureScaling::fit(train_features);
    const Eigen::MatrixXd x = scaler.apply(train_features);
    const auto& hp = spec.hyperparameters;

    FittedModel::Parameters params;
    switch (spec.kind) {
        case LearnerKind::LogisticRegression:
            if (!task.is_classification()) throw ValidationError("logistic_regression requires a classification task");
            params = fit_logistic(hp, x, labels, num_classes);
            break;
        case LearnerKind::RidgeRegression:
            if (task.is_classification()) throw ValidationError("ridge_regression requires a regression task");
            params = fit_ridge(hp, x, train_targets);
            break;
        case LearnerKind::DecisionTree:
            params = fit_tree(hp, x, train_targets, num_classes);
            break;
        case LearnerKind::RandomForest:
            params = fit_forest(spec, x, train_targets, num_classes);
            break;
        case LearnerKind::Mlp:
            params = fit_mlp(spec, x, train_targets, num_classes);
            break;
    }
    return FittedModel(spec, task, std::move(scaler), std::move(params));
}

}  // namespace rds
