#include "rds/policy.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "rds/error.hpp"
#include "rds/regularizers.hpp"

namespace rds {

// ---------------------------------------------------------------------------
// Parameters

PolicyParams PolicyParams::zeros(int input_size, int hidden_size) {
    PolicyParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    const Eigen::Index e = input_size;
    const Eigen::Index h = hidden_size;
    for (auto* gate : {&p.reset_input, &p.update_input, &p.candidate_input}) *gate = Eigen::MatrixXd::Zero(h, e);
    for (auto* gate : {&p.reset_recurrent, &p.update_recurrent, &p.candidate_recurrent})
        *gate = Eigen::MatrixXd::Zero(h, h);
    for (auto* gate : {&p.reset_bias, &p.update_bias, &p.candidate_bias}) *gate = Eigen::MatrixXd::Zero(h, 1);
    p.head_weights = Eigen::MatrixXd::Zero(2, h);
    p.head_bias = Eigen::MatrixXd::Zero(2, 1);
    return p;
}

std::array<Eigen::MatrixXd*, PolicyParams::kBlockCount> PolicyParams::blocks() {
    return {&reset_input,     &reset_recurrent,     &reset_bias,     &update_input,
            &update_recurrent, &update_bias,         &candidate_input, &candidate_recurrent,
            &candidate_bias,  &head_weights,        &head_bias};
}

std::array<const Eigen::MatrixXd*, PolicyParams::kBlockCount> PolicyParams::blocks() const {
    return {&reset_input,     &reset_recurrent,     &reset_bias,     &update_input,
            &update_recurrent, &update_bias,         &candidate_input, &candidate_recurrent,
            &candidate_bias,  &head_weights,        &head_bias};
}

const std::array<std::string_view, PolicyParams::kBlockCount>& PolicyParams::block_names() {
    static const std::array<std::string_view, kBlockCount> names = {
        "reset_input",      "reset_recurrent",     "reset_bias",     "update_input",
        "update_recurrent", "update_bias",         "candidate_input", "candidate_recurrent",
        "candidate_bias",   "head_weights",        "head_bias"};
    return names;
}

std::size_t PolicyParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto* b : blocks()) n += static_cast<std::size_t>(b->size());
    return n;
}

bool PolicyParams::all_finite() const {
    for (const auto* b : blocks())
        if (!b->allFinite()) return false;
    return true;
}

bool operator==(const PolicyParams& a, const PolicyParams& b) {
    if (a.input_size != b.input_size || a.hidden_size != b.hidden_size || a.seed != b.seed) return false;
    const auto ab = a.blocks();
    const auto bb = b.blocks();
    for (std::size_t i = 0; i < PolicyParams::kBlockCount; ++i)
        if (ab[i]->rows() != bb[i]->rows() || ab[i]->cols() != bb[i]->cols() || *ab[i] != *bb[i]) return false;
    return true;
}

PolicyParams init_policy(int feature_dim, int target_width, int hidden_size, std::uint64_t seed) {
    if (feature_dim < 1) throw ValidationError("init_policy: feature_dim must be >= 1");
    if (target_width < 1) throw ValidationError("init_policy: target_width must be >= 1");
    if (hidden_size < 1) throw ValidationError("init_policy: hidden_size must be >= 1");
    PolicyParams p = PolicyParams::zeros(feature_dim + target_width, hidden_size);
    p.seed = seed;
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    Rng rng(seed);
    for (auto* block : p.blocks())
        for (Eigen::Index j = 0; j < block->cols(); ++j)
            for (Eigen::Index i = 0; i < block->rows(); ++i) (*block)(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
    return p;
}

// ---------------------------------------------------------------------------
// Inputs

TargetEncoder TargetEncoder::fit(const Dataset& dataset) {
    TargetEncoder enc;
    enc.task_ = dataset.task;
    if (!dataset.task.is_classification()) {
        const double n = static_cast<double>(dataset.size());
        enc.mean_ = dataset.targets.sum() / n;
        const double sd = std::sqrt((dataset.targets.array() - enc.mean_).square().sum() / n);
        enc.stddev_ = sd < FeatureScaling::kMinStddev ? 1.0 : sd;
    }
    return enc;
}

TargetEncoder TargetEncoder::for_classes(TaskKind task) {
    if (!task.is_classification()) throw ValidationError("TargetEncoder::for_classes: regression needs fit()");
    TargetEncoder enc;
    enc.task_ = task;
    return enc;
}

int TargetEncoder::width() const { return task_.is_classification() ? task_.num_classes : 1; }

Eigen::VectorXd TargetEncoder::encode(double y) const {
    if (!task_.is_classification()) return Eigen::VectorXd::Constant(1, (y - mean_) / stddev_);
    if (y != std::floor(y) || y < 0 || y >= task_.num_classes)
        throw ValidationError("encode_target: class index out of range");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(task_.num_classes);
    v[static_cast<Eigen::Index>(y)] = 1.0;
    return v;
}

PolicyData PolicyData::from_dataset(const Dataset& dataset) {
    const auto [scaled, stats] = standardize(dataset);
    const TargetEncoder encoder = TargetEncoder::fit(dataset);
    PolicyData data;
    data.task = dataset.task;
    data.inputs.resize(dataset.size(), dataset.dim() + encoder.width());
    for (Eigen::Index i = 0; i < dataset.size(); ++i) {
        data.inputs.row(i).head(dataset.dim()) = scaled.features.row(i);
        data.inputs.row(i).tail(encoder.width()) = encoder.encode(dataset.targets[i]).transpose();
    }
    if (dataset.task.is_classification()) data.labels = dataset.labels();
    return data;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

struct Forward {
    StepTrace trace;
    double p_train = 0.5;
};

Forward forward_step(const PolicyParams& p, const Eigen::VectorXd& h, const Eigen::Ref<const Eigen::VectorXd>& x) {
    Forward f;
    f.trace.hidden_in = h;
    f.trace.reset = sigmoid(p.reset_input * x + p.reset_recurrent * h + p.reset_bias.col(0));
    f.trace.update = sigmoid(p.update_input * x + p.update_recurrent * h + p.update_bias.col(0));
    f.trace.recurrent_candidate = p.candidate_recurrent * h;
    f.trace.candidate = (p.candidate_input * x + f.trace.reset.cwiseProduct(f.trace.recurrent_candidate) +
                         p.candidate_bias.col(0))
                            .array()
                            .tanh()
                            .matrix();
    f.trace.hidden_out = (1.0 - f.trace.update.array()) * f.trace.candidate.array() + f.trace.update.array() * h.array();
    const Eigen::Vector2d logits = p.head_weights * f.trace.hidden_out + p.head_bias.col(0);
    const double raw = sigmoid(logits[0] - logits[1]);
    if (!std::isfinite(raw) || !f.trace.hidden_out.allFinite())
        throw DivergenceError("policy step produced a non-finite value");
    f.p_train = std::clamp(raw, kMinActionProb, kMaxActionProb);
    f.trace.clamped = raw <= kMinActionProb || raw >= kMaxActionProb;
    return f;
}

double action_log_prob(double p_train, Action a) { return std::log(a == Action::Train ? p_train : 1.0 - p_train); }

template <typename ChooseAction>
Trajectory unroll(const PolicyParams& policy, const PolicyData& data, ChooseAction&& choose) {
    if (data.input_size() != policy.input_size)
        throw ValidationError("policy expects " + std::to_string(policy.input_size) + " inputs, data has " +
                              std::to_string(data.input_size()));
    const auto m = static_cast<std::size_t>(data.steps());
    Trajectory t;
    t.action_probs.reserve(m);
    t.actions.reserve(m);
    t.trace.reserve(m);
    Eigen::VectorXd retained = Eigen::VectorXd::Zero(policy.hidden_size);
    for (std::size_t i = 0; i < m; ++i) {
        Forward f = forward_step(policy, retained, data.inputs.row(static_cast<Eigen::Index>(i)).transpose());
        const Action a = choose(i, f.p_train);
        t.action_probs.push_back(f.p_train);
        t.actions.push_back(a);
        t.log_prob += action_log_prob(f.p_train, a);
        if (carries_hidden(a)) retained = f.trace.hidden_out;
        t.trace.push_back(std::move(f.trace));
    }
    return t;
}

}  // namespace

StepResult step(const PolicyParams& policy, const Eigen::VectorXd& retained_hidden, const Eigen::VectorXd& input) {
    if (!retained_hidden.allFinite() || !input.allFinite()) throw DivergenceError("policy step: non-finite input");
    if (input.size() != policy.input_size || retained_hidden.size() != policy.hidden_size)
        throw ValidationError("policy step: dimension mismatch");
    Forward f = forward_step(policy, retained_hidden, input);
    return {std::move(f.trace.hidden_out), f.p_train};
}

double Trajectory::mean_action_prob() const {
    if (action_probs.empty()) return 0.0;
    double s = 0.0;
    for (const double p : action_probs) s += p;
    return s / static_cast<double>(action_probs.size());
}

Trajectory sample_trajectory(const PolicyParams& policy, const PolicyData& data, Rng& rng) {
    return unroll(policy, data,
                  [&rng](std::size_t, double p) { return rng.uniform() < p ? Action::Train : Action::Test; });
}

Trajectory replay_trajectory(const PolicyParams& policy, const PolicyData& data, std::span<const Action> actions) {
    if (static_cast<Eigen::Index>(actions.size()) != data.steps())
        throw ValidationError("replay_trajectory: action count does not match data");
    return unroll(policy, data, [&actions](std::size_t i, double) { return actions[i]; });
}

std::vector<Action> greedy_actions(const PolicyParams& policy, const PolicyData& data) {
    return unroll(policy, data, [](std::size_t, double p) { return p >= 0.5 ? Action::Train : Action::Test; }).actions;
}

SplitAssignment greedy_decode(const PolicyParams& policy, const PolicyData& data) {
    SplitAssignment split = SplitAssignment::from_actions(greedy_actions(policy, data));
    if (!split.valid())
        throw DegenerateSplitError("greedy decode assigned every sample to " +
                                   std::string(split.n_train == 0 ? "test" : "train"));
    return split;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

// Backpropagates per-step loss sensitivities dL/dp_t through the head and
// the retained-hidden recurrence.
PolicyParams backprop(const PolicyParams& p, const Trajectory& t, const PolicyData& data,
                      const std::vector<double>& d_prob) {
    PolicyParams g = p.zeros_like();
    g.seed = p.seed;
    const Eigen::RowVectorXd head_diff = p.head_weights.row(0) - p.head_weights.row(1);
    Eigen::VectorXd d_retained = Eigen::VectorXd::Zero(p.hidden_size);
    for (std::size_t k = t.actions.size(); k-- > 0;) {
        const StepTrace& s = t.trace[k];
        const Eigen::VectorXd x = data.inputs.row(static_cast<Eigen::Index>(k)).transpose();
        const double prob = t.action_probs[k];
        const double d_logit = s.clamped ? 0.0 : d_prob[k] * prob * (1.0 - prob);

        g.head_weights.row(0) += d_logit * s.hidden_out.transpose();
        g.head_weights.row(1) -= d_logit * s.hidden_out.transpose();
        g.head_bias(0, 0) += d_logit;
        g.head_bias(1, 0) -= d_logit;

        Eigen::VectorXd d_out = d_logit * head_diff.transpose();
        const bool carried = carries_hidden(t.actions[k]);
        if (carried) d_out += d_retained;

        const Eigen::ArrayXd z = s.update.array();
        const Eigen::ArrayXd n = s.candidate.array();
        const Eigen::ArrayXd r = s.reset.array();
        Eigen::VectorXd d_in = (d_out.array() * z).matrix();

        const Eigen::VectorXd da_n = (d_out.array() * (1.0 - z) * (1.0 - n.square())).matrix();
        const Eigen::VectorXd da_z = (d_out.array() * (s.hidden_in.array() - n) * z * (1.0 - z)).matrix();
        const Eigen::VectorXd d_un = (da_n.array() * r).matrix();
        const Eigen::VectorXd da_r = (da_n.array() * s.recurrent_candidate.array() * r * (1.0 - r)).matrix();

        g.candidate_input.noalias() += da_n * x.transpose();
        g.candidate_bias.col(0) += da_n;
        g.candidate_recurrent.noalias() += d_un * s.hidden_in.transpose();
        d_in.noalias() += p.candidate_recurrent.transpose() * d_un;

        g.update_input.noalias() += da_z * x.transpose();
        g.update_bias.col(0) += da_z;
        g.update_recurrent.noalias() += da_z * s.hidden_in.transpose();
        d_in.noalias() += p.update_recurrent.transpose() * da_z;

        g.reset_input.noalias() += da_r * x.transpose();
        g.reset_bias.col(0) += da_r;
        g.reset_recurrent.noalias() += da_r * s.hidden_in.transpose();
        d_in.noalias() += p.reset_recurrent.transpose() * da_r;

        // A carried step starts a new memory node; a skipped step reads the
        // same node its successors read.
        if (carried) d_retained = d_in;
        else d_retained += d_in;
    }
    return g;
}

struct LossWithSensitivity {
    LossBreakdown loss;
    std::vector<double> d_prob;
};

LossWithSensitivity loss_terms(const Trajectory& t, const PolicyData& data, const LossTerms& terms) {
    const std::size_t m = t.actions.size();
    LossWithSensitivity out;
    out.d_prob.assign(m, 0.0);

    out.loss.theta = -terms.alpha * t.log_prob * terms.shaped_return;
    const double scale = -terms.alpha * terms.shaped_return;
    if (scale != 0.0) {
        for (std::size_t i = 0; i < m; ++i) {
            const double prob = t.action_probs[i];
            out.d_prob[i] += scale * (t.actions[i] == Action::Train ? 1.0 / prob : -1.0 / (1.0 - prob));
        }
    }

    const double mean = t.mean_action_prob();
    out.loss.ratio = ratio_penalty(mean, terms.ratio, terms.gamma);
    const double diff = mean - terms.ratio;
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    if (terms.gamma != 0.0 && sign != 0.0) {
        const double d = terms.gamma * sign / static_cast<double>(m);
        for (double& v : out.d_prob) v += d;
    }

    if (data.task.is_classification() && terms.psi != 0.0) {
        const SoftIidPenalty iid = iid_penalty_soft(t.action_probs, data.labels, data.task, terms.psi);
        out.loss.iid = iid.value;
        for (std::size_t i = 0; i < m; ++i) out.d_prob[i] += iid.gradient[i];
    }
    return out;
}

}  // namespace

std::pair<LossBreakdown, PolicyParams> compute_loss_and_grads(const PolicyParams& policy, const Trajectory& trajectory,
                                                              const PolicyData& data, const LossTerms& terms) {
    if (static_cast<Eigen::Index>(trajectory.actions.size()) != data.steps() ||
        trajectory.trace.size() != trajectory.actions.size())
        throw ValidationError("compute_loss_and_grads: trajectory does not match data");
    LossWithSensitivity l = loss_terms(trajectory, data, terms);
    PolicyParams grads = backprop(policy, trajectory, data, l.d_prob);
    if (!std::isfinite(l.loss.total()) || !grads.all_finite())
        throw DivergenceError("policy loss or gradient is non-finite");
    return {l.loss, std::move(grads)};
}

LossBreakdown compute_loss(const PolicyParams& policy, std::span<const Action> actions, const PolicyData& data,
                           const LossTerms& terms) {
    return loss_terms(replay_trajectory(policy, data, actions), data, terms).loss;
}

// ---------------------------------------------------------------------------
// Optimizer

OptimizerState OptimizerState::for_policy(const PolicyParams& policy, double learning_rate, double decay,
                                          double epsilon) {
    OptimizerState s;
    s.accumulators = policy.zeros_like();
    s.learning_rate = learning_rate;
    s.decay = decay;
    s.epsilon = epsilon;
    return s;
}

void rmsprop_update(PolicyParams& policy, const PolicyParams& gradients, OptimizerState& state) {
    if (gradients.input_size != policy.input_size || gradients.hidden_size != policy.hidden_size ||
        state.accumulators.input_size != policy.input_size || state.accumulators.hidden_size != policy.hidden_size)
        throw ValidationError("rmsprop_update: shape mismatch");
    auto params = policy.blocks();
    const auto grads = gradients.blocks();
    auto accs = state.accumulators.blocks();
    for (std::size_t b = 0; b < PolicyParams::kBlockCount; ++b) {
        const auto g = grads[b]->array();
        accs[b]->array() = state.decay * accs[b]->array() + (1.0 - state.decay) * g.square();
        params[b]->array() -= state.learning_rate * g / (accs[b]->array().sqrt() + state.epsilon);
    }
    ++state.steps;
}

// ---------------------------------------------------------------------------
// Ratio pretraining

PretrainResult pretrain(const PolicyParams& policy, const PolicyData& data, double ratio, int max_passes,
                        double learning_rate) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("pretrain: ratio must lie in (0, 1)");
    constexpr double kTolerance = 0.01;
    PretrainResult best{policy, 0, 0.0, false};
    double best_gap = INFINITY;
    PolicyParams current = policy;
    OptimizerState opt = OptimizerState::for_policy(current, learning_rate);
    const auto m = static_cast<double>(data.steps());
    for (int pass = 0; pass <= max_passes; ++pass) {
        const Trajectory t = replay_trajectory(current, data, greedy_actions(current, data));
        const double mean = t.mean_action_prob();
        const double gap = std::abs(mean - ratio);
        if (gap < best_gap) {
            best_gap = gap;
            best = {current, pass, mean, false};
        }
        if (gap <= kTolerance) {
            best.converged = true;
            return best;
        }
        if (pass == max_passes) break;
        // Binary cross-entropy against the constant target: dL/dp = (p - r) / (p (1 - p) M).
        std::vector<double> d_prob(t.action_probs.size());
        for (std::size_t i = 0; i < d_prob.size(); ++i) {
            const double p = t.action_probs[i];
            d_prob[i] = (p - ratio) / (p * (1.0 - p) * m);
        }
        const PolicyParams grads = backprop(current, t, data, d_prob);
        rmsprop_update(current, grads, opt);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr std::string_view kCheckpointMagic = "rds-policy";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_policy(const PolicyParams& policy, std::ostream& out) {
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "input_size " << policy.input_size << '\n';
    out << "hidden_size " << policy.hidden_size << '\n';
    out << "seed " << policy.seed << '\n';
    char buf[64];
    const auto blocks = policy.blocks();
    for (std::size_t b = 0; b < PolicyParams::kBlockCount; ++b) {
        const auto& m = *blocks[b];
        out << "block " << PolicyParams::block_names()[b] << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%a", m(i, j));
                out << (j == 0 ? "" : " ") << buf;
            }
            out << '\n';
        }
    }
    out << "end\n";
}

PolicyParams load_policy(std::istream& in) {
    const auto fail = [](const std::string& what) -> PolicyParams {
        throw ValidationError("policy checkpoint: " + what);
    };
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kCheckpointMagic) return fail("bad header");
    if (version != kCheckpointVersion) return fail("unsupported version " + std::to_string(version));
    std::string key;
    int input_size = 0;
    int hidden_size = 0;
    std::uint64_t seed = 0;
    if (!(in >> key >> input_size) || key != "input_size") return fail("missing input_size");
    if (!(in >> key >> hidden_size) || key != "hidden_size") return fail("missing hidden_size");
    if (!(in >> key >> seed) || key != "seed") return fail("missing seed");
    if (input_size < 1 || hidden_size < 1) return fail("invalid sizes");
    PolicyParams p = PolicyParams::zeros(input_size, hidden_size);
    p.seed = seed;
    auto blocks = p.blocks();
    for (std::size_t b = 0; b < PolicyParams::kBlockCount; ++b) {
        std::string name;
        Eigen::Index rows = 0;
        Eigen::Index cols = 0;
        if (!(in >> key >> name >> rows >> cols) || key != "block") return fail("missing block header");
        if (name != PolicyParams::block_names()[b]) return fail("unexpected block '" + name + "'");
        if (rows != blocks[b]->rows() || cols != blocks[b]->cols()) return fail("block '" + name + "' has wrong shape");
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) {
                std::string token;
                if (!(in >> token)) return fail("truncated block '" + name + "'");
                char* end = nullptr;
                const double v = std::strtod(token.c_str(), &end);
                if (end != token.c_str() + token.size()) return fail("bad number '" + token + "'");
                (*blocks[b])(i, j) = v;
            }
        }
    }
    if (!(in >> key) || key != "end") return fail("missing end marker");
    return p;
}

}  // namespace rds
