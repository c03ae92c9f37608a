#include "rds/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rds/error.hpp"

namespace rds {

namespace {
constexpr double kSmoothing = 1e-9;
constexpr double kMinDistance = 1e-12;
}  // namespace

void RegularizerConfig::validate() const {
    if (!(gamma >= 0.0)) throw ValidationError("gamma must be nonnegative");
    if (!(psi >= 0.0)) throw ValidationError("psi must be nonnegative");
    if (!(r > 0.0 && r < 1.0)) throw ValidationError("ratio must lie in (0, 1)");
    if (knn_k < 1) throw ValidationError("knn_k must be positive");
}

double ratio_penalty(double mean_prob, double r, double gamma) { return gamma * std::abs(mean_prob - r); }

double kl_discrete(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ValidationError("kl_discrete: support sizes differ");
    double sp = 0.0;
    double sq = 0.0;
    bool needs_smoothing = false;
    for (std::size_t c = 0; c < p.size(); ++c) {
        if (p[c] < 0.0 || q[c] < 0.0) throw ValidationError("kl_discrete: negative probability");
        sp += p[c];
        sq += q[c];
        if (q[c] == 0.0 && p[c] > 0.0) needs_smoothing = true;
    }
    if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6)
        throw ValidationError("kl_discrete: inputs must sum to 1");

    std::vector<double> qs(q.begin(), q.end());
    if (needs_smoothing) {
        double total = 0.0;
        for (double& v : qs) total += (v += kSmoothing);
        for (double& v : qs) v /= total;
    }
    double kl = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c)
        if (p[c] > 0.0) kl += p[c] * std::log(p[c] / qs[c]);
    return std::max(kl, 0.0);
}

namespace {

// k-th smallest |x - s| over a sorted sample, optionally skipping one
// position (the query's own entry).
double kth_distance(const std::vector<double>& sorted, double x, int k, std::ptrdiff_t skip) {
    const auto n = static_cast<std::ptrdiff_t>(sorted.size());
    std::ptrdiff_t right = std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
    std::ptrdiff_t left = right - 1;
    double dist = 0.0;
    for (int found = 0; found < k;) {
        if (left == skip) --left;
        if (right == skip) ++right;
        const bool has_left = left >= 0;
        const bool has_right = right < n;
        if (!has_left && !has_right) throw ValidationError("kl_continuous: not enough neighbours");
        const double dl = has_left ? x - sorted[static_cast<std::size_t>(left)] : INFINITY;
        const double dr = has_right ? sorted[static_cast<std::size_t>(right)] - x : INFINITY;
        if (dl <= dr) {
            dist = dl;
            --left;
        } else {
            dist = dr;
            ++right;
        }
        ++found;
    }
    return std::max(dist, kMinDistance);
}

}  // namespace

double kl_continuous_perez_cruz(std::span<const double> samples_p, std::span<const double> samples_q, int k) {
    if (k < 1) throw ValidationError("kl_continuous: k must be positive");
    const std::size_t n = samples_p.size();
    const std::size_t m = samples_q.size();
    if (n < static_cast<std::size_t>(k) + 1 || m < static_cast<std::size_t>(k))
        throw ValidationError("kl_continuous: insufficient samples (n=" + std::to_string(n) +
                              ", m=" + std::to_string(m) + ", k=" + std::to_string(k) + ")");
    std::vector<double> p(samples_p.begin(), samples_p.end());
    std::vector<double> q(samples_q.begin(), samples_q.end());
    std::sort(p.begin(), p.end());
    std::sort(q.begin(), q.end());

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = p[i];
        const double rho = kth_distance(p, x, k, static_cast<std::ptrdiff_t>(i));
        const double nu = kth_distance(q, x, k, -2);
        sum += std::log(nu / rho);
    }
    constexpr double kDim = 1.0;
    return kDim * sum / static_cast<double>(n) + std::log(static_cast<double>(m) / static_cast<double>(n - 1));
}

SoftIidPenalty iid_penalty_soft(std::span<const double> action_probs, std::span<const int> labels, TaskKind task,
                                double psi) {
    if (!task.is_classification()) throw ValidationError("iid_penalty_soft: classification only");
    if (action_probs.size() != labels.size()) throw ValidationError("iid_penalty_soft: length mismatch");
    const std::size_t n = labels.size();
    const auto classes = static_cast<std::size_t>(task.num_classes);

    std::vector<double> train_mass(classes, 0.0);
    std::vector<double> test_mass(classes, 0.0);
    double train_total = 0.0;
    double test_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        train_mass[c] += action_probs[i];
        test_mass[c] += 1.0 - action_probs[i];
        train_total += action_probs[i];
        test_total += 1.0 - action_probs[i];
    }

    SoftIidPenalty out;
    out.gradient.assign(n, 0.0);
    if (psi == 0.0) return out;

    // Degenerate soft mass on a side: fall back to the smoothed hard KL,
    // which carries no gradient.
    if (train_total <= 0.0 || test_total <= 0.0) {
        std::vector<double> pt(classes, 0.0);
        std::vector<double> ptr(classes, 0.0);
        for (std::size_t c = 0; c < classes; ++c) {
            pt[c] = test_total > 0.0 ? test_mass[c] / test_total : 1.0 / static_cast<double>(classes);
            ptr[c] = train_total > 0.0 ? train_mass[c] / train_total : 1.0 / static_cast<double>(classes);
        }
        out.value = psi * kl_discrete(pt, ptr);
        return out;
    }

    std::vector<double> p_test(classes);
    std::vector<double> p_train(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        p_test[c] = test_mass[c] / test_total;
        p_train[c] = train_mass[c] / train_total;
    }

    // KL(P || Q) with P = p_test, Q = p_train.
    //   dKL/dP_c = log(P_c / Q_c) + 1,  dKL/dQ_c = -P_c / Q_c
    //   dQ_c/dpi_i = ([y_i = c] - Q_c) / train_total
    //   dP_c/dpi_i = -([y_i = c] - P_c) / test_total
    double kl = 0.0;
    std::vector<double> d_p(classes, 0.0);
    std::vector<double> d_q(classes, 0.0);
    double sum_dp_p = 0.0;
    double sum_dq_q = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (p_test[c] > 0.0 && p_train[c] > 0.0) {
            kl += p_test[c] * std::log(p_test[c] / p_train[c]);
            d_p[c] = std::log(p_test[c] / p_train[c]) + 1.0;
            d_q[c] = -p_test[c] / p_train[c];
        } else if (p_test[c] > 0.0) {
            // Train mass vanished for a class present on the test side.
            const double q = kSmoothing;
            kl += p_test[c] * std::log(p_test[c] / q);
        }
        sum_dp_p += d_p[c] * p_test[c];
        sum_dq_q += d_q[c] * p_train[c];
    }
    out.value = psi * kl;
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        const double via_q = (d_q[c] - sum_dq_q) / train_total;
        const double via_p = -(d_p[c] - sum_dp_p) / test_total;
        out.gradient[i] = psi * (via_q + via_p);
    }
    return out;
}

}  // namespace rds
