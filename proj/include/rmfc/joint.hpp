#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "rmfc/dist.hpp"

namespace rmfc {

/// Randomized action kernel: one action distribution per state.
struct StatePolicy {
    std::vector<Dist> rows;  // rows[s] is a Dist over the action space

    const Dist& row(int s) const { return rows[static_cast<std::size_t>(s)]; }
    int size() const { return static_cast<int>(rows.size()); }
};

/// Probability matrix over S x A with its S-marginal tracked exactly.
class JointDist {
public:
    /// Raw-matrix constructor; the marginal is the row sums.
    JointDist(SpacePtr space_s, SpacePtr space_a, std::vector<double> weights)
        : space_s_(std::move(space_s)), space_a_(std::move(space_a)), w_(std::move(weights)) {
        const int ns = space_s_->size(), na = space_a_->size();
        if (static_cast<int>(w_.size()) != ns * na)
            throw DimensionError("JointDist: weight matrix shape mismatch");
        marginal_.assign(static_cast<std::size_t>(ns), 0.0);
        double total = 0.0;
        for (int s = 0; s < ns; ++s) {
            double row = 0.0;
            for (int a = 0; a < na; ++a) {
                const double v = w_[static_cast<std::size_t>(s) * na + a];
                if (!(v >= 0.0)) throw ValidationError("JointDist: negative weight");
                row += v;
            }
            marginal_[static_cast<std::size_t>(s)] = row;
            total += row;
        }
        if (std::abs(total - 1.0) > kMassTol)
            throw ValidationError("JointDist: mass " + fmt_double(total) + " not within 1e-12 of 1");
    }

    int ns() const { return space_s_->size(); }
    int na() const { return space_a_->size(); }
    const SpacePtr& space_s() const { return space_s_; }
    const SpacePtr& space_a() const { return space_a_; }
    double at(int s, int a) const { return w_[static_cast<std::size_t>(s) * na() + a]; }
    const std::vector<double>& weights() const { return w_; }

    /// pj_S: the cached S-marginal.
    Dist s_marginal() const { return Dist(space_s_, marginal_); }
    const std::vector<double>& s_marginal_weights() const { return marginal_; }

    Dist a_marginal() const {
        std::vector<double> m(static_cast<std::size_t>(na()), 0.0);
        for (int s = 0; s < ns(); ++s)
            for (int a = 0; a < na(); ++a) m[static_cast<std::size_t>(a)] += at(s, a);
        return Dist(space_a_, std::move(m));
    }

    bool same_spaces(const JointDist& o) const {
        return space_s_->same_as(*o.space_s_) && space_a_->same_as(*o.space_a_);
    }

private:
    friend JointDist kernel_to_joint(const Dist&, const StatePolicy&);

    JointDist(SpacePtr ss, SpacePtr sa, std::vector<double> w, std::vector<double> marginal)
        : space_s_(std::move(ss)), space_a_(std::move(sa)), w_(std::move(w)), marginal_(std::move(marginal)) {}

    SpacePtr space_s_, space_a_;
    std::vector<double> w_;        // row-major |S| x |A|
    std::vector<double> marginal_; // row sums, cached at construction
};

/// mu kernel-product pi: weights[s][a] = mu[s] * pi[a|s]; the S-marginal is mu
/// bit-exactly (carried, not recomputed).
inline JointDist kernel_to_joint(const Dist& mu, const StatePolicy& pi) {
    const int ns = mu.size();
    if (pi.size() != ns) throw DimensionError("kernel_to_joint: policy row count mismatch");
    for (const Dist& row : pi.rows)
        if (!row.space()->same_as(*pi.rows[0].space()))
            throw DimensionError("kernel_to_joint: policy rows on different action spaces");
    SpacePtr sa = pi.rows[0].space();
    const int na = sa->size();
    std::vector<double> w(static_cast<std::size_t>(ns) * na, 0.0);
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a) w[static_cast<std::size_t>(s) * na + a] = mu[s] * pi.row(s)[a];
    return JointDist(mu.space(), std::move(sa), std::move(w), mu.weights());
}

/// Conditional action kernel of a joint; zero-mass rows default to uniform.
inline StatePolicy disintegrate(const JointDist& joint) {
    StatePolicy pi;
    const int ns = joint.ns(), na = joint.na();
    pi.rows.reserve(static_cast<std::size_t>(ns));
    for (int s = 0; s < ns; ++s) {
        const double m = joint.s_marginal_weights()[static_cast<std::size_t>(s)];
        if (m == 0.0) {
            pi.rows.push_back(Dist::uniform(joint.space_a()));
            continue;
        }
        std::vector<double> row(static_cast<std::size_t>(na));
        for (int a = 0; a < na; ++a) row[static_cast<std::size_t>(a)] = joint.at(s, a) / m;
        pi.rows.emplace_back(joint.space_a(), std::move(row));
    }
    return pi;
}

/// Exact W1 on S x A under the sum product metric d_S + d_A.
inline double w1_product(const JointDist& a, const JointDist& b) {
    if (!a.same_spaces(b)) throw DimensionError("w1_product: joints on different spaces");
    const int ns = a.ns(), na = a.na();
    const int n = ns * na;
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int s1 = 0; s1 < ns; ++s1)
        for (int a1 = 0; a1 < na; ++a1)
            for (int s2 = 0; s2 < ns; ++s2)
                for (int a2 = 0; a2 < na; ++a2)
                    cost[static_cast<std::size_t>(s1 * na + a1) * n + (s2 * na + a2)] =
                        a.space_s()->dist(s1, s2) + a.space_a()->dist(a1, a2);
    return transport_cost(a.weights(), b.weights(), cost);
}

}  // namespace rmfc
