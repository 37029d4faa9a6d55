#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "rmfc/lifted.hpp"

namespace rmfc {

/// Numerical plausibility check of the standing Lipschitz assumptions. The
/// estimates are maxima over a finite pair enumeration; a diagnostic gate, not
/// a proof.
struct AssumptionReport {
    double c_f_hat = 0.0;    // transition Lipschitz estimate (lambda_eps-averaged)
    double c_r_lip = 0.0;    // reward Lipschitz estimate
    double c_r_bound = 0.0;  // max |r| over the enumeration
    bool beta_ok = false;    // beta < min(1, 1/(2 c_f_hat))
    double beta = 0.0;
    std::string worst_f;     // witness of the transition maximum
    std::string worst_r;     // witness of the reward maximum

    /// L-bar = 2 c_r / (1 - 2 beta c_F); +inf when the denominator closes.
    double lipschitz_value_bound() const {
        const double den = 1.0 - 2.0 * beta * c_f_hat;
        if (den <= 0.0) return std::numeric_limits<double>::infinity();
        return 2.0 * c_r_lip / den;
    }
};

namespace detail {

inline SpacePtr make_product_space(const ModelSpec& spec) {
    const int ns = spec.ns(), na = spec.na();
    std::vector<std::string> labels;
    std::vector<double> coords;
    const int n = ns * na;
    labels.reserve(static_cast<std::size_t>(n));
    coords.reserve(static_cast<std::size_t>(n));
    std::vector<double> metric(static_cast<std::size_t>(n) * n, 0.0);
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a) {
            labels.push_back(spec.state_space->labels()[static_cast<std::size_t>(s)] + "|" +
                             spec.action_space->labels()[static_cast<std::size_t>(a)]);
            coords.push_back(0.0);
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            metric[static_cast<std::size_t>(i) * n + j] =
                spec.state_space->dist(i / na, j / na) + spec.action_space->dist(i % na, j % na);
    return std::make_shared<const FiniteSpace>(std::move(labels), std::move(coords),
                                               std::move(metric));
}

/// Joint laws used by the audit: the full joint-simplex grid at the given
/// resolution (which contains every Dirac joint for any k >= 1).
inline std::vector<JointDist> audit_joint_samples(const ModelSpec& spec, int lambda_grid_k) {
    SpacePtr prod = make_product_space(spec);
    SimplexGrid jgrid(prod, std::max(1, lambda_grid_k));
    std::vector<JointDist> joints;
    joints.reserve(static_cast<std::size_t>(jgrid.size()));
    for (int i = 0; i < jgrid.size(); ++i)
        joints.emplace_back(spec.state_space, spec.action_space, jgrid.point_weights(i));
    return joints;
}

}  // namespace detail

inline AssumptionReport audit_assumptions(const ModelSpec& spec, int lambda_grid_k = 2) {
    spec.require_validated();
    AssumptionReport rep;
    rep.beta = spec.beta;

    const int ns = spec.ns(), na = spec.na(), ne = spec.ne(), ne0 = spec.ne0();
    std::vector<JointDist> joints = detail::audit_joint_samples(spec, lambda_grid_k);
    const int nj = static_cast<int>(joints.size());

    // pairwise W1 between sampled joints under d_S + d_A
    std::vector<double> jw1(static_cast<std::size_t>(nj) * nj, 0.0);
    for (int i = 0; i < nj; ++i)
        for (int j = i + 1; j < nj; ++j) {
            const double d = w1_product(joints[static_cast<std::size_t>(i)], joints[static_cast<std::size_t>(j)]);
            jw1[static_cast<std::size_t>(i) * nj + j] = d;
            jw1[static_cast<std::size_t>(j) * nj + i] = d;
        }

    // lambda_eps-averaged displacement of F between (s,Lambda) and (s~,Lambda~),
    // same action and common noise
    auto avg_disp = [&](int s, int st, int a, int e0, const JointDist* j1, const JointDist* j2) {
        double acc = 0.0;
        for (int e = 0; e < ne; ++e) {
            const double we = spec.lambda_eps[e];
            if (we == 0.0) continue;
            const int t1 = spec.step(s, a, j1, e, e0);
            const int t2 = spec.step(st, a, j2, e, e0);
            acc += we * spec.state_space->dist(t1, t2);
        }
        return acc;
    };

    RewardContext rc1, rc2;
    auto fill_ctx = [&](RewardContext& ctx, const JointDist& j) {
        ctx.joint = &j;
        ctx.s_marginal = &j.s_marginal_weights();
        double mean = 0.0;
        for (int s = 0; s < ns; ++s)
            mean += j.s_marginal_weights()[static_cast<std::size_t>(s)] * spec.state_space->coord(s);
        ctx.mean_s = mean;
    };

    const bool f_free = spec.transition.lambda_free();
    for (int i = 0; i < nj; ++i) {
        fill_ctx(rc1, joints[static_cast<std::size_t>(i)]);
        for (int s = 0; s < ns; ++s)
            for (int a = 0; a < na; ++a)
                rep.c_r_bound = std::max(rep.c_r_bound, std::abs(spec.reward.eval(s, a, na, rc1)));
        for (int j = i; j < nj; ++j) {
            const double dj = jw1[static_cast<std::size_t>(i) * nj + j];
            fill_ctx(rc2, joints[static_cast<std::size_t>(j)]);
            for (int s = 0; s < ns; ++s)
                for (int st = 0; st < ns; ++st) {
                    const double dss = spec.state_space->dist(s, st);
                    const double den = dss + dj;
                    if (den == 0.0) continue;  // degenerate pair, skipped
                    for (int a = 0; a < na; ++a) {
                        // transition ratio; for Lambda-free dynamics the joints only
                        // enter through the denominator, so only dj = 0 matters
                        if (!f_free || j == i) {
                            for (int e0 = 0; e0 < ne0; ++e0) {
                                const double num = avg_disp(s, st, a, e0,
                                                            &joints[static_cast<std::size_t>(i)],
                                                            &joints[static_cast<std::size_t>(j)]);
                                const double ratio = num / den;
                                if (ratio > rep.c_f_hat) {
                                    rep.c_f_hat = ratio;
                                    std::ostringstream os;
                                    os << "F ratio " << ratio << " at s=" << spec.state_space->labels()[static_cast<std::size_t>(s)]
                                       << " s~=" << spec.state_space->labels()[static_cast<std::size_t>(st)]
                                       << " a=" << spec.action_space->labels()[static_cast<std::size_t>(a)]
                                       << " e0=" << spec.common_space->labels()[static_cast<std::size_t>(e0)]
                                       << " W1(L,L~)=" << dj;
                                    rep.worst_f = os.str();
                                }
                            }
                        }
                        const double rr = std::abs(spec.reward.eval(s, a, na, rc1) -
                                                   spec.reward.eval(st, a, na, rc2)) /
                                          den;
                        if (rr > rep.c_r_lip) {
                            rep.c_r_lip = rr;
                            std::ostringstream os;
                            os << "r ratio " << rr << " at s=" << spec.state_space->labels()[static_cast<std::size_t>(s)]
                               << " s~=" << spec.state_space->labels()[static_cast<std::size_t>(st)]
                               << " a=" << spec.action_space->labels()[static_cast<std::size_t>(a)]
                               << " W1(L,L~)=" << dj;
                            rep.worst_r = os.str();
                        }
                    }
                }
        }
    }
    rep.beta_ok = spec.beta < 1.0 && (rep.c_f_hat == 0.0 || spec.beta < 1.0 / (2.0 * rep.c_f_hat));
    return rep;
}

}  // namespace rmfc
