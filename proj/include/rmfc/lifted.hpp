#pragma once

#include <vector>

#include "rmfc/model.hpp"

namespace rmfc {

/// One-step image of the population law: mu'(s') = sum_{s,a,e} Lambda[s,a]
/// lambda_eps[e] 1{F(s,a,Lambda,e,e0) = s'}. Exact pushforward, no sampling.
inline Dist lifted_transition(const JointDist& joint, int e0, const ModelSpec& spec) {
    spec.require_validated();
    const int ns = spec.ns(), na = spec.na(), ne = spec.ne();
    std::vector<double> out(static_cast<std::size_t>(ns), 0.0);
    const JointDist* jarg = spec.transition.lambda_free() ? nullptr : &joint;
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a) {
            const double w = joint.at(s, a);
            if (w == 0.0) continue;
            for (int e = 0; e < ne; ++e) {
                const double we = spec.lambda_eps[e];
                if (we == 0.0) continue;
                out[static_cast<std::size_t>(spec.step(s, a, jarg, e, e0))] += w * we;
            }
        }
    return Dist(spec.state_space, std::move(out));
}

/// Weighted successor list of the lifted kernel p-bar: one entry per common
/// noise value with positive mass, merged when clamping collapses successors.
struct WeightedSuccessor {
    Dist measure;
    double weight;
};

inline std::vector<WeightedSuccessor> lifted_kernel(const JointDist& joint, const Dist& p,
                                                    const ModelSpec& spec) {
    spec.require_validated();
    if (!p.space()->same_as(*spec.common_space))
        throw DimensionError("lifted_kernel: p not on the common-noise space");
    std::vector<WeightedSuccessor> out;
    for (int e0 = 0; e0 < spec.ne0(); ++e0) {
        const double w = p[e0];
        if (w == 0.0) continue;
        Dist succ = lifted_transition(joint, e0, spec);
        bool merged = false;
        for (auto& entry : out)
            if (linf_distance(entry.measure.weights(), succ.weights()) <= 1e-12) {
                entry.weight += w;
                merged = true;
                break;
            }
        if (!merged) out.push_back({std::move(succ), w});
    }
    return out;
}

/// r-bar(mu, Lambda) = integral of r against Lambda.
inline double lifted_reward(const JointDist& joint, const ModelSpec& spec) {
    spec.require_validated();
    RewardContext ctx;
    ctx.joint = &joint;
    ctx.s_marginal = &joint.s_marginal_weights();
    double mean = 0.0;
    for (int s = 0; s < spec.ns(); ++s)
        mean += joint.s_marginal_weights()[static_cast<std::size_t>(s)] * spec.state_space->coord(s);
    ctx.mean_s = mean;
    double acc = 0.0;
    for (int s = 0; s < spec.ns(); ++s)
        for (int a = 0; a < spec.na(); ++a) {
            const double w = joint.at(s, a);
            if (w == 0.0) continue;
            acc += w * spec.reward.eval(s, a, spec.na(), ctx);
        }
    return acc;
}

}  // namespace rmfc
