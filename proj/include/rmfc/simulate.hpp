#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rmfc/solver.hpp"

namespace rmfc {

/// Closed-loop policy as a function of the current population law.
using PolicyRule = std::function<StatePolicy(const Dist& mu)>;

/// Lookup rule for a solved policy table: nearest grid point's kernel.
inline PolicyRule policy_rule_from_artifact(const PolicyTable& table,
                                            ProjectionNorm norm = ProjectionNorm::W1) {
    return [&table, norm](const Dist& mu) {
        return table.at(table.grid->project(mu, norm)).policy;
    };
}

enum class NoiseProvenance { fixed_p, adversary, explicit_path };

struct NoisePath {
    std::vector<int> points;  // indices into the common-noise space, e0_1..e0_T
    NoiseProvenance provenance = NoiseProvenance::explicit_path;

    int horizon() const { return static_cast<int>(points.size()); }
};

/// Exact conditional-law trajectory along one common-noise path.
/// mu_t and Lambda_t for t = 0..T, with pj_S(Lambda_t) = mu_t bit-exactly.
struct FlowTrace {
    std::vector<Dist> mu;            // T+1 entries
    std::vector<JointDist> joint;    // T+1 entries
    std::vector<double> reward;      // r-bar(mu_t, Lambda_t), T+1 entries
    std::vector<int> p_choice;       // adversary index per step (-1 when not applicable)

    int horizon() const { return static_cast<int>(mu.size()) - 1; }
};

/// Deterministic flow of the lifted dynamics: Lambda_t = mu_t (x) pi(mu_t),
/// mu_{t+1} = F-bar(Lambda_t, e0_{t+1}). No sampling.
inline FlowTrace conditional_flow(const ModelSpec& spec, const PolicyRule& policy,
                                  const NoisePath& noise) {
    spec.require_validated();
    FlowTrace trace;
    Dist mu = spec.initial_mu;
    for (int t = 0;; ++t) {
        JointDist joint = kernel_to_joint(mu, policy(mu));
        trace.mu.push_back(mu);
        trace.reward.push_back(lifted_reward(joint, spec));
        trace.p_choice.push_back(-1);
        if (t == noise.horizon()) {
            trace.joint.push_back(std::move(joint));
            break;
        }
        Dist next = lifted_transition(joint, noise.points[static_cast<std::size_t>(t)], spec);
        trace.joint.push_back(std::move(joint));
        mu = std::move(next);
    }
    return trace;
}

/// Markov worst-case rollout: at each step the adversary picks
/// p_{t+1} = argmin_p of the continuation at the current joint, then e0_{t+1}
/// is drawn from it by inverse CDF on the seeded stream.
inline std::pair<NoisePath, FlowTrace> sample_adversarial_path(
    const ModelSpec& spec, const PolicyRule& policy,
    const std::function<int(const JointDist&)>& adversary, int T, std::uint64_t seed) {
    spec.require_validated();
    CounterRng rng(seed);
    NoisePath path;
    path.provenance = NoiseProvenance::adversary;
    FlowTrace trace;
    Dist mu = spec.initial_mu;
    for (int t = 0; t <= T; ++t) {
        JointDist joint = kernel_to_joint(mu, policy(mu));
        trace.mu.push_back(mu);
        trace.reward.push_back(lifted_reward(joint, spec));
        if (t == T) {
            trace.p_choice.push_back(-1);
            trace.joint.push_back(std::move(joint));
            break;
        }
        const int p_idx = adversary(joint);
        trace.p_choice.push_back(p_idx);
        const Dist& p = spec.uncertainty_set[static_cast<std::size_t>(p_idx)];
        const double u = rng.uniform({static_cast<std::uint64_t>(RngChannel::common_noise),
                                      static_cast<std::uint64_t>(t)});
        const int e0 = sample_index(p.weights(), u);
        path.points.push_back(e0);
        Dist next = lifted_transition(joint, e0, spec);
        trace.joint.push_back(std::move(joint));
        mu = std::move(next);
    }
    return {std::move(path), std::move(trace)};
}

/// I.i.d. common-noise path from a fixed one-step law.
inline NoisePath sample_fixed_path(const Dist& p, int T, const CounterRng& rng,
                                   std::uint64_t trial = 0) {
    NoisePath path;
    path.provenance = NoiseProvenance::fixed_p;
    path.points.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        const double u = rng.uniform({static_cast<std::uint64_t>(RngChannel::common_noise), trial,
                                      static_cast<std::uint64_t>(t)});
        path.points.push_back(sample_index(p.weights(), u));
    }
    return path;
}

/// Which law the finite panel feeds into the policy and the dynamics. The
/// N-agent system proper uses the empirical joint in F; the mean-field policy
/// is a function of the exact conditional law.
struct PanelOptions {
    bool policy_uses_empirical = false;    // pi(.|s, mu-hat) instead of pi(.|s, mu)
    bool dynamics_use_empirical = true;    // F(.., empirical joint, ..) vs exact Lambda_t
};

struct AgentPanel {
    std::vector<std::vector<int>> states;   // [t][agent], t = 0..T
    std::vector<std::vector<int>> actions;  // [t][agent], t = 0..T

    int horizon() const { return static_cast<int>(states.size()) - 1; }
    int agents() const { return states.empty() ? 0 : static_cast<int>(states[0].size()); }
};

inline JointDist empirical_joint(const std::vector<int>& states, const std::vector<int>& actions,
                                 const ModelSpec& spec) {
    const int n = static_cast<int>(states.size());
    std::vector<long> counts(static_cast<std::size_t>(spec.ns()) * spec.na(), 0);
    for (int i = 0; i < n; ++i)
        ++counts[static_cast<std::size_t>(states[static_cast<std::size_t>(i)]) * spec.na() +
                 actions[static_cast<std::size_t>(i)]];
    std::vector<double> w(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c)
        w[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
    return JointDist(spec.state_space, spec.action_space, std::move(w));
}

/// N-agent rollout sharing one common-noise path. Per-agent randomness comes
/// from counter-based streams keyed (seed, agent, t, channel), so panels are
/// reproducible and nested across N.
inline AgentPanel simulate_n_agents(const ModelSpec& spec, const PolicyRule& policy,
                                    const NoisePath& noise, int N, std::uint64_t seed,
                                    PanelOptions opt = {}) {
    spec.require_validated();
    if (N < 1) throw ValidationError("simulate_n_agents: N must be >= 1");
    CounterRng rng(seed);
    const int T = noise.horizon();

    // exact conditional flow along the same path, for the mean-field-frozen
    // arguments (policy by default, dynamics when requested)
    std::optional<FlowTrace> flow;
    if (!opt.policy_uses_empirical || !opt.dynamics_use_empirical)
        flow = conditional_flow(spec, policy, noise);

    AgentPanel panel;
    panel.states.assign(static_cast<std::size_t>(T) + 1, std::vector<int>(static_cast<std::size_t>(N), 0));
    panel.actions.assign(static_cast<std::size_t>(T) + 1, std::vector<int>(static_cast<std::size_t>(N), 0));

    for (int i = 0; i < N; ++i) {
        const double u = rng.uniform({static_cast<std::uint64_t>(RngChannel::init_state),
                                      static_cast<std::uint64_t>(i)});
        panel.states[0][static_cast<std::size_t>(i)] = sample_index(spec.initial_mu.weights(), u);
    }

    for (int t = 0; t <= T; ++t) {
        // policy argument: exact law or empirical state marginal
        std::optional<StatePolicy> pol;
        if (opt.policy_uses_empirical) {
            std::vector<double> m(static_cast<std::size_t>(spec.ns()), 0.0);
            for (int i = 0; i < N; ++i)
                m[static_cast<std::size_t>(panel.states[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)])] += 1.0 / N;
            pol = policy(Dist(spec.state_space, std::move(m)));
        } else {
            pol = policy(flow->mu[static_cast<std::size_t>(t)]);
        }
        for (int i = 0; i < N; ++i) {
            const double u = rng.uniform({static_cast<std::uint64_t>(RngChannel::action),
                                          static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t)});
            panel.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = sample_index(
                pol->row(panel.states[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]).weights(), u);
        }
        if (t == T) break;

        std::optional<JointDist> mean_field;
        if (opt.dynamics_use_empirical)
            mean_field = empirical_joint(panel.states[static_cast<std::size_t>(t)],
                                         panel.actions[static_cast<std::size_t>(t)], spec);
        else
            mean_field = flow->joint[static_cast<std::size_t>(t)];
        const JointDist* jarg = spec.transition.lambda_free() ? nullptr : &*mean_field;

        const int e0 = noise.points[static_cast<std::size_t>(t)];
        for (int i = 0; i < N; ++i) {
            int e = 0;
            if (spec.ne() > 1) {
                const double u = rng.uniform({static_cast<std::uint64_t>(RngChannel::idio_noise),
                                              static_cast<std::uint64_t>(i),
                                              static_cast<std::uint64_t>(t)});
                e = sample_index(spec.lambda_eps.weights(), u);
            }
            panel.states[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(i)] =
                spec.step(panel.states[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)],
                          panel.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)], jarg, e, e0);
        }
    }
    return panel;
}

/// Gap table of the propagation-of-chaos experiment: expected W1 between the
/// N-agent empirical joint and the exact conditional joint, per (N, t).
struct ChaosTable {
    std::vector<int> agent_counts;
    int horizon = 0;
    int trials = 0;
    // indexed [n_idx][t]
    std::vector<std::vector<double>> mean_gap;
    std::vector<std::vector<double>> median_gap;
    std::vector<double> slope_per_t;  // least-squares slope of log(mean gap) vs log N
};

inline ChaosTable chaos_gap(const ModelSpec& spec, const PolicyRule& policy, const Dist& noise_law,
                            const std::vector<int>& agent_counts, int T, int trials,
                            std::uint64_t seed) {
    spec.require_validated();
    if (trials < 2) throw ValidationError("chaos_gap: need at least 2 trials");
    ChaosTable table;
    table.agent_counts = agent_counts;
    table.horizon = T;
    table.trials = trials;
    const std::size_t nn = agent_counts.size();
    std::vector<std::vector<std::vector<double>>> gaps(
        nn, std::vector<std::vector<double>>(static_cast<std::size_t>(T) + 1));

    CounterRng rng(seed);
    for (int trial = 0; trial < trials; ++trial) {
        const NoisePath path = sample_fixed_path(noise_law, T, rng, static_cast<std::uint64_t>(trial));
        const FlowTrace flow = conditional_flow(spec, policy, path);
        const std::uint64_t panel_seed = rng.derive({static_cast<std::uint64_t>(RngChannel::init_state),
                                                     static_cast<std::uint64_t>(trial)});
        for (std::size_t ni = 0; ni < nn; ++ni) {
            const AgentPanel panel =
                simulate_n_agents(spec, policy, path, agent_counts[ni], panel_seed);
            for (int t = 0; t <= T; ++t) {
                const JointDist emp = empirical_joint(panel.states[static_cast<std::size_t>(t)],
                                                      panel.actions[static_cast<std::size_t>(t)], spec);
                gaps[ni][static_cast<std::size_t>(t)].push_back(
                    w1_product(emp, flow.joint[static_cast<std::size_t>(t)]));
            }
        }
    }

    table.mean_gap.assign(nn, std::vector<double>(static_cast<std::size_t>(T) + 1, 0.0));
    table.median_gap.assign(nn, std::vector<double>(static_cast<std::size_t>(T) + 1, 0.0));
    for (std::size_t ni = 0; ni < nn; ++ni)
        for (int t = 0; t <= T; ++t) {
            auto& v = gaps[ni][static_cast<std::size_t>(t)];
            double mean = 0.0;
            for (double x : v) mean += x;
            table.mean_gap[ni][static_cast<std::size_t>(t)] = mean / static_cast<double>(v.size());
            std::vector<double> sorted = v;
            std::sort(sorted.begin(), sorted.end());
            const std::size_t m = sorted.size();
            table.median_gap[ni][static_cast<std::size_t>(t)] =
                m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
        }

    table.slope_per_t.assign(static_cast<std::size_t>(T) + 1, 0.0);
    for (int t = 0; t <= T; ++t) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (std::size_t ni = 0; ni < nn; ++ni) {
            const double g = table.mean_gap[ni][static_cast<std::size_t>(t)];
            if (g <= 0.0) continue;  // degenerate model: empirical equals exact
            const double x = std::log(static_cast<double>(agent_counts[ni]));
            const double y = std::log(g);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++cnt;
        }
        table.slope_per_t[static_cast<std::size_t>(t)] =
            cnt >= 2 ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) : 0.0;
    }
    return table;
}

/// Horizon making the discounted tail beta^T C_r / (1-beta) fall below tail_tol.
inline int truncation_horizon(double beta, double c_r_bound, double tail_tol) {
    if (beta == 0.0) return 1;
    if (c_r_bound <= 0.0) return 1;
    const double x = tail_tol * (1.0 - beta) / c_r_bound;
    if (x >= 1.0) return 1;
    return static_cast<int>(std::ceil(std::log(x) / std::log(beta)));
}

struct ValueEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    double truncation_bound = 0.0;
    int horizon = 0;
    int paths = 0;
    double max_projection_gap = 0.0;  // W1 from visited laws to the artifact grid, when tracked
};

/// Monte Carlo estimate of sum_t beta^t r-bar(mu_t, Lambda_t) using exact
/// conditional flows; the only randomness is the common noise path. Either a
/// fixed one-step law or an adversary selector drives the noise.
inline ValueEstimate value_estimate(const ModelSpec& spec, const PolicyRule& policy,
                                    const std::optional<Dist>& fixed_p,
                                    const std::function<int(const JointDist&)>& adversary,
                                    int T_trunc, int paths, std::uint64_t seed,
                                    double c_r_bound, const SimplexGrid* grid = nullptr,
                                    ProjectionNorm norm = ProjectionNorm::W1) {
    spec.require_validated();
    if (paths < 1) throw ValidationError("value_estimate: need at least one path");
    if (!fixed_p && !adversary) throw ValidationError("value_estimate: no noise source");
    CounterRng rng(seed);
    std::vector<double> gains(static_cast<std::size_t>(paths));
    double max_gap = 0.0;
    for (int j = 0; j < paths; ++j) {
        FlowTrace trace;
        if (fixed_p) {
            const NoisePath path = sample_fixed_path(*fixed_p, T_trunc, rng, static_cast<std::uint64_t>(j));
            trace = conditional_flow(spec, policy, path);
        } else {
            const std::uint64_t sub = rng.derive({static_cast<std::uint64_t>(RngChannel::common_noise),
                                                  static_cast<std::uint64_t>(j)});
            trace = sample_adversarial_path(spec, policy, adversary, T_trunc, sub).second;
        }
        double g = 0.0, disc = 1.0;
        for (int t = 0; t < T_trunc; ++t) {
            g += disc * trace.reward[static_cast<std::size_t>(t)];
            disc *= spec.beta;
        }
        if (grid)
            for (const Dist& mu : trace.mu) {
                const int idx = grid->project(mu, norm);
                max_gap = std::max(max_gap, w1_finite(mu, grid->point(idx)));
            }
        gains[static_cast<std::size_t>(j)] = g;
    }
    ValueEstimate est;
    est.paths = paths;
    est.horizon = T_trunc;
    double acc = 0.0;
    for (double g : gains) acc += g;
    est.mean = acc / paths;
    double var = 0.0;
    for (double g : gains) var += (g - est.mean) * (g - est.mean);
    var = paths > 1 ? var / (paths - 1) : 0.0;
    est.std_error = paths > 1 ? std::sqrt(var / paths) : 0.0;
    est.truncation_bound = std::pow(spec.beta, T_trunc) * c_r_bound / (1.0 - spec.beta);
    est.max_projection_gap = max_gap;
    return est;
}

/// Time-indexed kernels of an executed flow: the open-loop unrolling of a
/// closed-loop run along one noise path.
inline std::vector<StatePolicy> unroll_open_loop(const FlowTrace& trace) {
    std::vector<StatePolicy> kernels;
    kernels.reserve(trace.joint.size());
    for (const JointDist& j : trace.joint) kernels.push_back(disintegrate(j));
    return kernels;
}

/// Replay time-indexed kernels along a noise path; matches the closed-loop
/// flow that produced them.
inline FlowTrace replay_open_loop(const ModelSpec& spec, const std::vector<StatePolicy>& kernels,
                                  const NoisePath& noise) {
    spec.require_validated();
    if (static_cast<int>(kernels.size()) < noise.horizon() + 1)
        throw DimensionError("replay_open_loop: not enough kernels for the horizon");
    int t = 0;
    FlowTrace trace;
    Dist mu = spec.initial_mu;
    for (;; ++t) {
        JointDist joint = kernel_to_joint(mu, kernels[static_cast<std::size_t>(t)]);
        trace.mu.push_back(mu);
        trace.reward.push_back(lifted_reward(joint, spec));
        trace.p_choice.push_back(-1);
        if (t == noise.horizon()) {
            trace.joint.push_back(std::move(joint));
            break;
        }
        Dist next = lifted_transition(joint, noise.points[static_cast<std::size_t>(t)], spec);
        trace.joint.push_back(std::move(joint));
        mu = std::move(next);
    }
    return trace;
}

}  // namespace rmfc
