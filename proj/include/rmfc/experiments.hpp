#pragma once

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rmfc/simulate.hpp"

namespace rmfc {

enum class RewardSign { negative_distance, paper_literal };

inline double sign_value(RewardSign s) { return s == RewardSign::negative_distance ? -1.0 : 1.0; }

/// Distribution-matching benchmark: 1-D grid world, no idiosyncratic noise,
/// clamped shift dynamics, squared-distance reward to a target law.
struct Example1Config {
    int n_states = 7;
    std::vector<double> actions = {-1, 0, 1};
    std::vector<double> e0_values = {-1, 0, 1};
    double beta = 0.4;
    std::vector<double> target_mu = {0.05, 0.1, 0.2, 0.3, 0.2, 0.1, 0.05};
    std::vector<double> v_true = {0.2, 0.7, 0.1};
    std::vector<double> v_ref = {0.0, 1.0, 0.0};
    std::vector<double> deltas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2};
    int perturb_count = 10;
    RewardSign reward_sign = RewardSign::negative_distance;
    std::optional<int> initial_state;  // default: middle state
};

/// Systemic-risk benchmark: log-reserve grid with an absorbing default floor,
/// idiosyncratic plus common shocks, borrowing/mean-reversion/target reward.
struct Example2Config {
    int s_min = -1;
    int s_max = 4;
    std::vector<double> actions = {-1, 0, 1};
    std::vector<double> e_values = {-1, 0, 1};
    std::vector<double> lambda_eps = {0.05, 0.9, 0.05};
    std::vector<double> e0_values = {-2, -1, 0, 1, 2};
    double beta = 0.15;
    double q = 0.5;
    double epsilon = 1.0;
    double s_target = 2.0;
    std::vector<double> v_true = {0.1, 0.2, 0.4, 0.2, 0.1};
    std::vector<double> v_ref = {0.0, 0.0, 1.0, 0.0, 0.0};
    std::vector<double> deltas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    int perturb_count = 10;
    RewardSign reward_sign = RewardSign::negative_distance;
    std::optional<double> absorbing_state;  // default: s_min
    std::optional<int> initial_state;       // default: nearest state to s_target
    bool enforce_q_epsilon_rule = false;    // q^2 <= epsilon as a hard rule
};

inline ModelSpec build_example1(const Example1Config& cfg) {
    if (static_cast<int>(cfg.target_mu.size()) != cfg.n_states)
        throw DimensionError("build_example1: target_mu size mismatch");
    ModelSpec spec;
    spec.state_space = FiniteSpace::int_range(1, cfg.n_states);
    spec.action_space = FiniteSpace::from_values(cfg.actions);
    spec.idio_space = FiniteSpace::line({"0"}, {0.0});
    spec.common_space = FiniteSpace::from_values(cfg.e0_values);
    spec.beta = cfg.beta;
    spec.lambda_eps = Dist::dirac(spec.idio_space, 0);

    const int ns = cfg.n_states, na = static_cast<int>(cfg.actions.size()),
              ne0 = static_cast<int>(cfg.e0_values.size());
    std::vector<int> table(static_cast<std::size_t>(ns) * na * ne0);
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a)
            for (int e0 = 0; e0 < ne0; ++e0) {
                const double v = std::max(1.0, std::min(static_cast<double>(ns),
                                                        (s + 1) + cfg.actions[static_cast<std::size_t>(a)] +
                                                            cfg.e0_values[static_cast<std::size_t>(e0)]));
                table[(static_cast<std::size_t>(s) * na + a) * ne0 + e0] = static_cast<int>(v) - 1;
            }
    spec.transition = TransitionRule::from_table(std::move(table));
    spec.reward = rules::make_distribution_match(spec, cfg.target_mu, sign_value(cfg.reward_sign));

    spec.initial_mu = Dist::dirac(spec.state_space,
                                  cfg.initial_state ? *cfg.initial_state : (cfg.n_states - 1) / 2);
    spec.uncertainty_set = {Dist(spec.common_space, cfg.v_ref)};
    return validate_model(std::move(spec));
}

inline ModelSpec build_example2(const Example2Config& cfg, std::ostream* warn = nullptr) {
    if (cfg.q * cfg.q > cfg.epsilon) {
        const std::string msg = "example2: q^2 > epsilon (q=" + fmt_double(cfg.q) +
                                ", epsilon=" + fmt_double(cfg.epsilon) + ")";
        if (cfg.enforce_q_epsilon_rule) throw ValidationError(msg);
        if (warn) *warn << "warning: " << msg << "\n";
    }
    ModelSpec spec;
    spec.state_space = FiniteSpace::int_range(cfg.s_min, cfg.s_max);
    spec.action_space = FiniteSpace::from_values(cfg.actions);
    spec.idio_space = FiniteSpace::from_values(cfg.e_values);
    spec.common_space = FiniteSpace::from_values(cfg.e0_values);
    spec.beta = cfg.beta;
    spec.lambda_eps = Dist(spec.idio_space, cfg.lambda_eps);

    const double absorbing = cfg.absorbing_state ? *cfg.absorbing_state
                                                 : static_cast<double>(cfg.s_min);
    const int ns = spec.ns(), na = spec.na(), ne = spec.ne(), ne0 = spec.ne0();
    std::vector<int> table(static_cast<std::size_t>(ns) * na * ne * ne0);
    for (int s = 0; s < ns; ++s) {
        const double cs = cfg.s_min + s;
        for (int a = 0; a < na; ++a)
            for (int e = 0; e < ne; ++e)
                for (int e0 = 0; e0 < ne0; ++e0) {
                    double v;
                    if (cs == absorbing) {
                        v = cs;
                    } else {
                        v = cs + cfg.actions[static_cast<std::size_t>(a)] +
                            cfg.e_values[static_cast<std::size_t>(e)] +
                            cfg.e0_values[static_cast<std::size_t>(e0)];
                        v = std::max(static_cast<double>(cfg.s_min),
                                     std::min(static_cast<double>(cfg.s_max), v));
                    }
                    table[((static_cast<std::size_t>(s) * na + a) * ne + e) * ne0 + e0] =
                        static_cast<int>(v) - cfg.s_min;
                }
    }
    spec.transition = TransitionRule::from_table(std::move(table));
    spec.reward = rules::make_systemic_risk(spec, cfg.q, cfg.epsilon, cfg.s_target,
                                            sign_value(cfg.reward_sign));

    const int init = cfg.initial_state ? (*cfg.initial_state - cfg.s_min)
                                       : rules::nearest_coord_index(*spec.state_space, cfg.s_target);
    spec.initial_mu = Dist::dirac(spec.state_space, init);
    spec.uncertainty_set = {Dist(spec.common_space, cfg.v_ref)};
    return validate_model(std::move(spec));
}

struct ComparisonRow {
    int example = 1;
    double delta = 0.0;
    int run = 0;
    double value_ref = 0.0;
    double stderr_ref = 0.0;
    double value_robust = 0.0;
    double stderr_robust = 0.0;
    double robust_value_bound = 0.0;  // solved V-bar* at the initial law
    std::uint64_t seed = 0;
    int uncertainty_size = 0;
};

struct SweepConfig {
    int runs = 8;
    int grid_k = 6;
    double tol = 1e-6;
    int max_iter = 10000;
    // The benchmark optima mix actions per state (a Dirac population cannot
    // spread toward a hump target otherwise), so sweeps search per-state
    // kernels by default instead of deterministic maps.
    SearchConfig search = mixed_policy_search();
    int eval_paths = 200;
    double tail_tol = 1e-4;
    std::uint64_t seed = 20240901;
    bool nested_sampling = true;  // extend a cumulative pool across deltas within a run
    int audit_lambda_grid_k = 2;

    static SearchConfig mixed_policy_search() {
        SearchConfig s;
        s.enum_cap = 0;
        s.action_k = 4;
        s.restarts = 4;
        return s;
    }
};

struct SolveDigest {
    double delta = 0.0;
    int run = 0;
    int iterations = 0;
    double final_residual = 0.0;
    std::string search_mode;
};

struct SweepResult {
    std::vector<ComparisonRow> rows;
    bool audit_ok = true;
    AssumptionReport audit;
    std::string config_digest;
    // per run: solved robust values in delta order, for the monotonicity check
    std::vector<std::vector<double>> robust_bounds_per_run;
    std::vector<SolveDigest> solve_digests;  // reference solve first, then per (run, delta)
};

namespace detail {

inline double value_at_initial(const SolveResult& sol, const ModelSpec& spec,
                               ProjectionNorm norm) {
    return sol.value.at(sol.value.grid->project(spec.initial_mu, norm));
}

}  // namespace detail

/// The section-3 protocol: per uncertainty level and per independent run, build
/// the sampled uncertainty set, solve the robust problem, and compare the
/// robust and reference policies under the true common-noise law with common
/// random numbers.
inline SweepResult run_delta_sweep(int example, const ModelSpec& base_spec, const Dist& p_true,
                                   const Dist& p_ref, std::vector<double> deltas, int perturb_count,
                                   const SweepConfig& cfg, std::ostream* log = nullptr) {
    base_spec.require_validated();
    SweepResult result;
    std::sort(deltas.begin(), deltas.end());

    const AssumptionReport audit = audit_assumptions(base_spec, cfg.audit_lambda_grid_k);
    result.audit = audit;
    result.audit_ok = audit.beta_ok;
    if (!audit.beta_ok && log)
        *log << "warning: assumption audit failed (c_f_hat=" << audit.c_f_hat
             << ", 2*beta*c_f=" << 2 * base_spec.beta * audit.c_f_hat
             << " >= 1); proceeding with warn flag\n";

    // pi_ref: optimal for the singleton {v_ref}; solved once
    const ModelSpec ref_spec = base_spec.with_uncertainty({p_ref});
    const SolveResult ref_sol = solve_fixed_point(ref_spec, cfg.grid_k, cfg.search, cfg.tol,
                                                  cfg.max_iter, true, &audit);
    result.solve_digests.push_back({-1.0, -1, ref_sol.report.iterations,
                                    ref_sol.report.final_residual, ref_sol.report.search_mode});
    const PolicyRule ref_rule = policy_rule_from_artifact(ref_sol.policy, cfg.search.norm);

    const double c_r = std::max(audit.c_r_bound, 1e-12);
    const int T_trunc = truncation_horizon(base_spec.beta, c_r, cfg.tail_tol);
    CounterRng rng(cfg.seed);

    result.robust_bounds_per_run.assign(static_cast<std::size_t>(cfg.runs), {});
    for (int run = 0; run < cfg.runs; ++run) {
        std::vector<Dist> pool = {p_ref};
        for (std::size_t di = 0; di < deltas.size(); ++di) {
            const double delta = deltas[di];
            const std::uint64_t draw_seed = rng.derive({static_cast<std::uint64_t>(RngChannel::perturbation),
                                                        static_cast<std::uint64_t>(run),
                                                        static_cast<std::uint64_t>(di)});
            std::vector<Dist> fresh = make_perturbed_uncertainty_set(p_ref, delta, perturb_count, draw_seed);
            if (cfg.nested_sampling) {
                for (Dist& d : fresh) {
                    bool dup = false;
                    for (const Dist& e : pool)
                        if (linf_distance(e.weights(), d.weights()) <= 1e-12) {
                            dup = true;
                            break;
                        }
                    if (!dup) pool.push_back(std::move(d));
                }
            } else {
                pool = fresh;
            }
            const std::vector<Dist>& set = cfg.nested_sampling ? pool : fresh;

            SolveResult robust_sol =
                set.size() == 1
                    ? ref_sol  // singleton {v_ref}: identical problem, reuse
                    : solve_fixed_point(base_spec.with_uncertainty(set), cfg.grid_k, cfg.search,
                                        cfg.tol, cfg.max_iter, true, &audit);
            result.solve_digests.push_back({delta, run, robust_sol.report.iterations,
                                            robust_sol.report.final_residual,
                                            robust_sol.report.search_mode});
            const PolicyRule robust_rule = policy_rule_from_artifact(robust_sol.policy, cfg.search.norm);

            // common random numbers across the two policies at this (run, delta)
            const std::uint64_t eval_seed = rng.derive({static_cast<std::uint64_t>(RngChannel::common_noise),
                                                        static_cast<std::uint64_t>(run),
                                                        static_cast<std::uint64_t>(di)});
            const ValueEstimate ve_ref = value_estimate(base_spec, ref_rule, p_true, {}, T_trunc,
                                                        cfg.eval_paths, eval_seed, c_r);
            const ValueEstimate ve_rob = value_estimate(base_spec, robust_rule, p_true, {}, T_trunc,
                                                        cfg.eval_paths, eval_seed, c_r);

            ComparisonRow row;
            row.example = example;
            row.delta = delta;
            row.run = run;
            row.value_ref = ve_ref.mean;
            row.stderr_ref = ve_ref.std_error;
            row.value_robust = ve_rob.mean;
            row.stderr_robust = ve_rob.std_error;
            row.robust_value_bound = detail::value_at_initial(robust_sol, base_spec, cfg.search.norm);
            row.seed = eval_seed;
            row.uncertainty_size = static_cast<int>(set.size());
            result.rows.push_back(row);
            result.robust_bounds_per_run[static_cast<std::size_t>(run)].push_back(row.robust_value_bound);

            if (log)
                *log << "sweep example=" << example << " run=" << run << " delta=" << delta
                     << " |P0|=" << set.size() << " ref=" << ve_ref.mean << " robust=" << ve_rob.mean
                     << "\n";
        }
    }
    return result;
}

inline SweepResult run_delta_sweep(const Example1Config& cfg, const SweepConfig& scfg,
                                   std::ostream* log = nullptr) {
    const ModelSpec spec = build_example1(cfg);
    const Dist p_true(spec.common_space, cfg.v_true);
    const Dist p_ref(spec.common_space, cfg.v_ref);
    return run_delta_sweep(1, spec, p_true, p_ref, cfg.deltas, cfg.perturb_count, scfg, log);
}

inline SweepResult run_delta_sweep(const Example2Config& cfg, const SweepConfig& scfg,
                                   std::ostream* log = nullptr) {
    const ModelSpec spec = build_example2(cfg, log);
    const Dist p_true(spec.common_space, cfg.v_true);
    const Dist p_ref(spec.common_space, cfg.v_ref);
    return run_delta_sweep(2, spec, p_true, p_ref, cfg.deltas, cfg.perturb_count, scfg, log);
}

inline void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& os) {
    os << "example,delta,run,policy,value,stderr\n";
    for (const ComparisonRow& r : rows) {
        os << r.example << "," << fmt_double(r.delta) << "," << r.run << ",ref,"
           << fmt_double(r.value_ref) << "," << fmt_double(r.stderr_ref) << "\n";
        os << r.example << "," << fmt_double(r.delta) << "," << r.run << ",robust,"
           << fmt_double(r.value_robust) << "," << fmt_double(r.stderr_robust) << "\n";
    }
}

struct TrajectoryBundle {
    std::vector<std::uint64_t> seeds;
    std::vector<FlowTrace> traces;
    std::vector<NoisePath> paths;
};

/// Trajectory-panel data: per seed, a noise path, the population distribution
/// per step, and the per-state action kernels.
inline TrajectoryBundle emit_trajectory_figures_data(const ModelSpec& spec, const PolicyRule& policy,
                                                     const Dist& noise_law, int T, int n_seeds,
                                                     std::uint64_t seed, bool random_initial = true) {
    spec.require_validated();
    TrajectoryBundle out;
    CounterRng rng(seed);
    for (int k = 0; k < n_seeds; ++k) {
        ModelSpec local = spec;
        if (random_initial) {
            // Dirichlet(1,..,1) initial law
            std::vector<double> w(static_cast<std::size_t>(spec.ns()));
            double s = 0.0;
            for (int i = 0; i < spec.ns(); ++i) {
                const double u = rng.uniform({static_cast<std::uint64_t>(RngChannel::initial_dist),
                                              static_cast<std::uint64_t>(k),
                                              static_cast<std::uint64_t>(i)});
                w[static_cast<std::size_t>(i)] = -std::log(1.0 - u);
                s += w[static_cast<std::size_t>(i)];
            }
            for (double& x : w) x /= s;
            local.initial_mu = Dist(spec.state_space, std::move(w));
        }
        const std::uint64_t path_seed = rng.derive({static_cast<std::uint64_t>(RngChannel::common_noise),
                                                    static_cast<std::uint64_t>(k)});
        const NoisePath path = sample_fixed_path(noise_law, T, CounterRng(path_seed));
        out.seeds.push_back(path_seed);
        out.paths.push_back(path);
        out.traces.push_back(conditional_flow(local, policy, path));
    }
    return out;
}

inline void write_trajectories_csv(const TrajectoryBundle& bundle, const ModelSpec& spec,
                                   std::ostream& os) {
    os << "seed,t";
    for (const std::string& l : spec.state_space->labels()) os << ",mu_" << l;
    for (const std::string& s : spec.state_space->labels())
        for (const std::string& a : spec.action_space->labels()) os << ",pi_" << s << "_" << a;
    os << ",reward\n";
    for (std::size_t k = 0; k < bundle.traces.size(); ++k) {
        const FlowTrace& tr = bundle.traces[k];
        for (int t = 0; t <= tr.horizon(); ++t) {
            os << k << "," << t;
            for (int s = 0; s < spec.ns(); ++s)
                os << "," << fmt_double(tr.mu[static_cast<std::size_t>(t)][s]);
            const StatePolicy pol = disintegrate(tr.joint[static_cast<std::size_t>(t)]);
            for (int s = 0; s < spec.ns(); ++s)
                for (int a = 0; a < spec.na(); ++a) os << "," << fmt_double(pol.row(s)[a]);
            os << "," << fmt_double(tr.reward[static_cast<std::size_t>(t)]) << "\n";
        }
    }
}

inline void write_noise_paths_csv(const TrajectoryBundle& bundle, const ModelSpec& spec,
                                  std::ostream& os) {
    os << "seed,t,e0\n";
    for (std::size_t k = 0; k < bundle.paths.size(); ++k)
        for (int t = 0; t < bundle.paths[k].horizon(); ++t)
            os << k << "," << (t + 1) << ","
               << spec.common_space->labels()[static_cast<std::size_t>(
                      bundle.paths[k].points[static_cast<std::size_t>(t)])]
               << "\n";
}

}  // namespace rmfc
