#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "rmfc/audit.hpp"
#include "rmfc/lifted.hpp"
#include "rmfc/uncertainty.hpp"

namespace rmfc {

struct SearchConfig {
    int enum_cap = 4096;   // exact deterministic-policy enumeration while |A|^|S| <= cap
    int restarts = 8;      // coordinate-ascent starting points (fallback mode)
    int action_k = 4;      // per-state action-simplex resolution (fallback mode)
    std::uint64_t seed = 0;
    ProjectionNorm norm = ProjectionNorm::W1;
    int threads = 0;       // 0 = hardware concurrency
    std::size_t cache_budget_bytes = 512ull << 20;
};

struct ValueTable {
    GridPtr grid;
    std::vector<double> values;
    double lipschitz_bound = std::numeric_limits<double>::infinity();

    double at(int i) const { return values[static_cast<std::size_t>(i)]; }
};

struct PolicyEntry {
    StatePolicy policy;  // disintegration of the maximizing joint
    JointDist joint;     // the maximizing joint itself; s-marginal equals the grid point
};

struct PolicyTable {
    GridPtr grid;
    std::vector<PolicyEntry> entries;

    const PolicyEntry& at(int i) const { return entries[static_cast<std::size_t>(i)]; }
};

/// Worst-case noise selector. The table holds the argmin at each grid point's
/// on-policy joint; arbitrary off-grid joints go through the online closure
/// (see SolverArtifact::adversary_online / BellmanOperator::inner_min_joint).
struct AdversarySelector {
    std::vector<int> table;  // grid point -> index into uncertainty_set

    int at(int i) const { return table[static_cast<std::size_t>(i)]; }
};

struct SolveReport {
    int iterations = 0;
    double final_residual = std::numeric_limits<double>::infinity();
    std::vector<double> residual_history;
    double wall_time_s = 0.0;  // reported, never serialized into artifacts
    std::vector<double> contraction_ratio_samples;
    std::string search_mode;
    double aposteriori_bound = std::numeric_limits<double>::infinity();
    int grid_size = 0;
};

namespace detail {

inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    std::exception_ptr err;
    std::mutex err_mu;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&]() {
            try {
                for (;;) {
                    const int i = next.fetch_add(1);
                    if (i >= n) return;
                    fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace detail

/// One-step evaluation machinery for the Bellman-Isaacs operator on a fixed
/// (model, grid, search) triple. Successor projections do not depend on the
/// value table, so they are compiled once and reused across iterations.
class BellmanOperator {
public:
    enum class Mode { enumeration, coordinate_ascent };

    BellmanOperator(const ModelSpec& spec, GridPtr grid, SearchConfig cfg,
                    std::optional<Dist> fixed_p = std::nullopt)
        : spec_(spec), grid_(std::move(grid)), cfg_(cfg), fixed_p_(std::move(fixed_p)) {
        spec_.require_validated();
        if (!grid_->space()->same_as(*spec_.state_space))
            throw DimensionError("BellmanOperator: grid not on the state space");
        if (fixed_p_ && !fixed_p_->space()->same_as(*spec_.common_space))
            throw DimensionError("BellmanOperator: fixed p not on the common-noise space");
        ns_ = spec_.ns();
        na_ = spec_.na();
        ne_ = spec_.ne();
        ne0_ = spec_.ne0();
        np_ = static_cast<int>(spec_.uncertainty_set.size());

        double pol_count = 1.0;
        for (int s = 0; s < ns_; ++s) pol_count *= static_cast<double>(na_);
        mode_ = pol_count <= static_cast<double>(cfg_.enum_cap) ? Mode::enumeration
                                                                : Mode::coordinate_ascent;
        if (mode_ == Mode::enumeration) n_policies_ = static_cast<long>(pol_count);

        if (mode_ == Mode::coordinate_ascent) {
            SimplexGrid agrid(spec_.action_space, cfg_.action_k);
            for (int i = 0; i < agrid.size(); ++i) rows_.push_back(agrid.point_weights(i));
        }

        if (spec_.reward.marginal_only()) build_reward_tables();
        if (mode_ == Mode::enumeration && spec_.transition.lambda_free()) {
            const std::size_t bytes = static_cast<std::size_t>(grid_->size()) *
                                      static_cast<std::size_t>(n_policies_) * ne0_ * sizeof(std::int32_t);
            if (bytes <= cfg_.cache_budget_bytes) build_successor_cache();
        }
    }

    const GridPtr& grid() const { return grid_; }
    Mode mode() const { return mode_; }
    const char* mode_name() const {
        return mode_ == Mode::enumeration ? "enumeration" : "coordinate_ascent";
    }
    long candidate_count() const {
        return mode_ == Mode::enumeration ? n_policies_ : static_cast<long>(rows_.size());
    }

    struct ApplyResult {
        std::vector<double> values;
        std::vector<std::vector<std::uint16_t>> choices;  // per point: action or row per state
        std::vector<int> argmin_p;                        // adversary index at the maximizer
    };

    /// Pointwise sup-inf step: TV at every grid point, with maximizer and
    /// on-policy minimizer. Data-parallel; the result is independent of the
    /// thread count. In coordinate-ascent mode, `warm` seeds each point's first
    /// ascent with the previous maximizer, which keeps the applied candidate
    /// set stable across value iterations.
    ApplyResult apply(const std::vector<double>& V, const ApplyResult* warm = nullptr) const {
        check_table(V);
        const int ng = grid_->size();
        ApplyResult out;
        out.values.assign(static_cast<std::size_t>(ng), 0.0);
        out.choices.assign(static_cast<std::size_t>(ng), {});
        out.argmin_p.assign(static_cast<std::size_t>(ng), -1);
        detail::parallel_for(ng, cfg_.threads, [&](int g) {
            const std::vector<std::uint16_t>* warm_g =
                warm && !warm->choices.empty() ? &warm->choices[static_cast<std::size_t>(g)] : nullptr;
            local_max_at(g, V, warm_g, out.values[static_cast<std::size_t>(g)],
                         out.choices[static_cast<std::size_t>(g)], out.argmin_p[static_cast<std::size_t>(g)]);
        });
        return out;
    }

    /// Inf-only step for a fixed policy rule (robust policy evaluation).
    std::vector<double> apply_policy(const std::vector<double>& V,
                                     const std::function<StatePolicy(int, const Dist&)>& rule,
                                     std::vector<int>* argmin_out = nullptr) const {
        check_table(V);
        const int ng = grid_->size();
        std::vector<double> out(static_cast<std::size_t>(ng), 0.0);
        if (argmin_out) argmin_out->assign(static_cast<std::size_t>(ng), -1);
        detail::parallel_for(ng, cfg_.threads, [&](int g) {
            const StatePolicy pol = rule(g, grid_->point(g));
            if (pol.size() != ns_) throw DimensionError("apply_policy: bad policy row count");
            thread_local std::vector<const double*> rows;
            rows.resize(static_cast<std::size_t>(ns_));
            for (int s = 0; s < ns_; ++s) rows[static_cast<std::size_t>(s)] = pol.row(s).weights().data();
            int am = -1;
            out[static_cast<std::size_t>(g)] = eval_rows(g, rows.data(), V, &am);
            if (argmin_out) (*argmin_out)[static_cast<std::size_t>(g)] = am;
        });
        return out;
    }

    /// inf_p of the continuation integral for an arbitrary joint (online
    /// adversary); returns (min value, argmin index into the uncertainty set).
    std::pair<double, int> inner_min_joint(const JointDist& joint, const std::vector<double>& V) const {
        check_table(V);
        std::vector<int> sidx(static_cast<std::size_t>(ne0_));
        for (int e0 = 0; e0 < ne0_; ++e0)
            sidx[static_cast<std::size_t>(e0)] =
                grid_->project(lifted_transition(joint, e0, spec_).weights(), cfg_.norm);
        int am = -1;
        const double v = inner_value(sidx.data(), V.data(), &am);
        return {v, am};
    }

    /// r-bar at a grid point under a candidate (used by tests and diagnostics).
    double reward_at(int g, const StatePolicy& pol) const {
        std::vector<const double*> rows(static_cast<std::size_t>(ns_));
        for (int s = 0; s < ns_; ++s) rows[static_cast<std::size_t>(s)] = pol.row(s).weights().data();
        return rbar_rows(g, rows.data());
    }

    StatePolicy materialize([[maybe_unused]] int g, const std::vector<std::uint16_t>& choices) const {
        StatePolicy pol;
        pol.rows.reserve(static_cast<std::size_t>(ns_));
        for (int s = 0; s < ns_; ++s) {
            if (mode_ == Mode::enumeration) {
                pol.rows.push_back(Dist::dirac(spec_.action_space, choices[static_cast<std::size_t>(s)]));
            } else {
                pol.rows.emplace_back(spec_.action_space, rows_[choices[static_cast<std::size_t>(s)]]);
            }
        }
        return pol;
    }

private:
    void check_table(const std::vector<double>& V) const {
        if (static_cast<int>(V.size()) != grid_->size())
            throw DimensionError("value table size does not match grid");
    }

    void build_reward_tables() {
        const int ng = grid_->size();
        rtab_.assign(static_cast<std::size_t>(ng) * ns_ * na_, 0.0);
        detail::parallel_for(ng, cfg_.threads, [&](int g) {
            RewardContext ctx;
            const auto& gw = grid_->point_weights(g);
            ctx.s_marginal = &gw;
            double mean = 0.0;
            for (int s = 0; s < ns_; ++s) mean += gw[static_cast<std::size_t>(s)] * spec_.state_space->coord(s);
            ctx.mean_s = mean;
            double* row = &rtab_[static_cast<std::size_t>(g) * ns_ * na_];
            for (int s = 0; s < ns_; ++s)
                for (int a = 0; a < na_; ++a)
                    row[s * na_ + a] = spec_.reward.eval(s, a, na_, ctx);
        });
    }

    void build_successor_cache() {
        const int ng = grid_->size();
        succ_cache_.assign(static_cast<std::size_t>(ng) * static_cast<std::size_t>(n_policies_) * ne0_, -1);
        detail::parallel_for(ng, cfg_.threads, [&](int g) {
            std::vector<std::uint16_t> actions(static_cast<std::size_t>(ns_), 0);
            std::vector<double> succ(static_cast<std::size_t>(ns_));
            for (long pi = 0; pi < n_policies_; ++pi) {
                std::int32_t* slot =
                    &succ_cache_[(static_cast<std::size_t>(g) * static_cast<std::size_t>(n_policies_) +
                                  static_cast<std::size_t>(pi)) * ne0_];
                for (int e0 = 0; e0 < ne0_; ++e0) {
                    succ_pure(g, actions.data(), e0, succ);
                    slot[e0] = grid_->project(succ, cfg_.norm);
                }
                next_policy(actions);
            }
        });
    }

    // odometer over action choices, last state fastest: yields ascending
    // lexicographic order of the encoded policy
    void next_policy(std::vector<std::uint16_t>& actions) const {
        for (int s = ns_ - 1; s >= 0; --s) {
            if (++actions[static_cast<std::size_t>(s)] < na_) return;
            actions[static_cast<std::size_t>(s)] = 0;
        }
    }

    void succ_pure(int g, const std::uint16_t* actions, int e0, std::vector<double>& out) const {
        std::fill(out.begin(), out.end(), 0.0);
        const auto& gw = grid_->point_weights(g);
        const auto& lam = spec_.lambda_eps.weights();
        for (int s = 0; s < ns_; ++s) {
            const double w = gw[static_cast<std::size_t>(s)];
            if (w == 0.0) continue;
            for (int e = 0; e < ne_; ++e) {
                const double we = lam[static_cast<std::size_t>(e)];
                if (we == 0.0) continue;
                out[static_cast<std::size_t>(spec_.step(s, actions[s], nullptr, e, e0))] += w * we;
            }
        }
    }

    void succ_rows(int g, const double* const* rows, int e0, std::vector<double>& out,
                   const JointDist* joint) const {
        if (spec_.transition.lambda_free()) {
            std::fill(out.begin(), out.end(), 0.0);
            const auto& gw = grid_->point_weights(g);
            const auto& lam = spec_.lambda_eps.weights();
            for (int s = 0; s < ns_; ++s) {
                const double w = gw[static_cast<std::size_t>(s)];
                if (w == 0.0) continue;
                for (int a = 0; a < na_; ++a) {
                    const double wa = w * rows[s][a];
                    if (wa == 0.0) continue;
                    for (int e = 0; e < ne_; ++e) {
                        const double we = lam[static_cast<std::size_t>(e)];
                        if (we == 0.0) continue;
                        out[static_cast<std::size_t>(spec_.step(s, a, nullptr, e, e0))] += wa * we;
                    }
                }
            }
        } else {
            out = lifted_transition(*joint, e0, spec_).weights();
        }
    }

    JointDist joint_from_rows(int g, const double* const* rows) const {
        std::vector<double> w(static_cast<std::size_t>(ns_) * na_, 0.0);
        const auto& gw = grid_->point_weights(g);
        for (int s = 0; s < ns_; ++s)
            for (int a = 0; a < na_; ++a)
                w[static_cast<std::size_t>(s) * na_ + a] = gw[static_cast<std::size_t>(s)] * rows[s][a];
        return JointDist(spec_.state_space, spec_.action_space, std::move(w));
    }

    double rbar_pure(int g, const std::uint16_t* actions) const {
        const auto& gw = grid_->point_weights(g);
        if (!rtab_.empty()) {
            const double* row = &rtab_[static_cast<std::size_t>(g) * ns_ * na_];
            double acc = 0.0;
            for (int s = 0; s < ns_; ++s) acc += gw[static_cast<std::size_t>(s)] * row[s * na_ + actions[s]];
            return acc;
        }
        thread_local std::vector<const double*> rows;
        thread_local std::vector<std::vector<double>> dirac_rows;
        dirac_rows.assign(static_cast<std::size_t>(ns_), std::vector<double>(static_cast<std::size_t>(na_), 0.0));
        rows.resize(static_cast<std::size_t>(ns_));
        for (int s = 0; s < ns_; ++s) {
            dirac_rows[static_cast<std::size_t>(s)][actions[s]] = 1.0;
            rows[static_cast<std::size_t>(s)] = dirac_rows[static_cast<std::size_t>(s)].data();
        }
        return rbar_rows(g, rows.data());
    }

    double rbar_rows(int g, const double* const* rows) const {
        const auto& gw = grid_->point_weights(g);
        if (!rtab_.empty()) {
            const double* rt = &rtab_[static_cast<std::size_t>(g) * ns_ * na_];
            double acc = 0.0;
            for (int s = 0; s < ns_; ++s) {
                const double w = gw[static_cast<std::size_t>(s)];
                if (w == 0.0) continue;
                double inner = 0.0;
                for (int a = 0; a < na_; ++a) inner += rows[s][a] * rt[s * na_ + a];
                acc += w * inner;
            }
            return acc;
        }
        return lifted_reward(joint_from_rows(g, rows), spec_);
    }

    double inner_value(const int* sidx, const double* V, int* argmin) const {
        if (fixed_p_) {
            const auto& pw = fixed_p_->weights();
            double acc = 0.0;
            for (int e0 = 0; e0 < ne0_; ++e0) {
                const double w = pw[static_cast<std::size_t>(e0)];
                if (w == 0.0) continue;
                acc += w * V[sidx[e0]];
            }
            if (argmin) *argmin = -1;
            return acc;
        }
        double best = std::numeric_limits<double>::infinity();
        int bi = -1;
        for (int pi = 0; pi < np_; ++pi) {
            const auto& pw = spec_.uncertainty_set[static_cast<std::size_t>(pi)].weights();
            double acc = 0.0;
            for (int e0 = 0; e0 < ne0_; ++e0) {
                const double w = pw[static_cast<std::size_t>(e0)];
                if (w == 0.0) continue;
                acc += w * V[sidx[e0]];
            }
            if (acc < best) {
                best = acc;
                bi = pi;
            }
        }
        if (argmin) *argmin = bi;
        return best;
    }

    double eval_pure(int g, long pi, const std::uint16_t* actions, const std::vector<double>& V,
                     int* argmin) const {
        thread_local std::vector<int> sidx;
        thread_local std::vector<double> succ;
        sidx.resize(static_cast<std::size_t>(ne0_));
        if (!succ_cache_.empty()) {
            const std::int32_t* slot =
                &succ_cache_[(static_cast<std::size_t>(g) * static_cast<std::size_t>(n_policies_) +
                              static_cast<std::size_t>(pi)) * ne0_];
            for (int e0 = 0; e0 < ne0_; ++e0) sidx[static_cast<std::size_t>(e0)] = slot[e0];
        } else if (spec_.transition.lambda_free()) {
            succ.resize(static_cast<std::size_t>(ns_));
            for (int e0 = 0; e0 < ne0_; ++e0) {
                succ_pure(g, actions, e0, succ);
                sidx[static_cast<std::size_t>(e0)] = grid_->project(succ, cfg_.norm);
            }
        } else {
            thread_local std::vector<const double*> rows;
            thread_local std::vector<std::vector<double>> dirac_rows;
            dirac_rows.assign(static_cast<std::size_t>(ns_), std::vector<double>(static_cast<std::size_t>(na_), 0.0));
            rows.resize(static_cast<std::size_t>(ns_));
            for (int s = 0; s < ns_; ++s) {
                dirac_rows[static_cast<std::size_t>(s)][actions[s]] = 1.0;
                rows[static_cast<std::size_t>(s)] = dirac_rows[static_cast<std::size_t>(s)].data();
            }
            return eval_rows(g, rows.data(), V, argmin);
        }
        return rbar_pure(g, actions) + spec_.beta * inner_value(sidx.data(), V.data(), argmin);
    }

    double eval_rows(int g, const double* const* rows, const std::vector<double>& V,
                     int* argmin) const {
        thread_local std::vector<int> sidx;
        thread_local std::vector<double> succ;
        sidx.resize(static_cast<std::size_t>(ne0_));
        succ.resize(static_cast<std::size_t>(ns_));
        std::optional<JointDist> joint;
        if (!spec_.transition.lambda_free() || !spec_.reward.marginal_only())
            joint.emplace(joint_from_rows(g, rows));
        for (int e0 = 0; e0 < ne0_; ++e0) {
            succ_rows(g, rows, e0, succ, joint ? &*joint : nullptr);
            sidx[static_cast<std::size_t>(e0)] = grid_->project(succ, cfg_.norm);
        }
        const double rb = (!rtab_.empty() || !joint) ? rbar_rows(g, rows) : lifted_reward(*joint, spec_);
        return rb + spec_.beta * inner_value(sidx.data(), V.data(), argmin);
    }

    void local_max_at(int g, const std::vector<double>& V, const std::vector<std::uint16_t>* warm,
                      double& best_value, std::vector<std::uint16_t>& best_choices,
                      int& best_argmin) const {
        if (mode_ == Mode::enumeration) {
            std::vector<std::uint16_t> actions(static_cast<std::size_t>(ns_), 0);
            best_value = -std::numeric_limits<double>::infinity();
            for (long pi = 0; pi < n_policies_; ++pi) {
                int am = -1;
                const double v = eval_pure(g, pi, actions.data(), V, &am);
                if (v > best_value) {
                    best_value = v;
                    best_choices = actions;
                    best_argmin = am;
                }
                next_policy(actions);
            }
            return;
        }
        // coordinate ascent over per-state action rows
        const int nrows = static_cast<int>(rows_.size());
        CounterRng rng(cfg_.seed);
        std::vector<std::uint16_t> cur(static_cast<std::size_t>(ns_), 0);
        std::vector<const double*> rp(static_cast<std::size_t>(ns_));
        best_value = -std::numeric_limits<double>::infinity();
        best_choices.assign(static_cast<std::size_t>(ns_), 0);
        best_argmin = -1;
        for (int r = 0; r < std::max(1, cfg_.restarts); ++r) {
            for (int s = 0; s < ns_; ++s) {
                if (r == 0)
                    cur[static_cast<std::size_t>(s)] = warm ? (*warm)[static_cast<std::size_t>(s)] : 0;
                else
                    cur[static_cast<std::size_t>(s)] = static_cast<std::uint16_t>(
                        rng.bits({static_cast<std::uint64_t>(RngChannel::restart),
                                  static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(r),
                                  static_cast<std::uint64_t>(s)}) %
                        static_cast<std::uint64_t>(nrows));
                rp[static_cast<std::size_t>(s)] = rows_[cur[static_cast<std::size_t>(s)]].data();
            }
            int cur_am = -1;
            double cur_v = eval_rows(g, rp.data(), V, &cur_am);
            for (int sweep = 0; sweep < 200; ++sweep) {
                bool changed = false;
                for (int s = 0; s < ns_; ++s) {
                    const std::uint16_t keep = cur[static_cast<std::size_t>(s)];
                    std::uint16_t pick = keep;
                    for (int row = 0; row < nrows; ++row) {
                        if (row == keep) continue;
                        cur[static_cast<std::size_t>(s)] = static_cast<std::uint16_t>(row);
                        rp[static_cast<std::size_t>(s)] = rows_[static_cast<std::size_t>(row)].data();
                        int am = -1;
                        const double v = eval_rows(g, rp.data(), V, &am);
                        if (v > cur_v || (v == cur_v && row < pick)) {
                            cur_v = v;
                            cur_am = am;
                            pick = static_cast<std::uint16_t>(row);
                            changed = true;
                        }
                    }
                    cur[static_cast<std::size_t>(s)] = pick;
                    rp[static_cast<std::size_t>(s)] = rows_[static_cast<std::size_t>(pick)].data();
                }
                if (!changed) break;
            }
            if (cur_v > best_value ||
                (cur_v == best_value && std::lexicographical_compare(cur.begin(), cur.end(),
                                                                     best_choices.begin(),
                                                                     best_choices.end()))) {
                best_value = cur_v;
                best_choices = cur;
                best_argmin = cur_am;
            }
        }
    }

    ModelSpec spec_;
    GridPtr grid_;
    SearchConfig cfg_;
    std::optional<Dist> fixed_p_;
    int ns_ = 0, na_ = 0, ne_ = 0, ne0_ = 0, np_ = 0;
    Mode mode_ = Mode::enumeration;
    long n_policies_ = 0;
    std::vector<std::vector<double>> rows_;  // ascent candidates on P(A)
    std::vector<double> rtab_;               // per grid point |S|x|A| rewards (marginal-only)
    std::vector<std::int32_t> succ_cache_;   // projected successor per (g, policy, e0)
};

struct SolveResult {
    ValueTable value;
    PolicyTable policy;
    AdversarySelector adversary;
    SolveReport report;
    AssumptionReport audit;
};

namespace detail {

inline double linf_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline PolicyTable materialize_policy(const BellmanOperator& op,
                                      const BellmanOperator::ApplyResult& res) {
    PolicyTable tab;
    tab.grid = op.grid();
    tab.entries.reserve(res.choices.size());
    for (int g = 0; g < op.grid()->size(); ++g) {
        StatePolicy pol = op.materialize(g, res.choices[static_cast<std::size_t>(g)]);
        JointDist joint = kernel_to_joint(op.grid()->point(g), pol);
        tab.entries.push_back({disintegrate(joint), std::move(joint)});
    }
    return tab;
}

inline SolveResult iterate_to_fixed_point(const BellmanOperator& op, const ModelSpec& spec,
                                          double tol, int max_iter,
                                          const AssumptionReport& audit) {
    const auto t0 = std::chrono::steady_clock::now();
    SolveReport rep;
    rep.grid_size = op.grid()->size();
    rep.search_mode = op.mode_name();
    std::vector<double> V(static_cast<std::size_t>(op.grid()->size()), 0.0);
    BellmanOperator::ApplyResult last;
    for (int it = 1; it <= max_iter; ++it) {
        BellmanOperator::ApplyResult res = op.apply(V, it > 1 ? &last : nullptr);
        const double resid = linf_diff(res.values, V);
        rep.residual_history.push_back(resid);
        V = res.values;
        last = std::move(res);
        rep.iterations = it;
        rep.final_residual = resid;
        if (resid <= tol) break;
    }
    if (rep.final_residual > tol)
        throw ConvergenceError("value iteration did not reach tol=" + fmt_double(tol) + " in " +
                                   std::to_string(max_iter) + " iterations",
                               rep.residual_history);
    for (std::size_t i = rep.residual_history.size() >= 11 ? rep.residual_history.size() - 11 : 0;
         i + 1 < rep.residual_history.size(); ++i)
        if (rep.residual_history[i] > 0.0)
            rep.contraction_ratio_samples.push_back(rep.residual_history[i + 1] /
                                                    rep.residual_history[i]);
    rep.aposteriori_bound = rep.final_residual * spec.beta / (1.0 - spec.beta);
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    SolveResult out{ValueTable{op.grid(), std::move(V), audit.lipschitz_value_bound()},
                    materialize_policy(op, last),
                    AdversarySelector{std::move(last.argmin_p)},
                    std::move(rep),
                    audit};
    return out;
}

}  // namespace detail

/// inf_p sum_e0 p(e0) V(project(F-bar(joint, e0))) plus argmin; the operator's
/// inner minimization exposed for a standalone joint.
inline std::pair<double, int> inner_min(const JointDist& joint, const ValueTable& value,
                                        const ModelSpec& spec,
                                        ProjectionNorm norm = ProjectionNorm::W1) {
    spec.require_validated();
    std::vector<int> sidx(static_cast<std::size_t>(spec.ne0()));
    for (int e0 = 0; e0 < spec.ne0(); ++e0)
        sidx[static_cast<std::size_t>(e0)] =
            value.grid->project(lifted_transition(joint, e0, spec).weights(), norm);
    double best = std::numeric_limits<double>::infinity();
    int bi = -1;
    for (int pi = 0; pi < static_cast<int>(spec.uncertainty_set.size()); ++pi) {
        const auto& pw = spec.uncertainty_set[static_cast<std::size_t>(pi)].weights();
        double acc = 0.0;
        for (int e0 = 0; e0 < spec.ne0(); ++e0) {
            if (pw[static_cast<std::size_t>(e0)] == 0.0) continue;
            acc += pw[static_cast<std::size_t>(e0)] * value.at(sidx[static_cast<std::size_t>(e0)]);
        }
        if (acc < best) {
            best = acc;
            bi = pi;
        }
    }
    return {best, bi};
}

struct LocalMaxResult {
    double value;
    JointDist joint;
    int argmin_p;
};

/// One-point sup-inf: TV(mu) with the maximizing joint and on-policy argmin.
inline LocalMaxResult local_max(int grid_index, const ValueTable& value, const ModelSpec& spec,
                                const SearchConfig& search) {
    BellmanOperator op(spec, value.grid, search);
    auto res = op.apply(value.values);  // full apply keeps tie-breaks identical to the solver
    StatePolicy pol = op.materialize(grid_index, res.choices[static_cast<std::size_t>(grid_index)]);
    return {res.values[static_cast<std::size_t>(grid_index)],
            kernel_to_joint(value.grid->point(grid_index), pol),
            res.argmin_p[static_cast<std::size_t>(grid_index)]};
}

/// Full sup-inf sweep: returns (TV, maximizer table, on-policy adversary table).
inline std::tuple<ValueTable, PolicyTable, AdversarySelector> bellman_apply(
    const ValueTable& value, const ModelSpec& spec, const SearchConfig& search) {
    BellmanOperator op(spec, value.grid, search);
    auto res = op.apply(value.values);
    return {ValueTable{value.grid, std::move(res.values), value.lipschitz_bound},
            detail::materialize_policy(op, res), AdversarySelector{std::move(res.argmin_p)}};
}

/// Value iteration from V0 = 0 to the Bellman-Isaacs fixed point.
/// Requires the audited discount condition 2 beta C_F < 1 unless allow_assumption_warn.
inline SolveResult solve_fixed_point(const ModelSpec& spec, int grid_k, const SearchConfig& search,
                                     double tol = 1e-6, int max_iter = 10000,
                                     bool allow_assumption_warn = false,
                                     const AssumptionReport* audit = nullptr,
                                     int audit_lambda_grid_k = 2) {
    spec.require_validated();
    AssumptionReport rep = audit ? *audit : audit_assumptions(spec, audit_lambda_grid_k);
    if (!rep.beta_ok && !allow_assumption_warn)
        throw ValidationError(
            "audit: 2*beta*C_F >= 1 (c_f_hat=" + fmt_double(rep.c_f_hat) +
            ", beta=" + fmt_double(spec.beta) + "); pass allow_assumption_warn to proceed");
    GridPtr grid = build_simplex_grid(spec.state_space, grid_k);
    BellmanOperator op(spec, grid, search);
    return detail::iterate_to_fixed_point(op, spec, tol, max_iter, rep);
}

/// Classical (single fixed noise law) value iteration; an independent reduction
/// used to cross-check the robust solver when the uncertainty set is a singleton.
inline SolveResult solve_classical(const ModelSpec& spec, const Dist& p, int grid_k,
                                   const SearchConfig& search, double tol = 1e-6,
                                   int max_iter = 10000, bool allow_assumption_warn = false,
                                   const AssumptionReport* audit = nullptr) {
    spec.require_validated();
    AssumptionReport rep = audit ? *audit : audit_assumptions(spec, 2);
    if (!rep.beta_ok && !allow_assumption_warn)
        throw ValidationError("audit: 2*beta*C_F >= 1; pass allow_assumption_warn to proceed");
    GridPtr grid = build_simplex_grid(spec.state_space, grid_k);
    BellmanOperator op(spec, grid, search, p);
    return detail::iterate_to_fixed_point(op, spec, tol, max_iter, rep);
}

/// Robust evaluation of a fixed policy rule: iterates the inf-only operator to
/// its fixed point. The rule maps (grid index, grid point) to a StatePolicy.
inline std::pair<ValueTable, SolveReport> robust_policy_eval(
    const std::function<StatePolicy(int, const Dist&)>& rule, const ModelSpec& spec, int grid_k,
    const SearchConfig& search, double tol = 1e-6, int max_iter = 10000,
    std::optional<Dist> fixed_p = std::nullopt) {
    spec.require_validated();
    GridPtr grid = build_simplex_grid(spec.state_space, grid_k);
    BellmanOperator op(spec, grid, search, std::move(fixed_p));
    SolveReport rep;
    rep.grid_size = grid->size();
    rep.search_mode = "policy_eval";
    std::vector<double> V(static_cast<std::size_t>(grid->size()), 0.0);
    for (int it = 1; it <= max_iter; ++it) {
        std::vector<double> next = op.apply_policy(V, rule);
        const double resid = detail::linf_diff(next, V);
        rep.residual_history.push_back(resid);
        V = std::move(next);
        rep.iterations = it;
        rep.final_residual = resid;
        if (resid <= tol) break;
    }
    if (rep.final_residual > tol)
        throw ConvergenceError("policy evaluation did not converge", rep.residual_history);
    rep.aposteriori_bound = rep.final_residual * spec.beta / (1.0 - spec.beta);
    return {ValueTable{grid, std::move(V)}, std::move(rep)};
}

/// Adapter: evaluate a solved PolicyTable on its own grid.
inline std::function<StatePolicy(int, const Dist&)> policy_rule_from_table(const PolicyTable& tab) {
    return [&tab](int g, const Dist&) { return tab.at(g).policy; };
}

}  // namespace rmfc
