#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rmfc/joint.hpp"
#include "rmfc/simplex_grid.hpp"

namespace rmfc {

/// Parameters of registered named rules: scalars are single-element vectors.
using RuleParams = std::map<std::string, std::vector<double>>;

inline double rule_scalar(const RuleParams& p, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end() || it->second.size() != 1)
        throw ValidationError("rule parameter '" + key + "' missing or not scalar");
    return it->second[0];
}

inline void require_param_keys(const RuleParams& p, std::initializer_list<const char*> allowed,
                               const std::string& rule) {
    for (const auto& [k, v] : p) {
        bool ok = false;
        for (const char* a : allowed)
            if (k == a) ok = true;
        if (!ok) throw ValidationError(rule + ": unknown parameter '" + k + "'");
    }
}

inline double rule_scalar_or(const RuleParams& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    if (it == p.end()) return fallback;
    if (it->second.size() != 1) throw ValidationError("rule parameter '" + key + "' not scalar");
    return it->second[0];
}

/// Quantities cached once per joint law and handed to reward evaluators.
struct RewardContext {
    const JointDist* joint = nullptr;            // null on the marginal-only fast path
    const std::vector<double>* s_marginal = nullptr;
    double mean_s = 0.0;                         // first coordinate moment of the S-marginal
};

class RewardRule {
public:
    using Evaluator = std::function<double(int s, int a, const RewardContext&)>;

    static RewardRule tabular(std::vector<double> table) {
        RewardRule r;
        r.name_ = "tabular";
        r.table_ = std::move(table);
        r.marginal_only_ = true;
        return r;
    }

    static RewardRule named(std::string name, RuleParams params, Evaluator fn, bool marginal_only) {
        RewardRule r;
        r.name_ = std::move(name);
        r.params_ = std::move(params);
        r.fn_ = std::move(fn);
        r.marginal_only_ = marginal_only;
        return r;
    }

    const std::string& name() const { return name_; }
    const RuleParams& params() const { return params_; }
    bool is_tabular() const { return !table_.empty(); }
    const std::vector<double>& table() const { return table_; }

    /// True when r(s,a,Lambda) depends on Lambda only through pj_S(Lambda).
    bool marginal_only() const { return marginal_only_; }

    double eval(int s, int a, int na, const RewardContext& ctx) const {
        if (is_tabular()) return table_[static_cast<std::size_t>(s) * na + a];
        return fn_(s, a, ctx);
    }

    bool empty() const { return table_.empty() && !fn_; }

    /// Declared or audited bound C_r; 0 until set.
    double bound() const { return bound_; }
    void set_bound(double b) { bound_ = b; }

private:
    std::string name_;
    RuleParams params_;
    std::vector<double> table_;  // |S| x |A| when tabular
    Evaluator fn_;
    bool marginal_only_ = false;
    double bound_ = 0.0;
};

class TransitionRule {
public:
    using Evaluator = std::function<int(int s, int a, const JointDist* joint, int e, int e0)>;

    static TransitionRule from_table(std::vector<int> table) {
        TransitionRule t;
        t.name_ = "table";
        t.table_ = std::move(table);
        t.lambda_free_ = true;
        return t;
    }

    static TransitionRule named(std::string name, RuleParams params, Evaluator fn, bool lambda_free) {
        TransitionRule t;
        t.name_ = std::move(name);
        t.params_ = std::move(params);
        t.fn_ = std::move(fn);
        t.lambda_free_ = lambda_free;
        return t;
    }

    bool is_table() const { return !table_.empty(); }
    bool empty() const { return table_.empty() && !fn_; }
    const std::string& name() const { return name_; }
    const RuleParams& params() const { return params_; }
    const std::vector<int>& table() const { return table_; }
    bool lambda_free() const { return lambda_free_; }

    int eval(int s, int a, const JointDist* joint, int e, int e0, int na, int ne, int ne0) const {
        if (is_table())
            return table_[((static_cast<std::size_t>(s) * na + a) * ne + e) * ne0 + e0];
        return fn_(s, a, joint, e, e0);
    }

private:
    std::string name_;
    RuleParams params_;
    std::vector<int> table_;  // (s,a,e,e0) -> s', row-major
    Evaluator fn_;
    bool lambda_free_ = false;
};

/// Full finite robust mean-field control model.
struct ModelSpec {
    SpacePtr state_space, action_space, idio_space, common_space;
    TransitionRule transition;
    RewardRule reward;
    double beta = 0.0;
    Dist lambda_eps;               // law of the idiosyncratic noise, over idio_space
    std::vector<Dist> uncertainty_set;  // candidate common-noise laws, over common_space
    Dist initial_mu;               // law of the initial state

    bool validated = false;

    int ns() const { return state_space->size(); }
    int na() const { return action_space->size(); }
    int ne() const { return idio_space->size(); }
    int ne0() const { return common_space->size(); }

    int step(int s, int a, const JointDist* joint, int e, int e0) const {
        return transition.eval(s, a, joint, e, e0, na(), ne(), ne0());
    }

    void require_validated() const {
        if (!validated) throw ValidationError("ModelSpec: validate_model() has not been run");
    }

    /// Copy with a different uncertainty set (validation state preserved; the
    /// replacement is re-checked).
    ModelSpec with_uncertainty(std::vector<Dist> set) const {
        ModelSpec out = *this;
        if (set.empty()) throw ValidationError("uncertainty set must be non-empty");
        for (const Dist& p : set)
            if (!p.space()->same_as(*common_space))
                throw DimensionError("uncertainty element not on the common-noise space");
        out.uncertainty_set = std::move(set);
        return out;
    }
};

namespace rules {

inline int nearest_coord_index(const FiniteSpace& sp, double value) {
    int best = 0;
    double bd = std::abs(sp.coord(0) - value);
    for (int i = 1; i < sp.size(); ++i) {
        const double d = std::abs(sp.coord(i) - value);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

/// s' = clamp(s + a + e + e0) on integer-coordinate line spaces; the workhorse
/// behind both benchmark models, exposed as a named rule for function-form configs.
inline TransitionRule::Evaluator make_shift_clamp(const ModelSpec& skel, const RuleParams& p) {
    const double lo = rule_scalar(p, "lo");
    const double hi = rule_scalar(p, "hi");
    const bool use_idio = rule_scalar_or(p, "use_idio", 1.0) != 0.0;
    const std::optional<double> absorbing =
        p.count("absorbing") ? std::optional<double>(rule_scalar(p, "absorbing")) : std::nullopt;
    SpacePtr S = skel.state_space, A = skel.action_space, E = skel.idio_space,
             E0 = skel.common_space;
    return [S, A, E, E0, lo, hi, use_idio, absorbing](int s, int a, const JointDist*, int e,
                                                      int e0) -> int {
        const double cs = S->coord(s);
        if (absorbing && cs == *absorbing) return s;
        double v = cs + A->coord(a) + (use_idio ? E->coord(e) : 0.0) + E0->coord(e0);
        v = std::max(lo, std::min(hi, v));
        return nearest_coord_index(*S, v);
    };
}

/// Lambda-dependent variant used to exercise the general solver path:
/// s' = clamp(s + a + e + e0 + round(m(Lambda) - m0)).
inline TransitionRule::Evaluator make_mean_shift_clamp(const ModelSpec& skel, const RuleParams& p) {
    const double lo = rule_scalar(p, "lo");
    const double hi = rule_scalar(p, "hi");
    const double m0 = rule_scalar_or(p, "m0", 0.0);
    SpacePtr S = skel.state_space, A = skel.action_space, E = skel.idio_space,
             E0 = skel.common_space;
    return [S, A, E, E0, lo, hi, m0](int s, int a, const JointDist* joint, int e, int e0) -> int {
        double mean = m0;
        if (joint) {
            mean = 0.0;
            for (int i = 0; i < S->size(); ++i)
                mean += joint->s_marginal_weights()[static_cast<std::size_t>(i)] * S->coord(i);
        }
        double v = S->coord(s) + A->coord(a) + E->coord(e) + E0->coord(e0) + std::round(mean - m0);
        v = std::max(lo, std::min(hi, v));
        return nearest_coord_index(*S, v);
    };
}

inline TransitionRule make_transition(const std::string& name, const ModelSpec& skel,
                                      RuleParams params) {
    if (name == "shift_clamp") {
        require_param_keys(params, {"lo", "hi", "use_idio", "absorbing"}, name);
        return TransitionRule::named(name, params, make_shift_clamp(skel, params), true);
    }
    if (name == "mean_shift_clamp") {
        require_param_keys(params, {"lo", "hi", "m0"}, name);
        return TransitionRule::named(name, params, make_mean_shift_clamp(skel, params), false);
    }
    throw ValidationError("unknown transition rule '" + name + "'");
}

/// sign * || pj_S(Lambda) - target ||_2^2, independent of (s,a).
inline RewardRule make_distribution_match(const ModelSpec& skel, std::vector<double> target,
                                          double sign) {
    if (static_cast<int>(target.size()) != skel.state_space->size())
        throw DimensionError("distribution_match: target size mismatch");
    RuleParams params;
    params["target"] = target;
    params["sign"] = {sign};
    auto fn = [target, sign](int, int, const RewardContext& ctx) -> double {
        double d2 = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) {
            const double d = (*ctx.s_marginal)[i] - target[i];
            d2 += d * d;
        }
        return sign * d2;
    };
    return RewardRule::named("distribution_match", std::move(params), std::move(fn), true);
}

/// -a^2 + q a (m-s)^2 - 0.5 eps (m-s)^2 + sign (m - s_target)^2 with m the
/// first moment of the state marginal.
inline RewardRule make_systemic_risk(const ModelSpec& skel, double q, double epsilon,
                                     double s_target, double sign) {
    RuleParams params;
    params["q"] = {q};
    params["epsilon"] = {epsilon};
    params["s_target"] = {s_target};
    params["sign"] = {sign};
    SpacePtr S = skel.state_space, A = skel.action_space;
    auto fn = [S, A, q, epsilon, s_target, sign](int s, int a, const RewardContext& ctx) -> double {
        const double ca = A->coord(a);
        const double gap = ctx.mean_s - S->coord(s);
        const double tgt = ctx.mean_s - s_target;
        return -ca * ca + q * ca * gap * gap - 0.5 * epsilon * gap * gap + sign * tgt * tgt;
    };
    return RewardRule::named("systemic_risk", std::move(params), std::move(fn), true);
}

inline RewardRule make_constant(double value) {
    RuleParams params;
    params["value"] = {value};
    auto fn = [value](int, int, const RewardContext&) -> double { return value; };
    return RewardRule::named("constant", std::move(params), std::move(fn), true);
}

inline RewardRule make_reward(const std::string& name, const ModelSpec& skel, const RuleParams& p) {
    if (name == "distribution_match") {
        require_param_keys(p, {"target", "sign"}, name);
        auto it = p.find("target");
        if (it == p.end()) throw ValidationError("distribution_match: missing 'target'");
        return make_distribution_match(skel, it->second, rule_scalar_or(p, "sign", -1.0));
    }
    if (name == "systemic_risk") {
        require_param_keys(p, {"q", "epsilon", "s_target", "sign"}, name);
        return make_systemic_risk(skel, rule_scalar(p, "q"), rule_scalar(p, "epsilon"),
                                  rule_scalar(p, "s_target"), rule_scalar_or(p, "sign", -1.0));
    }
    if (name == "constant") {
        require_param_keys(p, {"value"}, name);
        return make_constant(rule_scalar(p, "value"));
    }
    throw ValidationError("unknown reward rule '" + name + "'");
}

}  // namespace rules

/// Checks every declared invariant and verifies transition outputs land in S.
/// Table form is checked exhaustively; function form is sampled over Dirac and
/// resolution-2 joint laws plus the uniform joint.
inline ModelSpec validate_model(ModelSpec spec) {
    if (!spec.state_space || !spec.action_space || !spec.idio_space || !spec.common_space)
        throw ValidationError("ModelSpec: missing space");
    if (!spec.lambda_eps.space() || !spec.initial_mu.space())
        throw ValidationError("ModelSpec: missing lambda_eps or initial_mu");
    if (spec.transition.empty()) throw ValidationError("ModelSpec: missing transition rule");
    if (spec.reward.empty()) throw ValidationError("ModelSpec: missing reward rule");
    if (!(spec.beta >= 0.0 && spec.beta < 1.0))
        throw ValidationError("beta must lie in [0,1), got " + fmt_double(spec.beta));
    if (spec.uncertainty_set.empty()) throw ValidationError("uncertainty set must be non-empty");
    if (!spec.lambda_eps.space()->same_as(*spec.idio_space))
        throw DimensionError("lambda_eps not on the idiosyncratic space");
    if (!spec.initial_mu.space()->same_as(*spec.state_space))
        throw DimensionError("initial_mu not on the state space");
    for (const Dist& p : spec.uncertainty_set)
        if (!p.space()->same_as(*spec.common_space))
            throw DimensionError("uncertainty element not on the common-noise space");

    const int ns = spec.ns(), na = spec.na(), ne = spec.ne(), ne0 = spec.ne0();
    auto check_target = [&](int s, int a, int e, int e0, int target) {
        if (target < 0 || target >= ns)
            throw ValidationError("transition output out of range at (s=" +
                                  spec.state_space->labels()[static_cast<std::size_t>(s)] + ", a=" +
                                  spec.action_space->labels()[static_cast<std::size_t>(a)] + ", e=" +
                                  spec.idio_space->labels()[static_cast<std::size_t>(e)] + ", e0=" +
                                  spec.common_space->labels()[static_cast<std::size_t>(e0)] + ")");
    };

    if (spec.transition.is_table()) {
        if (spec.transition.table().size() !=
            static_cast<std::size_t>(ns) * na * ne * ne0)
            throw DimensionError("transition table does not cover the full domain");
        for (int s = 0; s < ns; ++s)
            for (int a = 0; a < na; ++a)
                for (int e = 0; e < ne; ++e)
                    for (int e0 = 0; e0 < ne0; ++e0)
                        check_target(s, a, e, e0, spec.step(s, a, nullptr, e, e0));
    } else {
        std::vector<JointDist> samples;
        auto sa_space = [&]() {
            std::vector<std::string> labels;
            std::vector<double> coords;
            std::vector<double> metric;
            const int n = ns * na;
            labels.reserve(static_cast<std::size_t>(n));
            for (int s = 0; s < ns; ++s)
                for (int a = 0; a < na; ++a) {
                    labels.push_back(spec.state_space->labels()[static_cast<std::size_t>(s)] + "|" +
                                     spec.action_space->labels()[static_cast<std::size_t>(a)]);
                    coords.push_back(0.0);
                }
            metric.assign(static_cast<std::size_t>(n) * n, 1.0);
            for (int i = 0; i < n; ++i) metric[static_cast<std::size_t>(i) * n + i] = 0.0;
            return std::make_shared<const FiniteSpace>(std::move(labels), std::move(coords),
                                                       std::move(metric));
        }();
        SimplexGrid jgrid(sa_space, 2);
        for (int i = 0; i < jgrid.size(); ++i)
            samples.emplace_back(spec.state_space, spec.action_space, jgrid.point_weights(i));
        std::vector<double> unif(static_cast<std::size_t>(ns) * na, 1.0 / (ns * na));
        samples.emplace_back(spec.state_space, spec.action_space, std::move(unif));
        for (const JointDist& joint : samples)
            for (int s = 0; s < ns; ++s)
                for (int a = 0; a < na; ++a)
                    for (int e = 0; e < ne; ++e)
                        for (int e0 = 0; e0 < ne0; ++e0)
                            check_target(s, a, e, e0, spec.step(s, a, &joint, e, e0));
    }

    spec.validated = true;
    return spec;
}

}  // namespace rmfc
