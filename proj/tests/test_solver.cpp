#include <catch2/catch_amalgamated.hpp>

#include "rmfc/experiments.hpp"
#include "rmfc/solver.hpp"

using namespace rmfc;

namespace {

ModelSpec example1_with_set(double delta, int count, std::uint64_t seed) {
    Example1Config cfg;
    ModelSpec spec = build_example1(cfg);
    const Dist v_ref(spec.common_space, cfg.v_ref);
    return spec.with_uncertainty(make_perturbed_uncertainty_set(v_ref, delta, count, seed));
}

std::vector<double> random_values(int n, double lo, double hi, std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = rng.uniform(lo, hi, {static_cast<std::uint64_t>(i)});
    return v;
}

}  // namespace

TEST_CASE("inner_min basics") {
    const ModelSpec spec = example1_with_set(0.0, 1, 1);  // singleton
    GridPtr grid = build_simplex_grid(spec.state_space, 4);
    ValueTable vt{grid, random_values(grid->size(), -1.0, 1.0, 5), 0.0};
    StatePolicy stay;
    for (int s = 0; s < spec.ns(); ++s) stay.rows.push_back(Dist::dirac(spec.action_space, 1));
    const JointDist joint = kernel_to_joint(grid->point(10), stay);

    SECTION("singleton set returns its element at index 0") {
        const auto [v, idx] = inner_min(joint, vt, spec);
        CHECK(idx == 0);
        double expect = 0.0;
        const Dist& p = spec.uncertainty_set[0];
        for (int e0 = 0; e0 < spec.ne0(); ++e0) {
            if (p[e0] == 0.0) continue;
            expect += p[e0] * vt.at(grid->project(lifted_transition(joint, e0, spec).weights()));
        }
        CHECK(v == expect);
    }

    SECTION("constant tables see through the minimization") {
        const ModelSpec wide = example1_with_set(0.3, 6, 2);
        ValueTable ct{grid, std::vector<double>(static_cast<std::size_t>(grid->size()), 2.5), 0.0};
        const auto [v, idx] = inner_min(joint, ct, wide);
        CHECK(v == Catch::Approx(2.5).margin(1e-12));
        CHECK(idx == 0);  // exact tie resolved to the lowest set index
    }

    SECTION("two Dirac noise laws: min of the two branch values") {
        ModelSpec two = build_example1(Example1Config{});
        two = two.with_uncertainty({Dist::dirac(two.common_space, 0), Dist::dirac(two.common_space, 2)});
        const auto [v, idx] = inner_min(joint, vt, two);
        const double v0 = vt.at(grid->project(lifted_transition(joint, 0, two).weights()));
        const double v2 = vt.at(grid->project(lifted_transition(joint, 2, two).weights()));
        CHECK(v == std::min(v0, v2));
        CHECK(idx == (v0 <= v2 ? 0 : 1));
    }
}

TEST_CASE("local_max with a zero table reproduces the pure reward") {
    Example1Config cfg;
    const ModelSpec spec = example1_with_set(0.2, 4, 3);
    GridPtr grid = build_simplex_grid(spec.state_space, 4);
    ValueTable zero{grid, std::vector<double>(static_cast<std::size_t>(grid->size()), 0.0), 0.0};
    SearchConfig search;
    BellmanOperator op(spec, grid, search);
    const auto res = op.apply(zero.values);
    for (int g = 0; g < grid->size(); ++g) {
        double d2 = 0.0;
        for (int s = 0; s < spec.ns(); ++s) {
            const double d = grid->point_weights(g)[static_cast<std::size_t>(s)] -
                             cfg.target_mu[static_cast<std::size_t>(s)];
            d2 += d * d;
        }
        CHECK(res.values[static_cast<std::size_t>(g)] == Catch::Approx(-d2).margin(1e-12));
    }
}

TEST_CASE("beta=0 makes the operator ignore the uncertainty set") {
    Example1Config cfg;
    cfg.beta = 0.0;
    ModelSpec spec = build_example1(cfg);
    const Dist v_ref(spec.common_space, cfg.v_ref);
    const ModelSpec narrow = spec.with_uncertainty({v_ref});
    const ModelSpec wide =
        spec.with_uncertainty(make_perturbed_uncertainty_set(v_ref, 0.5, 8, 11));
    GridPtr grid = build_simplex_grid(spec.state_space, 4);
    SearchConfig search;
    const ValueTable vt{grid, random_values(grid->size(), -2.0, 2.0, 17), 0.0};
    const auto a = BellmanOperator(narrow, grid, search).apply(vt.values);
    const auto b = BellmanOperator(wide, grid, search).apply(vt.values);
    CHECK(a.values == b.values);
}

TEST_CASE("one-state model: ascent equals brute force over the action simplex") {
    // S = {0}; reward depends on the joint's action marginal, so mixed rows win
    ModelSpec spec;
    spec.state_space = FiniteSpace::line({"0"}, {0.0});
    spec.action_space = FiniteSpace::from_values({-1, 0, 1});
    spec.idio_space = FiniteSpace::line({"0"}, {0.0});
    spec.common_space = FiniteSpace::from_values({-1, 1});
    spec.beta = 0.5;
    spec.lambda_eps = Dist::dirac(spec.idio_space, 0);
    spec.initial_mu = Dist::dirac(spec.state_space, 0);
    spec.transition = TransitionRule::from_table(std::vector<int>(6, 0));
    const std::vector<double> zeta = {0.45, 0.3, 0.25};
    auto fn = [zeta](int, int, const RewardContext& ctx) {
        const Dist am = ctx.joint->a_marginal();
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            const double d = am[a] - zeta[static_cast<std::size_t>(a)];
            d2 += d * d;
        }
        return -d2;
    };
    spec.reward = RewardRule::named("action_match_test", {}, fn, /*marginal_only=*/false);
    spec.uncertainty_set = {Dist(spec.common_space, {0.5, 0.5}),
                            Dist::dirac(spec.common_space, 0)};
    spec = validate_model(std::move(spec));

    SearchConfig search;
    search.enum_cap = 0;  // force coordinate ascent
    search.action_k = 6;
    search.restarts = 4;
    GridPtr grid = build_simplex_grid(spec.state_space, 1);  // P(S) is a point
    const ValueTable vt{grid, {0.7}, 0.0};
    BellmanOperator op(spec, grid, search, std::nullopt);
    const auto res = op.apply(vt.values);

    // brute force over the same candidate rows via public operations
    SimplexGrid agrid(spec.action_space, search.action_k);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < agrid.size(); ++i) {
        StatePolicy row;
        row.rows.emplace_back(spec.action_space, agrid.point_weights(i));
        const JointDist joint = kernel_to_joint(grid->point(0), row);
        const auto [iv, ip] = inner_min(joint, vt, spec);
        best = std::max(best, lifted_reward(joint, spec) + spec.beta * iv);
    }
    CHECK(res.values[0] == Catch::Approx(best).margin(1e-12));
}

TEST_CASE("bellman operator is monotone and a beta-contraction") {
    const ModelSpec spec = example1_with_set(0.25, 5, 7);
    GridPtr grid = build_simplex_grid(spec.state_space, 4);
    SearchConfig search;
    BellmanOperator op(spec, grid, search);
    const double bound = 2.0 / (1.0 - spec.beta);

    for (std::uint64_t trial = 0; trial < 12; ++trial) {
        std::vector<double> v1 = random_values(grid->size(), -bound, bound, 100 + trial);
        std::vector<double> v2 = random_values(grid->size(), -bound, bound, 200 + trial);
        const auto t1 = op.apply(v1);
        const auto t2 = op.apply(v2);

        double dv = 0.0, dt = 0.0;
        for (int g = 0; g < grid->size(); ++g) {
            dv = std::max(dv, std::abs(v1[static_cast<std::size_t>(g)] - v2[static_cast<std::size_t>(g)]));
            dt = std::max(dt, std::abs(t1.values[static_cast<std::size_t>(g)] -
                                       t2.values[static_cast<std::size_t>(g)]));
        }
        CHECK(dt <= spec.beta * dv + 1e-9);

        // monotone: apply to the pointwise max and compare exactly
        std::vector<double> hi(v1.size());
        for (std::size_t i = 0; i < hi.size(); ++i) hi[i] = std::max(v1[i], v2[i]);
        const auto th = op.apply(hi);
        for (int g = 0; g < grid->size(); ++g) {
            CHECK(t1.values[static_cast<std::size_t>(g)] <= th.values[static_cast<std::size_t>(g)]);
            CHECK(t2.values[static_cast<std::size_t>(g)] <= th.values[static_cast<std::size_t>(g)]);
        }
    }
}

TEST_CASE("constant shift moves the image by beta*c and keeps the argmax") {
    const ModelSpec spec = example1_with_set(0.3, 5, 9);
    GridPtr grid = build_simplex_grid(spec.state_space, 4);
    SearchConfig search;
    BellmanOperator op(spec, grid, search);
    const std::vector<double> v = random_values(grid->size(), -3.0, 3.0, 31);
    for (double c : {0.7, -1.3}) {
        std::vector<double> shifted(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) shifted[i] = v[i] + c;
        const auto base = op.apply(v);
        const auto moved = op.apply(shifted);
        for (int g = 0; g < grid->size(); ++g) {
            CHECK(moved.values[static_cast<std::size_t>(g)] ==
                  Catch::Approx(base.values[static_cast<std::size_t>(g)] + spec.beta * c).margin(1e-11));
            CHECK(moved.choices[static_cast<std::size_t>(g)] == base.choices[static_cast<std::size_t>(g)]);
        }
    }
}

TEST_CASE("solve: constant reward gives the geometric series") {
    ModelSpec spec = example1_with_set(0.2, 3, 13);
    spec.reward = rules::make_constant(1.5);
    spec.validated = false;
    spec = validate_model(std::move(spec));
    SearchConfig search;
    const SolveResult sol = solve_fixed_point(spec, 3, search, 1e-8, 1000);
    for (int g = 0; g < sol.value.grid->size(); ++g)
        CHECK(sol.value.at(g) == Catch::Approx(1.5 / (1 - spec.beta)).margin(1e-7));
}

TEST_CASE("solve: beta=0 converges in exactly two iterations") {
    Example1Config cfg;
    cfg.beta = 0.0;
    ModelSpec spec = build_example1(cfg);
    const SolveResult sol = solve_fixed_point(spec, 3, SearchConfig{}, 1e-10, 100);
    CHECK(sol.report.iterations == 2);
    CHECK(sol.report.final_residual == 0.0);
}

TEST_CASE("solve: iteration count respects the contraction bound") {
    const ModelSpec spec = example1_with_set(0.3, 5, 17);
    const double tol = 1e-6;
    const SolveResult sol = solve_fixed_point(spec, 4, SearchConfig{}, tol, 10000);
    const double r1 = sol.report.residual_history.front();
    const int bound =
        static_cast<int>(std::ceil(std::log(tol * (1 - spec.beta) / r1) / std::log(spec.beta))) + 1;
    CHECK(sol.report.iterations <= bound);
    // residuals nonincreasing once they are small
    const auto& h = sol.report.residual_history;
    for (std::size_t i = 0; i + 1 < h.size(); ++i)
        if (h[i] <= 10 * tol * 10) CHECK(h[i + 1] <= h[i] + 1e-9);
    // value bound from the audit
    const double vmax = sol.audit.c_r_bound / (1 - spec.beta) + 1e-6;
    for (int g = 0; g < sol.value.grid->size(); ++g) CHECK(std::abs(sol.value.at(g)) <= vmax);
    // stored joints keep their grid marginal bit-exactly
    for (int g = 0; g < sol.value.grid->size(); ++g)
        CHECK(sol.policy.at(g).joint.s_marginal_weights() == sol.value.grid->point_weights(g));
}

TEST_CASE("solve: non-convergence raises with the residual history") {
    const ModelSpec spec = example1_with_set(0.2, 3, 19);
    try {
        solve_fixed_point(spec, 3, SearchConfig{}, 1e-12, 2);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.residual_history.size() == 2);
    }
}

TEST_CASE("audit gate: failing beta check requires the warn flag") {
    const ModelSpec spec = build_example2(Example2Config{});
    CHECK_THROWS_AS(solve_fixed_point(spec, 3, SearchConfig{}, 1e-5, 500, false), ValidationError);
    CHECK_NOTHROW(solve_fixed_point(spec, 3, SearchConfig{}, 1e-5, 500, true));
}

TEST_CASE("robust policy evaluation") {
    const ModelSpec spec = example1_with_set(0.3, 5, 23);
    SearchConfig search;
    const double tol = 1e-7;
    const SolveResult sol = solve_fixed_point(spec, 4, search, tol, 10000);

    SECTION("the solved policy evaluates back to the fixed point") {
        const auto [vt, rep] = robust_policy_eval(policy_rule_from_table(sol.policy), spec, 4,
                                                  search, tol, 10000);
        for (int g = 0; g < vt.grid->size(); ++g)
            CHECK(std::abs(vt.at(g) - sol.value.at(g)) <= 2 * tol);
    }

    SECTION("any fixed policy is dominated by the fixed point") {
        StatePolicy stay;
        for (int s = 0; s < spec.ns(); ++s) stay.rows.push_back(Dist::dirac(spec.action_space, 1));
        const auto [vt, rep] = robust_policy_eval(
            [&](int, const Dist&) { return stay; }, spec, 4, search, tol, 10000);
        for (int g = 0; g < vt.grid->size(); ++g) CHECK(vt.at(g) <= sol.value.at(g) + 2 * tol);
    }

    SECTION("singleton set reduces to classical policy evaluation") {
        Example1Config cfg;
        ModelSpec base = build_example1(cfg);
        const Dist v_ref(base.common_space, cfg.v_ref);
        const ModelSpec singleton = base.with_uncertainty({v_ref});
        StatePolicy stay;
        for (int s = 0; s < base.ns(); ++s) stay.rows.push_back(Dist::dirac(base.action_space, 1));
        auto rule = [&](int, const Dist&) { return stay; };
        const auto [robust_vt, r1] = robust_policy_eval(rule, singleton, 4, search, 1e-8, 10000);
        const auto [classical_vt, r2] =
            robust_policy_eval(rule, singleton, 4, search, 1e-8, 10000, v_ref);
        for (int g = 0; g < robust_vt.grid->size(); ++g)
            CHECK(std::abs(robust_vt.at(g) - classical_vt.at(g)) <= 1e-9);
    }
}

TEST_CASE("singleton reduction: robust equals classical bitwise-close") {
    Example1Config cfg;
    ModelSpec spec = build_example1(cfg);
    const Dist v_ref(spec.common_space, cfg.v_ref);
    const ModelSpec robust_spec = spec.with_uncertainty({v_ref});
    SearchConfig search;
    const SolveResult robust = solve_fixed_point(robust_spec, 4, search, 1e-8, 10000);
    const SolveResult classical = solve_classical(spec, v_ref, 4, search, 1e-8, 10000);
    for (int g = 0; g < robust.value.grid->size(); ++g)
        CHECK(std::abs(robust.value.at(g) - classical.value.at(g)) <= 1e-9);
}

TEST_CASE("sup-inf is dominated by every fixed-noise classical value") {
    const ModelSpec spec = example1_with_set(0.3, 4, 29);
    SearchConfig search;
    const double tol = 1e-7;
    const SolveResult robust = solve_fixed_point(spec, 3, search, tol, 10000);
    for (const Dist& p : spec.uncertainty_set) {
        const SolveResult classical = solve_classical(spec, p, 3, search, tol, 10000);
        for (int g = 0; g < robust.value.grid->size(); ++g)
            CHECK(robust.value.at(g) <= classical.value.at(g) + 2 * tol);
    }
}

TEST_CASE("enlarging the uncertainty set cannot raise the value") {
    Example1Config cfg;
    ModelSpec base = build_example1(cfg);
    const Dist v_ref(base.common_space, cfg.v_ref);
    const auto small_set = make_perturbed_uncertainty_set(v_ref, 0.2, 3, 31);
    auto big_set = small_set;
    for (const Dist& d : make_perturbed_uncertainty_set(v_ref, 0.35, 3, 32))
        big_set.push_back(d);
    const double tol = 1e-7;
    const SolveResult small_sol =
        solve_fixed_point(base.with_uncertainty(small_set), 3, SearchConfig{}, tol, 10000);
    const SolveResult big_sol =
        solve_fixed_point(base.with_uncertainty(big_set), 3, SearchConfig{}, tol, 10000);
    for (int g = 0; g < small_sol.value.grid->size(); ++g)
        CHECK(big_sol.value.at(g) <= small_sol.value.at(g) + 2 * tol);
}

TEST_CASE("lipschitz certificate on a small grid") {
    const ModelSpec spec = example1_with_set(0.25, 4, 37);
    SearchConfig search;
    const double tol = 1e-7;
    const SolveResult sol = solve_fixed_point(spec, 3, search, tol, 10000);
    REQUIRE(std::isfinite(sol.value.lipschitz_bound));
    const auto& grid = *sol.value.grid;
    for (int i = 0; i < grid.size(); ++i)
        for (int j = i + 1; j < grid.size(); ++j)
            CHECK(std::abs(sol.value.at(i) - sol.value.at(j)) <=
                  sol.value.lipschitz_bound * w1_finite(grid.point(i), grid.point(j)) + 2 * tol);
}

TEST_CASE("solver determinism across thread counts") {
    const ModelSpec spec = example1_with_set(0.3, 5, 41);
    SearchConfig s1, s4;
    s1.threads = 1;
    s4.threads = 4;
    const SolveResult a = solve_fixed_point(spec, 4, s1, 1e-7, 10000);
    const SolveResult b = solve_fixed_point(spec, 4, s4, 1e-7, 10000);
    CHECK(a.value.values == b.value.values);
    CHECK(a.adversary.table == b.adversary.table);
    CHECK(a.report.iterations == b.report.iterations);
}
