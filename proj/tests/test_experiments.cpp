#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "rmfc/experiments.hpp"

using namespace rmfc;

namespace {

int table_entry(const ModelSpec& spec, int s, int a, int e, int e0) {
    return spec.step(s, a, nullptr, e, e0);
}

JointDist joint_dirac_s(const ModelSpec& spec, int s, int a) {
    std::vector<double> w(static_cast<std::size_t>(spec.ns()) * spec.na(), 0.0);
    w[static_cast<std::size_t>(s) * spec.na() + a] = 1.0;
    return JointDist(spec.state_space, spec.action_space, std::move(w));
}

}  // namespace

TEST_CASE("example 1 transition table") {
    const ModelSpec spec = build_example1(Example1Config{});
    // state 7 with a=+1, e0=+1 stays at 7
    CHECK(table_entry(spec, 6, 2, 0, 2) == 6);
    // state 1 with a=-1, e0=-1 stays at 1
    CHECK(table_entry(spec, 0, 0, 0, 0) == 0);
    // zero displacement
    CHECK(table_entry(spec, 3, 1, 0, 1) == 3);
    // interior move
    CHECK(table_entry(spec, 3, 2, 0, 2) == 5);
}

TEST_CASE("example 1 reward vanishes at the target") {
    Example1Config cfg;
    const ModelSpec spec = build_example1(cfg);
    StatePolicy any;
    for (int s = 0; s < spec.ns(); ++s) any.rows.push_back(Dist::dirac(spec.action_space, s % 3));
    const JointDist at_target = kernel_to_joint(Dist(spec.state_space, cfg.target_mu), any);
    CHECK(lifted_reward(at_target, spec) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("example 2 transitions: absorbing floor and clamping") {
    const ModelSpec spec = build_example2(Example2Config{});
    REQUIRE(spec.ns() == 6);  // formulas win over the prose count: s in {-1..4}
    for (int a = 0; a < spec.na(); ++a)
        for (int e = 0; e < spec.ne(); ++e)
            for (int e0 = 0; e0 < spec.ne0(); ++e0)
                CHECK(table_entry(spec, 0, a, e, e0) == 0);  // F(s_min, ...) = s_min
    // interior: s=0 (index 1), a=+1, e=+1, e0=+2 -> clamp at s_max=4 (index 5)
    CHECK(table_entry(spec, 1, 2, 2, 4) == 5);
    // s=0, a=-1, e=0, e0=0 -> s=-1 (absorbing next time, but reachable)
    CHECK(table_entry(spec, 1, 0, 1, 2) == 0);
}

TEST_CASE("example 2 reward term structure") {
    Example2Config cfg;
    const ModelSpec spec = build_example2(cfg);
    // pj_S(Lambda) = Dirac(2) makes m = 2 = s_target: last term vanishes
    const int idx2 = spec.state_space->index_of("2");
    const JointDist at2 = joint_dirac_s(spec, idx2, 1);  // a = 0
    // r(2, 0, Lambda) = -0 + 0 - 0 + 0 = 0
    CHECK(lifted_reward(at2, spec) == Catch::Approx(0.0).margin(1e-12));

    // m(Lambda) = s cancels the mean-reverting terms: r(s,0,.) = sign (m - s_target)^2
    const int idx0 = spec.state_space->index_of("0");
    const JointDist at0 = joint_dirac_s(spec, idx0, 1);
    CHECK(lifted_reward(at0, spec) == Catch::Approx(-(0.0 - cfg.s_target) * (0.0 - cfg.s_target)));

    // borrowing cost shows up quadratically: a = +1 at m = s
    const JointDist borrow = joint_dirac_s(spec, idx2, 2);
    CHECK(lifted_reward(borrow, spec) == Catch::Approx(-1.0).margin(1e-12));

    // paper-literal sign flips only the target term
    cfg.reward_sign = RewardSign::paper_literal;
    const ModelSpec lit = build_example2(cfg);
    CHECK(lifted_reward(joint_dirac_s(lit, idx0, 1), lit) ==
          Catch::Approx(+(0.0 - cfg.s_target) * (0.0 - cfg.s_target)));
}

TEST_CASE("example 2 absorbing mass is nondecreasing along flows") {
    const ModelSpec spec = build_example2(Example2Config{});
    StatePolicy pi;
    for (int s = 0; s < spec.ns(); ++s) {
        std::vector<double> row = {0.4, 0.3, 0.3};
        pi.rows.emplace_back(spec.action_space, row);
    }
    CounterRng rng(5);
    const NoisePath path =
        sample_fixed_path(Dist(spec.common_space, {0.1, 0.2, 0.4, 0.2, 0.1}), 12, rng);
    const FlowTrace tr = conditional_flow(spec, [pi](const Dist&) { return pi; }, path);
    for (int t = 0; t + 1 <= tr.horizon(); ++t)
        CHECK(tr.mu[static_cast<std::size_t>(t + 1)][0] >=
              tr.mu[static_cast<std::size_t>(t)][0] - 1e-12);
}

TEST_CASE("delta sweep on a small grid") {
    Example1Config cfg;
    cfg.deltas = {0.0, 0.2, 0.4};
    cfg.perturb_count = 3;
    SweepConfig scfg;
    scfg.runs = 2;
    scfg.grid_k = 3;
    scfg.tol = 1e-6;
    scfg.eval_paths = 60;
    scfg.seed = 4242;
    const SweepResult res = run_delta_sweep(cfg, scfg);

    REQUIRE(res.rows.size() == 6);  // 3 deltas x 2 runs
    CHECK(res.audit_ok);

    for (const ComparisonRow& r : res.rows) {
        CHECK(std::isfinite(r.value_ref));
        CHECK(std::isfinite(r.value_robust));
        if (r.delta == 0.0) {
            // identical singleton sets and common random numbers: exact match
            CHECK(r.value_robust == r.value_ref);
            CHECK(r.uncertainty_size == 1);
        } else {
            CHECK(r.uncertainty_size > 1);
        }
    }

    // nested sets: solved robust value nonincreasing in delta within each run
    for (const auto& bounds : res.robust_bounds_per_run) {
        REQUIRE(bounds.size() == 3);
        for (std::size_t i = 0; i + 1 < bounds.size(); ++i)
            CHECK(bounds[i + 1] <= bounds[i] + 2 * scfg.tol);
    }

    // rerun reproduces identical rows
    const SweepResult res2 = run_delta_sweep(cfg, scfg);
    REQUIRE(res2.rows.size() == res.rows.size());
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        CHECK(res2.rows[i].value_ref == res.rows[i].value_ref);
        CHECK(res2.rows[i].value_robust == res.rows[i].value_robust);
    }

    std::ostringstream csv;
    write_comparison_csv(res.rows, csv);
    CHECK(csv.str().rfind("example,delta,run,policy,value,stderr\n", 0) == 0);
    int lines = 0;
    for (char c : csv.str())
        if (c == '\n') ++lines;
    CHECK(lines == 13);  // header + 2 per row
}

TEST_CASE("example 2 sweep proceeds under the audit warning") {
    Example2Config cfg;
    cfg.deltas = {0.0, 0.1};
    cfg.perturb_count = 2;
    SweepConfig scfg;
    scfg.runs = 1;
    scfg.grid_k = 2;
    scfg.tol = 1e-5;
    scfg.eval_paths = 30;
    std::ostringstream log;
    const SweepResult res = run_delta_sweep(cfg, scfg, &log);
    CHECK_FALSE(res.audit_ok);
    CHECK(log.str().find("assumption audit failed") != std::string::npos);
    CHECK(res.rows.size() == 2);
}

TEST_CASE("trajectory bundles") {
    Example1Config cfg;
    const ModelSpec spec = build_example1(cfg);
    const Dist p_true(spec.common_space, cfg.v_true);
    StatePolicy pi;
    for (int s = 0; s < spec.ns(); ++s) {
        std::vector<double> row = {0.3, 0.4, 0.3};
        pi.rows.emplace_back(spec.action_space, row);
    }
    const PolicyRule rule = [pi](const Dist&) { return pi; };
    const TrajectoryBundle bundle = emit_trajectory_figures_data(spec, rule, p_true, 20, 3, 99);
    REQUIRE(bundle.traces.size() == 3);
    REQUIRE(bundle.paths.size() == 3);
    for (const FlowTrace& tr : bundle.traces) {
        CHECK(tr.horizon() == 20);
        for (const Dist& mu : tr.mu) {
            double s = 0.0;
            for (int i = 0; i < spec.ns(); ++i) s += mu[i];
            CHECK(s == Catch::Approx(1.0).margin(1e-9));
        }
    }
    // deterministic given the seed
    const TrajectoryBundle again = emit_trajectory_figures_data(spec, rule, p_true, 20, 3, 99);
    for (std::size_t k = 0; k < 3; ++k) CHECK(again.paths[k].points == bundle.paths[k].points);

    std::ostringstream tcsv, ncsv;
    write_trajectories_csv(bundle, spec, tcsv);
    write_noise_paths_csv(bundle, spec, ncsv);
    CHECK(tcsv.str().find("mu_1") != std::string::npos);
    CHECK(tcsv.str().find("pi_1_-1") != std::string::npos);
    CHECK(ncsv.str().rfind("seed,t,e0\n", 0) == 0);
}
