#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "rmfc/audit.hpp"
#include "rmfc/experiments.hpp"
#include "rmfc/uncertainty.hpp"

using namespace rmfc;

TEST_CASE("example 1 model is accepted") {
    const ModelSpec spec = build_example1(Example1Config{});
    CHECK(spec.validated);
    CHECK(spec.ns() == 7);
    CHECK(spec.na() == 3);
    CHECK(spec.ne() == 1);
    CHECK(spec.ne0() == 3);
    CHECK(spec.beta == 0.4);
}

TEST_CASE("discount bound is enforced") {
    Example1Config cfg;
    cfg.beta = 1.0;
    CHECK_THROWS_AS(build_example1(cfg), ValidationError);
}

TEST_CASE("out-of-range transition target is rejected with the offending tuple") {
    ModelSpec spec = build_example1(Example1Config{});
    std::vector<int> table = spec.transition.table();
    table[2] = 99;  // (s=1, a=-1, e=0, e0=1)
    spec.transition = TransitionRule::from_table(std::move(table));
    spec.validated = false;
    try {
        validate_model(spec);
        FAIL("expected rejection");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("s=1") != std::string::npos);
        CHECK(msg.find("a=-1") != std::string::npos);
    }
}

TEST_CASE("incomplete transition table is rejected") {
    ModelSpec spec = build_example1(Example1Config{});
    std::vector<int> table = spec.transition.table();
    table.pop_back();
    spec.transition = TransitionRule::from_table(std::move(table));
    spec.validated = false;
    CHECK_THROWS_AS(validate_model(spec), DimensionError);
}

TEST_CASE("audit on example 1") {
    const ModelSpec spec = build_example1(Example1Config{});
    const AssumptionReport rep = audit_assumptions(spec, 2);
    // clamped shift is 1-Lipschitz in s
    CHECK(rep.c_f_hat <= 1.0 + 1e-12);
    CHECK(rep.c_f_hat > 0.5);
    CHECK(rep.beta_ok);  // beta = 0.4 < 1/(2*1)
    CHECK(rep.c_r_bound > 0.0);
    CHECK(std::isfinite(rep.lipschitz_value_bound()));
}

TEST_CASE("audit of a Lambda-free table is invariant to the joint grid resolution") {
    const ModelSpec spec = build_example1(Example1Config{});
    const double c1 = audit_assumptions(spec, 1).c_f_hat;
    const double c2 = audit_assumptions(spec, 2).c_f_hat;
    const double c3 = audit_assumptions(spec, 3).c_f_hat;
    CHECK(c1 == c2);
    CHECK(c2 == c3);
}

TEST_CASE("constant transition audits to zero displacement") {
    ModelSpec spec = build_example1(Example1Config{});
    std::vector<int> table(spec.transition.table().size(), 3);  // F == s0
    spec.transition = TransitionRule::from_table(std::move(table));
    spec.validated = false;
    spec = validate_model(std::move(spec));
    const AssumptionReport rep = audit_assumptions(spec, 1);
    CHECK(rep.c_f_hat == 0.0);
    CHECK(rep.beta_ok);
}

TEST_CASE("example 2 audit reports the conditional beta rule") {
    const ModelSpec spec = build_example2(Example2Config{});
    const AssumptionReport rep = audit_assumptions(spec, 1);
    // beta_ok must equal the 2*beta*c_f < 1 test, whatever the estimate is
    CHECK(rep.beta_ok == (spec.beta < 1.0 / (2.0 * rep.c_f_hat)));
    // the absorbing floor makes the ratio exceed 1/(2*0.15) = 3.33
    CHECK(rep.c_f_hat > 3.33);
    CHECK_FALSE(rep.beta_ok);
}

TEST_CASE("perturbation arithmetic follows the formula") {
    const std::vector<double> v_ref = {0.0, 1.0, 0.0};
    const std::vector<double> raw = {0.3, -0.1, 0.1};
    const auto v = apply_perturbation(v_ref, raw);
    REQUIRE(v.has_value());
    CHECK((*v)[0] == Catch::Approx(0.2).margin(1e-15));
    CHECK((*v)[1] == Catch::Approx(0.8).margin(1e-15));
    CHECK((*v)[2] == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("delta zero collapses to the reference singleton") {
    auto sp = FiniteSpace::from_values({-1, 0, 1});
    const Dist v_ref(sp, {0.0, 1.0, 0.0});
    const auto set = make_perturbed_uncertainty_set(v_ref, 0.0, 10, 42);
    REQUIRE(set.size() == 1);
    CHECK(set[0].weights() == v_ref.weights());
}

TEST_CASE("generated sets are valid, deterministic, and seed-sensitive") {
    auto sp = FiniteSpace::from_values({-2, -1, 0, 1, 2});
    const Dist v_ref(sp, {0.0, 0.0, 1.0, 0.0, 0.0});
    const auto a = make_perturbed_uncertainty_set(v_ref, 0.2, 8, 7);
    const auto b = make_perturbed_uncertainty_set(v_ref, 0.2, 8, 7);
    const auto c = make_perturbed_uncertainty_set(v_ref, 0.2, 8, 8);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].weights() == b[i].weights());
    bool all_equal = a.size() == c.size();
    if (all_equal)
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i].weights() != c[i].weights()) all_equal = false;
    CHECK_FALSE(all_equal);
    for (const Dist& p : a) {
        double s = 0.0;
        for (double w : p.weights()) {
            CHECK(w >= 0.0);
            s += w;
        }
        CHECK(s == Catch::Approx(1.0).margin(1e-12));
    }
    CHECK(a[0].weights() == v_ref.weights());  // v_ref always included
    CHECK(a.size() == 9);                      // 8 draws + v_ref, no collisions at delta=0.2
}

TEST_CASE("mean-zero perturbations cannot clip to an all-zero vector") {
    // sum(v_ref + pert) = 1 before clipping, so clipping keeps positive mass
    const std::vector<double> v_ref = {1.0, 0.0, 0.0};
    const auto v = apply_perturbation(v_ref, {-5.0, -1.0, -1.0});
    REQUIRE(v.has_value());
    double s = 0.0;
    for (double x : *v) s += x;
    CHECK(s == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("example 2 q/epsilon warning rule") {
    Example2Config cfg;
    cfg.q = 2.0;
    cfg.epsilon = 1.0;  // q^2 > epsilon
    std::ostringstream warn;
    CHECK_NOTHROW(build_example2(cfg, &warn));
    CHECK(warn.str().find("q^2 > epsilon") != std::string::npos);
    cfg.enforce_q_epsilon_rule = true;
    CHECK_THROWS_AS(build_example2(cfg), ValidationError);
}

TEST_CASE("named mean-field transition rule validates and runs") {
    Example1Config cfg;
    ModelSpec spec = build_example1(cfg);
    RuleParams params;
    params["lo"] = {1.0};
    params["hi"] = {7.0};
    params["m0"] = {4.0};
    spec.transition = rules::make_transition("mean_shift_clamp", spec, params);
    spec.validated = false;
    spec = validate_model(std::move(spec));
    CHECK_FALSE(spec.transition.lambda_free());
    // Lambda-dependent audit must consider distinct joint pairs
    const AssumptionReport rep = audit_assumptions(spec, 1);
    CHECK(rep.c_f_hat > 0.0);
    CHECK_THROWS_AS(rules::make_transition("no_such_rule", spec, {}), ValidationError);
    RuleParams bad = params;
    bad["bogus"] = {1.0};
    CHECK_THROWS_AS(rules::make_transition("mean_shift_clamp", spec, bad), ValidationError);
}
