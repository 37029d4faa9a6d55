#include <catch2/catch_amalgamated.hpp>

#include "rmfc/experiments.hpp"
#include "rmfc/lifted.hpp"
#include "rmfc/rng.hpp"

using namespace rmfc;

namespace {

Dist random_dist(const SpacePtr& sp, const CounterRng& rng, std::uint64_t tag) {
    std::vector<double> w(static_cast<std::size_t>(sp->size()));
    double s = 0.0;
    for (int i = 0; i < sp->size(); ++i) {
        w[static_cast<std::size_t>(i)] = -std::log(1.0 - rng.uniform({tag, static_cast<std::uint64_t>(i)}));
        s += w[static_cast<std::size_t>(i)];
    }
    for (double& x : w) x /= s;
    return Dist(sp, std::move(w));
}

StatePolicy random_policy(const SpacePtr& ss, const SpacePtr& sa, const CounterRng& rng,
                          std::uint64_t tag) {
    StatePolicy pi;
    for (int s = 0; s < ss->size(); ++s)
        pi.rows.push_back(random_dist(sa, rng, tag * 131 + static_cast<std::uint64_t>(s)));
    return pi;
}

JointDist dirac_joint(const ModelSpec& spec, int s, int a) {
    std::vector<double> w(static_cast<std::size_t>(spec.ns()) * spec.na(), 0.0);
    w[static_cast<std::size_t>(s) * spec.na() + a] = 1.0;
    return JointDist(spec.state_space, spec.action_space, std::move(w));
}

}  // namespace

TEST_CASE("kernel product basics") {
    const ModelSpec spec = build_example1(Example1Config{});
    CounterRng rng(7);

    // Dirac state law: the joint is supported on one row and carries pi(.|s0)
    const StatePolicy pi = random_policy(spec.state_space, spec.action_space, rng, 3);
    const JointDist j = kernel_to_joint(Dist::dirac(spec.state_space, 2), pi);
    for (int a = 0; a < spec.na(); ++a) CHECK(j.at(2, a) == pi.row(2)[a]);
    CHECK(j.at(0, 0) == 0.0);

    // uniform on two states with a deterministic kernel: two cells of 0.5
    StatePolicy det;
    for (int s = 0; s < spec.ns(); ++s) det.rows.push_back(Dist::dirac(spec.action_space, s % 3));
    std::vector<double> two(7, 0.0);
    two[1] = 0.5;
    two[4] = 0.5;
    const JointDist j2 = kernel_to_joint(Dist(spec.state_space, two), det);
    CHECK(j2.at(1, 1) == 0.5);
    CHECK(j2.at(4, 1) == 0.5);
}

TEST_CASE("marginal of the kernel product is bit-exact") {
    const ModelSpec spec = build_example1(Example1Config{});
    CounterRng rng(13);
    for (int trial = 0; trial < 25; ++trial) {
        const Dist mu = random_dist(spec.state_space, rng, 100 + static_cast<std::uint64_t>(trial));
        const StatePolicy pi = random_policy(spec.state_space, spec.action_space, rng,
                                             200 + static_cast<std::uint64_t>(trial));
        const JointDist j = kernel_to_joint(mu, pi);
        CHECK(j.s_marginal_weights() == mu.weights());
    }
}

TEST_CASE("disintegration") {
    const ModelSpec spec = build_example1(Example1Config{});
    CounterRng rng(19);

    // product joint: every row equals the action factor
    const Dist mu = random_dist(spec.state_space, rng, 5);
    const Dist zeta = random_dist(spec.action_space, rng, 6);
    StatePolicy constant;
    for (int s = 0; s < spec.ns(); ++s) constant.rows.push_back(zeta);
    const StatePolicy back = disintegrate(kernel_to_joint(mu, constant));
    for (int s = 0; s < spec.ns(); ++s)
        for (int a = 0; a < spec.na(); ++a)
            CHECK(back.row(s)[a] == Catch::Approx(zeta[a]).margin(1e-14));

    // round trip with everywhere-positive marginal
    const StatePolicy pi = random_policy(spec.state_space, spec.action_space, rng, 9);
    const StatePolicy rec = disintegrate(kernel_to_joint(mu, pi));
    for (int s = 0; s < spec.ns(); ++s)
        for (int a = 0; a < spec.na(); ++a)
            CHECK(rec.row(s)[a] == Catch::Approx(pi.row(s)[a]).margin(1e-13));

    // zero-mass row defaults to uniform
    const StatePolicy z = disintegrate(dirac_joint(spec, 0, 0));
    for (int a = 0; a < spec.na(); ++a)
        CHECK(z.row(3)[a] == Catch::Approx(1.0 / 3).margin(1e-15));
}

TEST_CASE("lifted transition on example 1") {
    const ModelSpec spec = build_example1(Example1Config{});

    // Dirac at (s=1, a=-1), e0 = 0: clamped at the left boundary
    const Dist d1 = lifted_transition(dirac_joint(spec, 0, 0), 1, spec);
    CHECK(d1[0] == Catch::Approx(1.0));

    // half at (3,+1), half at (5,+1), e0 = +1 -> half at 5, half at 7
    std::vector<double> w(21, 0.0);
    w[2 * 3 + 2] = 0.5;
    w[4 * 3 + 2] = 0.5;
    const Dist d2 = lifted_transition(JointDist(spec.state_space, spec.action_space, w), 2, spec);
    CHECK(d2[4] == Catch::Approx(0.5));
    CHECK(d2[6] == Catch::Approx(0.5));

    // mass one, support inside S
    CounterRng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Dist mu = random_dist(spec.state_space, rng, 900 + static_cast<std::uint64_t>(trial));
        const StatePolicy pi = random_policy(spec.state_space, spec.action_space, rng,
                                             950 + static_cast<std::uint64_t>(trial));
        for (int e0 = 0; e0 < spec.ne0(); ++e0) {
            const Dist out = lifted_transition(kernel_to_joint(mu, pi), e0, spec);
            double mass = 0.0;
            for (int s = 0; s < spec.ns(); ++s) mass += out[s];
            CHECK(mass == Catch::Approx(1.0).margin(1e-12));
        }
    }
}

TEST_CASE("lifted kernel") {
    const ModelSpec spec = build_example1(Example1Config{});

    const auto single = lifted_kernel(dirac_joint(spec, 3, 1), Dist::dirac(spec.common_space, 0), spec);
    REQUIRE(single.size() == 1);
    CHECK(single[0].weight == 1.0);

    // v_true spread over three noise values: three distinct successors here
    const Dist p(spec.common_space, {0.2, 0.7, 0.1});
    const auto succ = lifted_kernel(dirac_joint(spec, 3, 1), p, spec);
    CHECK(succ.size() == 3);
    double mass = 0.0;
    for (const auto& ws : succ) mass += ws.weight;
    CHECK(mass == Catch::Approx(1.0).margin(1e-12));

    // clamping at the top corner collapses all successors into one
    const auto merged = lifted_kernel(dirac_joint(spec, 6, 2), p, spec);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].weight == Catch::Approx(1.0).margin(1e-12));
    CHECK(merged[0].measure[6] == Catch::Approx(1.0));
}

TEST_CASE("lifted reward") {
    Example1Config cfg;
    const ModelSpec spec = build_example1(cfg);

    // pj_S(Lambda) equal to the target: zero reward for any action layout
    StatePolicy det;
    for (int s = 0; s < spec.ns(); ++s) det.rows.push_back(Dist::dirac(spec.action_space, 1));
    const JointDist at_target = kernel_to_joint(Dist(spec.state_space, cfg.target_mu), det);
    CHECK(lifted_reward(at_target, spec) == Catch::Approx(0.0).margin(1e-12));

    // Dirac(1) against target Dirac(7): squared distance 2, sign per config
    Example1Config far_cfg;
    far_cfg.target_mu = {0, 0, 0, 0, 0, 0, 1.0};
    const ModelSpec far = build_example1(far_cfg);
    CHECK(lifted_reward(dirac_joint(far, 0, 0), far) == Catch::Approx(-2.0));
    far_cfg.reward_sign = RewardSign::paper_literal;
    const ModelSpec far_lit = build_example1(far_cfg);
    CHECK(lifted_reward(dirac_joint(far_lit, 0, 0), far_lit) == Catch::Approx(2.0));

    // constant reward integrates to the constant
    ModelSpec cspec = build_example1(cfg);
    cspec.reward = rules::make_constant(3.25);
    cspec.validated = false;
    cspec = validate_model(std::move(cspec));
    CounterRng rng(29);
    const JointDist j = kernel_to_joint(random_dist(cspec.state_space, rng, 1),
                                        random_policy(cspec.state_space, cspec.action_space, rng, 2));
    CHECK(lifted_reward(j, cspec) == Catch::Approx(3.25).margin(1e-12));
}

TEST_CASE("lifted reward is linear in the joint when r ignores Lambda") {
    ModelSpec spec = build_example1(Example1Config{});
    std::vector<double> rtab(static_cast<std::size_t>(spec.ns()) * spec.na());
    CounterRng rng(31);
    for (std::size_t i = 0; i < rtab.size(); ++i)
        rtab[i] = rng.uniform(-2.0, 2.0, {77, static_cast<std::uint64_t>(i)});
    spec.reward = RewardRule::tabular(rtab);
    spec.validated = false;
    spec = validate_model(std::move(spec));

    for (int trial = 0; trial < 20; ++trial) {
        const JointDist a = kernel_to_joint(
            random_dist(spec.state_space, rng, 400 + static_cast<std::uint64_t>(trial)),
            random_policy(spec.state_space, spec.action_space, rng, 500 + static_cast<std::uint64_t>(trial)));
        const JointDist b = kernel_to_joint(
            random_dist(spec.state_space, rng, 600 + static_cast<std::uint64_t>(trial)),
            random_policy(spec.state_space, spec.action_space, rng, 650 + static_cast<std::uint64_t>(trial)));
        const double alpha = rng.uniform({700, static_cast<std::uint64_t>(trial)});
        std::vector<double> mixed(a.weights().size());
        for (std::size_t i = 0; i < mixed.size(); ++i)
            mixed[i] = alpha * a.weights()[i] + (1 - alpha) * b.weights()[i];
        const JointDist m(spec.state_space, spec.action_space, std::move(mixed));
        CHECK(lifted_reward(m, spec) ==
              Catch::Approx(alpha * lifted_reward(a, spec) + (1 - alpha) * lifted_reward(b, spec))
                  .margin(1e-10));
    }
}

TEST_CASE("monte carlo sampling concentrates on the lifted transition") {
    const ModelSpec spec = build_example2(Example2Config{});
    CounterRng rng(37);
    const JointDist joint = kernel_to_joint(
        random_dist(spec.state_space, rng, 41),
        random_policy(spec.state_space, spec.action_space, rng, 43));
    const int e0 = 3;
    const Dist exact = lifted_transition(joint, e0, spec);

    auto empirical_gap = [&](int M, std::uint64_t trial) {
        std::vector<long> counts(static_cast<std::size_t>(spec.ns()), 0);
        for (int i = 0; i < M; ++i) {
            const double u1 = rng.uniform({trial, 1, static_cast<std::uint64_t>(i)});
            const int cell = sample_index(joint.weights(), u1);
            const int s = cell / spec.na(), a = cell % spec.na();
            const double u2 = rng.uniform({trial, 2, static_cast<std::uint64_t>(i)});
            const int e = sample_index(spec.lambda_eps.weights(), u2);
            ++counts[static_cast<std::size_t>(spec.step(s, a, nullptr, e, e0))];
        }
        std::vector<double> w(counts.size());
        for (std::size_t k = 0; k < counts.size(); ++k)
            w[k] = static_cast<double>(counts[k]) / M;
        return w1_finite(Dist(spec.state_space, w), exact);
    };

    std::vector<double> g3, g4;
    for (std::uint64_t t = 0; t < 20; ++t) {
        g3.push_back(empirical_gap(1000, 1000 + t));
        g4.push_back(empirical_gap(10000, 2000 + t));
    }
    std::sort(g3.begin(), g3.end());
    std::sort(g4.begin(), g4.end());
    CHECK(g4[10] < g3[10]);  // median decreases with M
}
