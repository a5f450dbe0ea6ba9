#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "pruneaware/errors.hpp"
#include "pruneaware/spsa.hpp"
#include "support.hpp"

using namespace pruneaware;

TEST_CASE("gain values under the default constants")
{
    const GainSchedule s;
    const Gains g0 = gain_at(s, 0);
    // Independent evaluation through exp/log.
    const double a0 = std::exp(-0.602 * std::log(10274.0));
    CHECK(std::abs(g0.a_k - a0) / a0 < 1e-12);
    CHECK(g0.a_k == doctest::Approx(3.845e-3).epsilon(1e-3));
    CHECK(g0.c_k == 0.020765);

    const Gains g99 = gain_at(s, 99);
    const double c99 = 0.020765 * std::exp(-0.101 * std::log(100.0));
    CHECK(std::abs(g99.c_k - c99) / c99 < 1e-12);
    CHECK(g99.c_k == doctest::Approx(1.304e-2).epsilon(1e-3));
}

TEST_CASE("gains are positive and strictly decreasing")
{
    const GainSchedule s;
    Gains prev = gain_at(s, 0);
    for (std::uint64_t k = 1; k < 20000; k += 7)
    {
        const Gains g = gain_at(s, k);
        CHECK(g.a_k > 0.0);
        CHECK(g.c_k > 0.0);
        CHECK(g.a_k < prev.a_k);
        CHECK(g.c_k < prev.c_k);
        prev = g;
    }
    GainSchedule bad;
    bad.c = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("rademacher draws")
{
    CounterRng rng(1, 0, 0);
    const Eigen::VectorXd v = sample_rademacher(100000, rng);
    CHECK((v.array().abs() == 1.0).all());
    CHECK(std::abs(v.mean()) < 0.02);

    CounterRng a(5, 3, 0), b(5, 3, 0), c(5, 4, 0), d(5, 3, 1);
    const Eigen::VectorXd va = sample_rademacher(257, a);
    CHECK(va == sample_rademacher(257, b));
    CHECK(va != sample_rademacher(257, c));
    CHECK(va != sample_rademacher(257, d));
    CHECK_THROWS_AS(sample_rademacher(0, a), ContractError);
}

TEST_CASE("equal probe values leave the weights unchanged")
{
    const ParamVector w = ParamVector::LinSpaced(9, -1.0, 1.0);
    const auto r = spsa_step(w, [](const ParamVector&) { return 0.25; }, GainSchedule{}, 3, 1);
    CHECK(testing::bit_equal(r.params, w));
    CHECK(r.y_plus == 0.25);
}

TEST_CASE("every coordinate moves by the same magnitude")
{
    const GainSchedule s;
    const ParamVector w = ParamVector::LinSpaced(50, -1.0, 1.0);
    const Fitness f = [](const ParamVector& x) { return -x.squaredNorm() + x[0]; };
    const std::uint64_t k = 12;
    const auto r = spsa_step(w, f, s, k, 99);
    const Gains g = gain_at(s, k);
    const double step = g.a_k * std::abs(r.y_plus - r.y_minus) / (2.0 * g.c_k);
    CHECK(step > 0.0);
    for (Index i = 0; i < w.size(); ++i)
        CHECK(std::abs(r.params[i] - w[i]) == doctest::Approx(step).epsilon(1e-9));

    // The probes are w +- c_k * delta with the same delta the update uses.
    CounterRng rng(99, k, 0);
    const Eigen::VectorXd delta = sample_rademacher(w.size(), rng);
    CHECK(r.y_plus == f(w + g.c_k * delta));
    CHECK(r.y_minus == f(w - g.c_k * delta));
}

TEST_CASE("frozen coordinates are neither probed nor updated")
{
    ParamVector w = ParamVector::Ones(6);
    w[0] = 0.0;
    w[3] = 0.0;
    const PruningMask freeze({0, 3}, 0.3, Scope::whole_model);
    const Fitness f = [](const ParamVector& x) {
        CHECK(x[0] == 0.0);
        CHECK(x[3] == 0.0);
        return -x.squaredNorm();
    };
    for (std::uint64_t k = 0; k < 50; ++k)
    {
        w = spsa_step(w, f, GainSchedule{}, k, 4, freeze).params;
        CHECK(w[0] == 0.0);
        CHECK(w[3] == 0.0);
    }
    CHECK_THROWS_AS(spsa_step(w, f, GainSchedule{}, 0, 4, PruningMask({6}, 0.0, Scope::whole_model)), ContractError);
}

TEST_CASE("non-finite fitness reports the iteration")
{
    const Fitness f = [](const ParamVector&) { return std::numeric_limits<double>::quiet_NaN(); };
    try
    {
        spsa_step(ParamVector::Ones(3), f, GainSchedule{}, 17, 1);
        FAIL("no error");
    }
    catch (const OptimizerError& e)
    {
        CHECK(e.iteration() == 17);
    }
}

TEST_CASE("one step descends a bowl in expectation")
{
    GainSchedule s;
    s.a = 0.1;
    s.A = 0.0;
    s.c = 0.1;
    ParamVector w(2);
    w << 1.0, 0.0;
    const Fitness f = [](const ParamVector& x) { return -x.squaredNorm(); };
    double mean_w0 = 0.0;
    const int runs = 2000;
    for (int seed = 0; seed < runs; ++seed)
        mean_w0 += spsa_step(w, f, s, 0, static_cast<std::uint64_t>(seed)).params[0];
    mean_w0 /= runs;
    // Expected update is -a * 2 * w0 = -0.2.
    CHECK(mean_w0 == doctest::Approx(0.8).epsilon(0.01));
}

TEST_CASE("zero iterations return the start point")
{
    const ParamVector w = ParamVector::LinSpaced(4, 0.0, 1.0);
    SpsaOptions opt;
    opt.trace_stride = 1;
    const auto r = optimize(w, [](const ParamVector& x) { return -x.squaredNorm(); }, opt);
    CHECK(testing::bit_equal(r.params, w));
    CHECK(r.steps == 0);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].k == 0);
}

TEST_CASE("optimization converges on a quadratic")
{
    GainSchedule s;
    s.a = 0.5;
    s.A = 50.0;
    s.c = 0.05;
    std::mt19937_64 rng(8);
    const Eigen::VectorXd target = testing::uniform_vector(rng, 10, -2.0, 2.0);
    const Fitness f = [&](const ParamVector& x) { return -(x - target).squaredNorm(); };
    SpsaOptions opt;
    opt.gains = s;
    opt.iterations = 2000;
    opt.seed = 3;
    const ParamVector w0 = target + testing::uniform_vector(rng, 10);
    const auto r = optimize(w0, f, opt);
    CHECK((r.params - target).norm() < 0.05);
    CHECK(r.steps == 2000);
}

TEST_CASE("runs are reproducible and traces follow the stride")
{
    const Fitness f = [](const ParamVector& x) { return -(x.array() - 0.3).square().sum(); };
    SpsaOptions opt;
    opt.iterations = 25;
    opt.seed = 77;
    opt.trace_stride = 10;
    opt.start_iteration = 100;
    const ParamVector w0 = ParamVector::Zero(5);
    const auto a = optimize(w0, f, opt);
    const auto b = optimize(w0, f, opt);
    CHECK(testing::bit_equal(a.params, b.params));
    REQUIRE(a.trace.size() == 4);
    CHECK(a.trace[0].k == 100);
    CHECK(a.trace[2].k == 120);
    CHECK(a.trace[3].k == 125);
    CHECK(a.trace[3].fitness == f(a.params));
    CHECK(a.trace[1].a_k == gain_at(opt.gains, 110).a_k);
    for (std::size_t i = 0; i < a.trace.size(); ++i)
        CHECK(a.trace[i].fitness == b.trace[i].fitness);

    // Splitting a run at any point reproduces it exactly.
    SpsaOptions first = opt, second = opt;
    first.iterations = 11;
    second.start_iteration = opt.start_iteration + 11;
    second.iterations = 14;
    const auto split = optimize(optimize(w0, f, first).params, f, second);
    CHECK(testing::bit_equal(split.params, a.params));

    std::ostringstream csv;
    write_trace_csv(csv, a.trace);
    CHECK(csv.str().rfind("k,fitness,a_k,c_k\n100,", 0) == 0);
}

TEST_CASE("scheduled fitness sees the gain index")
{
    std::vector<std::uint64_t> seen;
    const ScheduledFitness f = [&](const ParamVector& x, std::uint64_t k) {
        seen.push_back(k);
        return -x.squaredNorm();
    };
    SpsaOptions opt;
    opt.iterations = 3;
    opt.start_iteration = 5;
    optimize(ParamVector::Ones(2), f, opt);
    CHECK(seen == std::vector<std::uint64_t>{5, 5, 6, 6, 7, 7});
}
