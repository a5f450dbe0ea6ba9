#include <doctest.h>

#include <random>

#include "pruneaware/errors.hpp"
#include "pruneaware/objective.hpp"
#include "support.hpp"

using namespace pruneaware;

namespace
{

// Direct per-window two-pass computation of the envelope score.
double naive_envelope(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Index w, double floor)
{
    double total = 0.0;
    Index scored = 0;
    for (Index m = 0; m < x.rows(); ++m)
        for (Index s = 0; s + w <= x.cols(); ++s)
        {
            const Eigen::VectorXd a = x.row(m).segment(s, w).transpose();
            const Eigen::VectorXd b = y.row(m).segment(s, w).transpose();
            if ((a.array() == a[0]).all())
                continue;
            ++scored;
            if ((b.array() == b[0]).all())
                continue;
            const Eigen::VectorXd da = a.array() - a.mean();
            const Eigen::VectorXd db = b.array() - b.mean();
            total += da.dot(db) / (da.norm() * db.norm());
        }
    if (scored == 0)
        return floor;
    return std::clamp(total / static_cast<double>(scored), floor, 1.0);
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Index rows, Index cols)
{
    return testing::uniform_vector(rng, rows * cols, 0.0, 1.0).reshaped(rows, cols);
}

} // namespace

TEST_CASE("negative mse")
{
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd x = random_matrix(rng, 22, 40);
    CHECK(neg_mse_fitness(x, x) == 0.0);
    CHECK(neg_mse_fitness(Eigen::MatrixXd::Zero(3, 7), Eigen::MatrixXd::Ones(3, 7)) == -1.0);
    const Eigen::MatrixXd e = random_matrix(rng, 22, 40);
    CHECK(neg_mse_fitness(x, x + 2.0 * e) == doctest::Approx(4.0 * neg_mse_fitness(x, x + e)).epsilon(1e-12));
    CHECK(neg_mse_fitness(x, e) <= 0.0);
    CHECK_THROWS_AS(neg_mse_fitness(x, x.leftCols(39)), ContractError);
}

TEST_CASE("envelope correlation boundary examples")
{
    std::mt19937_64 rng(2);
    const FitnessSpec spec;
    const Eigen::MatrixXd x = random_matrix(rng, 22, 45);
    CHECK(envelope_correlation_fitness(x, x, spec) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(envelope_correlation_fitness(x, 2.0 * x, spec) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(envelope_correlation_fitness(x, -x, spec) == 0.0);

    FitnessSpec negative = spec;
    negative.score_floor = -1.0;
    CHECK(envelope_correlation_fitness(x, -x, negative) == doctest::Approx(-1.0).epsilon(1e-12));

    CHECK_THROWS_AS(envelope_correlation_fitness(x.leftCols(29), x.leftCols(29), spec), ContractError);
    CHECK_THROWS_AS(envelope_correlation_fitness(x, x.leftCols(44), spec), ContractError);
}

TEST_CASE("constant reference windows are skipped, constant reconstructions score zero")
{
    FitnessSpec spec;
    spec.window_frames = 4;
    spec.score_floor = -1.0;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 4);
    x.row(0) << 0.0, 1.0, 0.0, 1.0; // channel 1 stays silent
    Eigen::MatrixXd y = x;
    CHECK(envelope_correlation_fitness(x, y, spec) == doctest::Approx(1.0));
    y.row(0).setConstant(0.3);
    CHECK(envelope_correlation_fitness(x, y, spec) == 0.0);
    // Silence everywhere: nothing scored, result is the floor.
    CHECK(envelope_correlation_fitness(Eigen::MatrixXd::Zero(2, 4), y, spec) == -1.0);
}

TEST_CASE("envelope correlation matches a direct computation")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial)
    {
        FitnessSpec spec;
        spec.window_frames = 5 + trial;
        spec.score_floor = trial % 2 ? -1.0 : 0.0;
        Eigen::MatrixXd x = random_matrix(rng, 22, 60);
        // Sparse, partly silent channels like real patterns.
        x = (x.array() < 0.5).select(0.0, x);
        x.row(trial % 22).setZero();
        const Eigen::MatrixXd y = 0.7 * x + 0.3 * random_matrix(rng, 22, 60);
        const double got = envelope_correlation_fitness(x, y, spec);
        CHECK(got == doctest::Approx(naive_envelope(x, y, spec.window_frames, spec.score_floor)).epsilon(1e-9));
        CHECK(got >= spec.score_floor);
        CHECK(got <= 1.0);
    }
}

TEST_CASE("fitness kinds")
{
    CHECK(parse_fitness_kind("neg_mse") == FitnessKind::neg_mse);
    CHECK(to_string(FitnessKind::envelope_correlation) == "envelope_correlation");
    CHECK_THROWS_AS(parse_fitness_kind("vstoi"), ConfigError);
    FitnessSpec bad;
    bad.window_frames = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("dataset fitness is the mean of independent sequence scores")
{
    const auto model = init_model(FraeConfig{}, 4);
    const Dataset data = generate_synthetic(6, 40, 5);
    for (const FitnessKind kind : {FitnessKind::envelope_correlation, FitnessKind::neg_mse})
    {
        FitnessSpec spec;
        spec.kind = kind;
        double sum = 0.0;
        for (const auto& seq : data)
        {
            const Eigen::MatrixXd frames = seq.frames.cast<double>();
            sum += sequence_fitness(frames, code_sequence(model, frames).frames_hat, spec);
        }
        const double got = dataset_fitness(model, data, spec);
        // Batched and single-sequence coding may differ in the last bits,
        // which near-flat windows amplify slightly.
        CHECK(got == doctest::Approx(sum / 6.0).epsilon(1e-8));
        CHECK(dataset_fitness(model, data, spec) == got);

        const Dataset one{data[2]};
        const Eigen::MatrixXd frames = data[2].frames.cast<double>();
        CHECK(dataset_fitness(model, one, spec) ==
              doctest::Approx(sequence_fitness(frames, code_sequence(model, frames).frames_hat, spec)).epsilon(1e-8));

        Dataset reversed(data.rbegin(), data.rend());
        CHECK(dataset_fitness(model, reversed, spec) == doctest::Approx(got).epsilon(1e-8));
    }
    CHECK_THROWS_AS(dataset_fitness(model, {}, FitnessSpec{}), ContractError);
}

TEST_CASE("a perfect reconstruction scores one")
{
    const Dataset data = generate_synthetic(3, 40, 6);
    for (const auto& seq : data)
    {
        const Eigen::MatrixXd frames = seq.frames.cast<double>();
        CHECK(sequence_fitness(frames, frames, FitnessSpec{}) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fitness closure evaluates the given parameters")
{
    const auto model = init_model(FraeConfig{}, 4);
    const Dataset data = generate_synthetic(3, 40, 5);
    const Fitness f = make_dataset_fitness(model, data, FitnessSpec{});
    const auto other = init_model(FraeConfig{}, 5);
    CHECK(f(other.params) == dataset_fitness(other, data, FitnessSpec{}));
    CHECK_THROWS_AS(f(ParamVector::Zero(3)), ContractError);
}
