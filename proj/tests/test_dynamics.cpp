#include "operon/dynamics.hpp"

#include "oracle_helpers.hpp"

#include <doctest.h>

using namespace operon;

namespace {

GroundMotionRecord record_from_samples(std::vector<double> samples, double dt) {
    GroundMotionRecord record;
    record.grid = TimeGrid{dt, samples.size()};
    record.accel = std::move(samples);
    return record;
}

GroundMotionRecord stochastic_record(const TimeGrid& grid, std::uint64_t seed) {
    GroundMotionParams p;
    return synthesize(p, grid, {}, seed);
}

/// piecewise-linear refinement of a coarse record onto a grid r times finer
GroundMotionRecord refine_linear(const GroundMotionRecord& coarse, std::size_t r) {
    GroundMotionRecord fine;
    fine.grid = TimeGrid{coarse.grid.dt / static_cast<double>(r),
                         (coarse.grid.n_steps - 1) * r + 1};
    fine.accel.resize(fine.grid.n_steps);
    for (std::size_t i = 0; i + 1 < coarse.grid.n_steps; ++i)
        for (std::size_t k = 0; k < r; ++k) {
            const double frac = static_cast<double>(k) / static_cast<double>(r);
            fine.accel[i * r + k] = coarse.accel[i] * (1.0 - frac) + coarse.accel[i + 1] * frac;
        }
    fine.accel.back() = coarse.accel.back();
    return fine;
}

}  // namespace

TEST_CASE("single story has frequency sqrt(k/m)/2pi") {
    const double k = 4.0 * kPi * kPi;
    const std::vector<double> mass{1.0}, stiff{k};
    const StructuralModel model = build_chain_model(1, mass, stiff, DampingSpec::rayleigh(0, 0));
    const auto freqs = natural_frequencies(model);
    REQUIRE(freqs.size() == 1);
    CHECK(freqs[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two equal stories match the analytic eigenpair") {
    const double m = 2.0, k = 50.0;
    const std::vector<double> mass{m}, stiff{k};
    const StructuralModel model = build_chain_model(2, mass, stiff, DampingSpec::rayleigh(0, 0));
    const ModalBasis basis = modal_analysis(model);

    // K = [[2k,-k],[-k,k]], M = m I -> omega^2 = k/m (3 -+ sqrt(5))/2
    const double low = k / m * (3.0 - std::sqrt(5.0)) / 2.0;
    const double high = k / m * (3.0 + std::sqrt(5.0)) / 2.0;
    CHECK(basis.omega[0] * basis.omega[0] == doctest::Approx(low).epsilon(1e-12));
    CHECK(basis.omega[1] * basis.omega[1] == doctest::Approx(high).epsilon(1e-12));

    // frequency ratio equals the golden-ratio pattern
    const double ratio = basis.omega[1] / basis.omega[0];
    CHECK(ratio == doctest::Approx(std::sqrt((3.0 + std::sqrt(5.0)) / (3.0 - std::sqrt(5.0))))
                       .epsilon(1e-12));

    // mass normalization: phi^T M phi = I
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < 2; ++i)
                acc += basis.shapes(i, a) * m * basis.shapes(i, b);
            CHECK(acc == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-10));
        }
}

TEST_CASE("default testbed frequencies and damping") {
    const StructuralModel model = default_testbed(false);
    const auto freqs = natural_frequencies(model);
    REQUIRE(freqs.size() == 10);
    CHECK(freqs[0] == doctest::Approx(0.2899).epsilon(2e-3));
    CHECK(freqs[0] >= 0.28);
    CHECK(freqs[2] <= 1.2);
    CHECK(freqs[1] - freqs[0] > 0.3);
    CHECK(freqs[2] - freqs[1] > 0.3);

    const ModalBasis basis = modal_analysis(model);
    CHECK(basis.zeta[0] == doctest::Approx(0.02).epsilon(1e-9));
    CHECK(basis.zeta[1] == doctest::Approx(0.02).epsilon(1e-9));

    const StructuralModel lowamp = default_testbed(true);
    CHECK(lowamp.sensor_scale[2] == 0.05);
    CHECK(lowamp.sensor_scale[7] == 0.05);
}

TEST_CASE("quiescent system stays at rest") {
    const StructuralModel model = default_testbed(false);
    const GroundMotionRecord zero = record_from_samples(std::vector<double>(101, 0.0), 0.02);
    for (const ResponseField& field : {newmark_integrate(model, zero), modal_oracle(model, zero)})
        for (double v : field.accel.data()) CHECK(v == 0.0);
}

TEST_CASE("initial row equals initial conditions") {
    const StructuralModel model = default_testbed(false);
    const GroundMotionRecord rec = stochastic_record(TimeGrid{0.02, 101}, 4);
    const ResponseField field = newmark_integrate(model, rec);
    // absolute acceleration at t=0 is y''_rel(0) + ug(0) = 0 for quiescent start
    for (std::size_t s = 0; s < model.n_sensors(); ++s)
        CHECK(field.accel(0, s) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("SDOF undamped step response matches the closed form") {
    const double m = 3.0, k = 75.0;  // omega = 5 rad/s
    const double omega = std::sqrt(k / m);
    const std::vector<double> mass{m}, stiff{k};
    const StructuralModel model = build_chain_model(1, mass, stiff, DampingSpec::rayleigh(0, 0));

    const double a0 = 0.7;
    const double dt = 0.001;
    const std::size_t steps = 2001;
    const GroundMotionRecord rec = record_from_samples(std::vector<double>(steps, a0), dt);
    IntegrationOptions opts;
    opts.keep_states = true;
    const ResponseField field = newmark_integrate(model, rec, {}, opts);

    // y(t) = -(a0/omega^2)(1 - cos omega t), oscillating about -m a0 / k
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = rec.grid.time(i);
        const double exact = -(a0 / (omega * omega)) * (1.0 - std::cos(omega * t));
        const double diff = field.displacement(i, 0) - exact;
        num += diff * diff;
        den += exact * exact;
    }
    CHECK(std::sqrt(num / den) < 5e-3);

    // mean over whole periods sits at the static offset
    const double period = 2.0 * kPi / omega;
    const std::size_t per_steps = static_cast<std::size_t>(period / dt);
    double mean_disp = 0.0;
    for (std::size_t i = 0; i < per_steps; ++i) mean_disp += field.displacement(i, 0);
    mean_disp /= static_cast<double>(per_steps);
    CHECK(mean_disp == doctest::Approx(-m * a0 / k).epsilon(5e-3));
}

TEST_CASE("newmark agrees with the modal oracle on a 3-DoF chain") {
    // stiffness puts the three modes near 0.29 / 0.81 / 1.17 Hz, the same
    // regime as the default testbed
    const std::vector<double> mass{1.0e3}, stiff{4.2e3};
    const StructuralModel model =
        build_chain_model(3, mass, stiff, DampingSpec::modal_pair(0, 1, 0.02, 0.02));
    const GroundMotionRecord rec = stochastic_record(TimeGrid{0.02, 101}, 17);

    const ResponseField newmark = newmark_integrate(model, rec);
    const ResponseField exact = modal_oracle(model, rec);
    CHECK(oracle::rel_rms(newmark.accel, exact.accel) < 0.01);

    // refined grid tightens the agreement
    const GroundMotionRecord fine = refine_linear(rec, 4);  // dt = 0.005
    const ResponseField newmark_fine = newmark_integrate(model, fine);
    const ResponseField exact_fine = modal_oracle(model, fine);
    CHECK(oracle::rel_rms(newmark_fine.accel, exact_fine.accel) < 0.002);
}

TEST_CASE("newmark error drops about 4x when dt halves") {
    const std::vector<double> mass{1.0e3}, stiff{4.2e3};
    const StructuralModel model =
        build_chain_model(3, mass, stiff, DampingSpec::modal_pair(0, 1, 0.02, 0.02));
    // the modal oracle is exact for piecewise-linear loads, so refining the
    // same piecewise-linear record isolates the integrator error
    const GroundMotionRecord coarse = stochastic_record(TimeGrid{0.02, 101}, 23);

    std::vector<double> errors;
    for (std::size_t refine : {1ul, 2ul, 4ul, 8ul}) {
        const GroundMotionRecord rec = refine_linear(coarse, refine);
        errors.push_back(
            oracle::rel_rms(newmark_integrate(model, rec).accel, modal_oracle(model, rec).accel));
    }
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        const double factor = errors[i] / errors[i + 1];
        CHECK(factor > 3.0);
        CHECK(factor < 5.0);
    }
}

TEST_CASE("modal oracle handles resonant harmonic load") {
    const double m = 1.0, k = 100.0;  // omega = 10
    const std::vector<double> mass{m}, stiff{k};
    const StructuralModel model = build_chain_model(1, mass, stiff, DampingSpec::rayleigh(0, 0));

    const double omega = 10.0;
    const double dt = 0.001;
    const std::size_t steps = 20001;  // 20 s
    std::vector<double> samples(steps);
    for (std::size_t i = 0; i < steps; ++i)
        samples[i] = std::sin(omega * dt * static_cast<double>(i));
    const GroundMotionRecord rec = record_from_samples(std::move(samples), dt);

    IntegrationOptions opts;
    opts.keep_states = true;
    const ResponseField field = modal_oracle(model, rec, opts);

    // undamped resonance: y(t) ~ -(p0/(2 omega)) t cos(omega t) with p0 = -1,
    // so the displacement envelope grows like t / (2 omega)
    const double t_end = rec.grid.time(steps - 1);
    double peak = 0.0;
    for (std::size_t i = steps - 700; i < steps; ++i)
        peak = std::max(peak, std::abs(field.displacement(i, 0)));
    CHECK(peak == doctest::Approx(t_end / (2.0 * omega)).epsilon(0.02));
}

TEST_CASE("linearity and superposition") {
    const StructuralModel model = default_testbed(false);
    const TimeGrid grid{0.02, 101};
    const GroundMotionRecord u1 = stochastic_record(grid, 31);
    const GroundMotionRecord u2 = stochastic_record(grid, 37);

    GroundMotionRecord scaled = u1;
    for (double& v : scaled.accel) v *= -2.5;
    GroundMotionRecord sum = u1;
    for (std::size_t i = 0; i < sum.accel.size(); ++i) sum.accel[i] += u2.accel[i];

    const Matrix r1 = newmark_integrate(model, u1).accel;
    const Matrix r2 = newmark_integrate(model, u2).accel;
    const Matrix rs = newmark_integrate(model, scaled).accel;
    const Matrix rsum = newmark_integrate(model, sum).accel;

    double scale_num = 0.0, scale_den = 0.0;
    for (std::size_t i = 0; i < r1.size(); ++i) {
        const double d = rs.data()[i] + 2.5 * r1.data()[i];
        scale_num += d * d;
        scale_den += rs.data()[i] * rs.data()[i];
    }
    CHECK(std::sqrt(scale_num / scale_den) < 1e-12);

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < r1.size(); ++i) {
        const double d = rsum.data()[i] - (r1.data()[i] + r2.data()[i]);
        num += d * d;
        den += rsum.data()[i] * rsum.data()[i];
    }
    CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("average acceleration scheme stays bounded over long runs") {
    const StructuralModel model = default_testbed(false);
    GroundMotionParams p;
    p.t_n = 200.0;
    const TimeGrid grid{0.02, 10001};
    const GroundMotionRecord rec = synthesize(p, grid, {}, 41);
    const ResponseField field = newmark_integrate(model, rec);
    double peak_in = 0.0, peak_out = 0.0;
    for (double v : rec.accel) peak_in = std::max(peak_in, std::abs(v));
    for (double v : field.accel.data()) peak_out = std::max(peak_out, std::abs(v));
    CHECK(peak_out < 1e3 * peak_in);
}

TEST_CASE("sensor subset and scaling are applied") {
    StructuralModel model = default_testbed(false);
    model.sensors = {0, 4, 9};
    model.sensor_scale = {1.0, 0.05, 1.0};
    const GroundMotionRecord rec = stochastic_record(TimeGrid{0.02, 101}, 43);
    const ResponseField subset = newmark_integrate(model, rec);

    const ResponseField full = newmark_integrate(default_testbed(false), rec);
    REQUIRE(subset.accel.cols() == 3);
    for (std::size_t i = 0; i < subset.accel.rows(); ++i) {
        CHECK(subset.accel(i, 0) == doctest::Approx(full.accel(i, 0)).epsilon(1e-14));
        CHECK(subset.accel(i, 1) == doctest::Approx(0.05 * full.accel(i, 4)).epsilon(1e-14));
        CHECK(subset.accel(i, 2) == doctest::Approx(full.accel(i, 9)).epsilon(1e-14));
    }
}

TEST_CASE("non-classical damping is rejected by the modal oracle") {
    StructuralModel model = default_testbed(false);
    model.damping(0, 0) += 500.0;  // lone damper on the base story
    const GroundMotionRecord rec = stochastic_record(TimeGrid{0.02, 51}, 47);
    CHECK_THROWS_AS(modal_oracle(model, rec), NumericalError);
    CHECK_NOTHROW(newmark_integrate(model, rec));  // direct integration still fine
}

TEST_CASE("model validation catches bad input") {
    const std::vector<double> mass{1.0}, stiff{1.0};
    CHECK_THROWS_AS(build_chain_model(0, mass, stiff, DampingSpec::rayleigh(0, 0)), ConfigError);
    const std::vector<double> bad{-1.0};
    CHECK_THROWS_AS(build_chain_model(2, bad, stiff, DampingSpec::rayleigh(0, 0)), ConfigError);

    StructuralModel model = default_testbed(false);
    model.sensors[1] = model.sensors[0];  // duplicate
    CHECK_THROWS_AS(model.validate(), ConfigError);

    model = default_testbed(false);
    model.influence[3] = 0.5;
    CHECK_THROWS_AS(model.validate(), ConfigError);
}
