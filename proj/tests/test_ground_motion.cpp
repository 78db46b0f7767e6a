#include "operon/ground_motion.hpp"

#include "oracle_helpers.hpp"

#include <doctest.h>

#include <complex>

using namespace operon;

namespace {

GroundMotionParams reference_params() {
    GroundMotionParams p;
    p.sigma_g = 0.9;
    p.zeta_g = 0.3;
    p.omega_g = 10.0 * kPi;
    p.eps_t = 0.15;
    p.eta = 0.05;
    p.t_n = 2.0;
    return p;
}

}  // namespace

TEST_CASE("kt_baseline closed form") {
    const GroundMotionParams p = reference_params();
    const double expected =
        0.9 * 0.9 * 2.0 * 0.3 / (kPi * 10.0 * kPi * (4.0 * 0.3 * 0.3 + 1.0));
    CHECK(kt_baseline(p) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(kt_baseline(p) == doctest::Approx(3.6207e-3).epsilon(1e-4));

    GroundMotionParams zero = p;
    zero.sigma_g = 0.0;  // zero-intensity boundary
    CHECK(kt_baseline(zero) == 0.0);

    GroundMotionParams twice = p;
    twice.sigma_g = 2.0 * p.sigma_g;
    CHECK(kt_baseline(twice) == doctest::Approx(4.0 * kt_baseline(p)).epsilon(1e-14));
}

TEST_CASE("kt_spectrum limits and resonance") {
    const GroundMotionParams p = reference_params();
    const double s0 = kt_baseline(p);

    CHECK(kt_spectrum(0.0, p) == doctest::Approx(s0).epsilon(1e-14));
    CHECK(kt_spectrum(100.0 * p.omega_g, p) < 1e-3 * s0);

    // at resonance the closed form reduces to S0 (1 + 4 zeta^2) / (4 zeta^2)
    const double resonance = kt_spectrum(p.omega_g, p);
    CHECK(resonance == doctest::Approx(s0 * 1.36 / 0.36).epsilon(1e-12));

    // evenness and nonnegativity
    for (double w : {0.3, 7.7, 31.4, 80.0, 149.0}) {
        CHECK(kt_spectrum(w, p) >= 0.0);
        CHECK(kt_spectrum(-w, p) == doctest::Approx(kt_spectrum(w, p)).epsilon(1e-15));
    }

    // monotone decay beyond resonance
    double prev = kt_spectrum(2.0 * p.omega_g, p);
    for (double w = 3.0 * p.omega_g; w < 30.0 * p.omega_g; w += p.omega_g) {
        const double cur = kt_spectrum(w, p);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("two-sided spectrum integrates to sigma^2") {
    for (double zeta : {0.2, 0.3, 0.4}) {
        GroundMotionParams p = reference_params();
        p.zeta_g = zeta;
        auto spectrum = [&](double w) { return kt_spectrum(w, p); };
        const double cut = 60.0 * p.omega_g;
        const double body = oracle::adaptive_simpson(spectrum, 0.0, cut, 1e-12);
        // tail via v = 1/w: integral_cut^inf S dw = integral_0^{1/cut} S(1/v)/v^2 dv
        const double tail = oracle::adaptive_simpson(
            [&](double v) {
                if (v == 0.0) return kt_baseline(p) * 4.0 * p.zeta_g * p.zeta_g * p.omega_g * p.omega_g;
                const double w = 1.0 / v;
                return kt_spectrum(w, p) * w * w;
            },
            0.0, 1.0 / cut, 1e-14);
        const double integral = 2.0 * (body + tail);
        CHECK(integral == doctest::Approx(p.sigma_g * p.sigma_g).epsilon(1e-3));
    }
}

TEST_CASE("envelope coefficients and identities") {
    const GroundMotionParams p = reference_params();
    const EnvelopeCoefficients coef = envelope_coefficients(p);

    const double ln_eta = std::log(0.05);
    const double b_expected = -0.15 * ln_eta / (1.0 + 0.15 * (ln_eta - 1.0));
    CHECK(coef.b == doctest::Approx(b_expected).epsilon(1e-14));
    CHECK(coef.c == doctest::Approx(b_expected / 0.15).epsilon(1e-14));
    CHECK(coef.a == doctest::Approx(std::pow(std::exp(1.0) / 0.15, b_expected)).epsilon(1e-14));
    CHECK(coef.b == doctest::Approx(1.1216).epsilon(1e-3));
    CHECK(coef.c == doctest::Approx(7.477).epsilon(1e-3));
    CHECK(coef.a == doctest::Approx(25.79).epsilon(2e-3));

    CHECK(envelope(0.0, p) == 0.0);
    CHECK(envelope(p.eps_t * p.t_n, p) == doctest::Approx(1.0).epsilon(1e-13));

    const double mid = coef.a * std::pow(0.5, coef.b) * std::exp(-coef.c * 0.5);
    CHECK(envelope(0.5 * p.t_n, p) == doctest::Approx(mid).epsilon(1e-14));
    CHECK(envelope(0.5 * p.t_n, p) == doctest::Approx(0.2818).epsilon(2e-3));
}

TEST_CASE("envelope peak identity for random draws and unimodality") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        GroundMotionParams p = reference_params();
        // region where b > 0 and the printed formulas stay peaked
        p.eps_t = rng.uniform(0.05, 0.2);
        p.eta = rng.uniform(0.02, 0.6);
        CHECK(std::abs(envelope(p.eps_t * p.t_n, p) - 1.0) < 1e-12);

        // unimodal: rises up to the peak time, decays after it
        const int steps = 400;
        std::vector<double> values(steps + 1);
        int argmax = 0;
        for (int k = 0; k <= steps; ++k) {
            const double t = 2.0 * p.t_n * static_cast<double>(k) / steps;
            values[k] = envelope(t, p);
            CHECK(values[k] >= 0.0);
            if (values[k] > values[argmax]) argmax = k;
        }
        const double t_peak = 2.0 * p.t_n * static_cast<double>(argmax) / steps;
        CHECK(std::abs(t_peak - p.eps_t * p.t_n) <= 2.0 * p.t_n / steps + 1e-12);
        for (int k = 0; k < argmax; ++k) CHECK(values[k] <= values[k + 1] * (1.0 + 1e-12));
        for (int k = argmax; k < steps; ++k) CHECK(values[k + 1] <= values[k] * (1.0 + 1e-12));
    }

    GroundMotionParams degenerate = reference_params();
    degenerate.eps_t = 0.5;
    degenerate.eta = 0.01;  // 1 + eps (ln eta - 1) < 0
    CHECK_THROWS_AS(envelope_coefficients(degenerate), ConfigError);
}

TEST_CASE("eta near one flattens the envelope") {
    GroundMotionParams p = reference_params();
    p.eta = 1.0 - 1e-12;
    const EnvelopeCoefficients coef = envelope_coefficients(p);
    CHECK(std::abs(coef.b) < 1e-11);
    for (double t : {0.2, 0.7, 1.5})
        CHECK(envelope(t, p) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("synthesize single harmonic reproduces a pure cosine") {
    GroundMotionParams p = reference_params();
    TimeGrid grid{0.02, 101};
    SynthesisOptions options;
    options.n_harmonics = 1;
    options.omega_max = 20.0;
    options.apply_envelope = false;

    const GroundMotionRecord record = synthesize(p, grid, options, 99);

    // reconstruct independently: the single harmonic sits at omega_max with
    // the first phase draw of the seeded stream
    Rng rng(99);
    const double theta = rng.uniform(0.0, 2.0 * kPi);
    const double amplitude = std::sqrt(2.0 * kt_spectrum(20.0, p) * 20.0);
    for (std::size_t j = 0; j < grid.n_steps; ++j) {
        const double expected = amplitude * std::cos(20.0 * grid.time(j) + theta);
        CHECK(record.accel[j] == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("synthesize determinism and aliasing guard") {
    const GroundMotionParams p = reference_params();
    const TimeGrid grid{0.02, 101};
    const GroundMotionRecord a = synthesize(p, grid, {}, 7);
    const GroundMotionRecord b = synthesize(p, grid, {}, 7);
    CHECK(a.accel == b.accel);

    const GroundMotionRecord c = synthesize(p, grid, {}, 8);
    CHECK(a.accel != c.accel);

    SynthesisOptions bad;
    bad.omega_max = kPi / grid.dt * 1.01;
    CHECK_THROWS_AS(synthesize(p, grid, bad, 7), NumericalError);
}

TEST_CASE("stationary ensemble matches the target spectral level") {
    // Monte-Carlo spectral oracle: the band-averaged one-sided periodogram
    // (per Hz) of the stationary process should sit at 2 pi S(omega).
    GroundMotionParams p = reference_params();
    const TimeGrid grid{0.02, 101};
    SynthesisOptions options;
    options.apply_envelope = false;

    const std::size_t n = grid.n_steps;
    const double fs = 1.0 / grid.dt;
    const std::size_t n_freq = n / 2 + 1;
    std::vector<double> periodogram(n_freq, 0.0);

    const int n_realizations = 1000;
    for (int r = 0; r < n_realizations; ++r) {
        const GroundMotionRecord rec = synthesize(p, grid, options, 1000 + r);
        for (std::size_t k = 0; k < n_freq; ++k) {
            std::complex<double> acc(0.0, 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                const double angle = -2.0 * kPi * static_cast<double>(k * j) / static_cast<double>(n);
                acc += rec.accel[j] * std::complex<double>(std::cos(angle), std::sin(angle));
            }
            const double two_sided = std::norm(acc) / (fs * static_cast<double>(n));
            periodogram[k] += (k > 0 && !(n % 2 == 0 && k == n / 2)) ? 2.0 * two_sided : two_sided;
        }
    }

    double measured = 0.0, target = 0.0;
    int bins = 0;
    for (std::size_t k = 0; k < n_freq; ++k) {
        const double omega = 2.0 * kPi * static_cast<double>(k) * fs / static_cast<double>(n);
        if (omega < 2.0 || omega > 60.0) continue;
        measured += periodogram[k] / n_realizations;
        target += 2.0 * kPi * kt_spectrum(omega, p);
        ++bins;
    }
    REQUIRE(bins >= 5);
    CHECK(measured / target == doctest::Approx(1.0).epsilon(0.10));
}

TEST_CASE("ensemble mean tends to zero at fixed times") {
    GroundMotionParams p = reference_params();
    const TimeGrid grid{0.02, 101};
    std::vector<double> sums(grid.n_steps, 0.0);
    const int n = 2000;
    for (int r = 0; r < n; ++r) {
        const GroundMotionRecord rec = synthesize(p, grid, {}, 50000 + r);
        for (std::size_t j = 0; j < grid.n_steps; ++j) sums[j] += rec.accel[j];
    }
    // per-time standard error is roughly sigma_g/sqrt(n); allow 5 sigma
    const double bound = 5.0 * p.sigma_g / std::sqrt(static_cast<double>(n));
    for (std::size_t j = 10; j < grid.n_steps; ++j)
        CHECK(std::abs(sums[j] / n) < bound);
}

TEST_CASE("sample_params honours bounds") {
    MotionSamplingBounds bounds;
    SUBCASE("defaults reproduce the documented ranges") {
        CHECK(bounds.sigma_g_lo == 0.8);
        CHECK(bounds.sigma_g_hi == 1.0);
        CHECK(bounds.zeta_g_lo == 0.2);
        CHECK(bounds.zeta_g_hi == 0.4);
        CHECK(bounds.eps_t_lo == 0.1);
        CHECK(bounds.eps_t_hi == 0.2);
        CHECK(bounds.omega_g == doctest::Approx(10.0 * kPi));
        CHECK(bounds.eta == 0.05);
    }
    SUBCASE("collapsed bounds give deterministic params") {
        bounds.sigma_g_lo = bounds.sigma_g_hi = 0.85;
        bounds.zeta_g_lo = bounds.zeta_g_hi = 0.33;
        bounds.eps_t_lo = bounds.eps_t_hi = 0.12;
        const GroundMotionParams p = sample_params(bounds, 5);
        CHECK(p.sigma_g == 0.85);
        CHECK(p.zeta_g == 0.33);
        CHECK(p.eps_t == 0.12);
    }
    SUBCASE("law of large numbers for zeta") {
        Rng rng(2024);
        double sum = 0.0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) sum += sample_params(bounds, rng).zeta_g;
        CHECK(sum / n == doctest::Approx(0.3).epsilon(0.005 / 0.3));
    }
    SUBCASE("inverted bounds rejected") {
        bounds.zeta_g_lo = 0.5;
        bounds.zeta_g_hi = 0.2;
        CHECK_THROWS_AS(sample_params(bounds, 1), ConfigError);
    }
}

TEST_CASE("per-realization streams are pure in (master, index)") {
    MotionSamplingBounds bounds;
    const TimeGrid grid{0.02, 101};
    const GroundMotionRecord a = generate_realization(bounds, grid, {}, 11, 3);
    const GroundMotionRecord b = generate_realization(bounds, grid, {}, 11, 3);
    CHECK(a.accel == b.accel);
    CHECK(a.seed == b.seed);
    const GroundMotionRecord c = generate_realization(bounds, grid, {}, 11, 4);
    CHECK(a.accel != c.accel);
}
