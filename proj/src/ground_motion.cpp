#include "operon/ground_motion.hpp"

#include <cmath>

namespace operon {

void GroundMotionParams::validate() const {
    if (!(sigma_g > 0.0)) throw ConfigError("ground motion: sigma_g must be positive");
    if (!(zeta_g > 0.0)) throw ConfigError("ground motion: zeta_g must be positive");
    if (!(omega_g > 0.0)) throw ConfigError("ground motion: omega_g must be positive");
    if (!(eps_t > 0.0 && eps_t < 1.0)) throw ConfigError("ground motion: eps_t must lie in (0,1)");
    if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("ground motion: eta must lie in (0,1)");
    if (!(t_n > 0.0)) throw ConfigError("ground motion: t_n must be positive");
}

void TimeGrid::validate() const {
    if (!(dt > 0.0)) throw ConfigError("time grid: dt must be positive");
    if (n_steps < 2) throw ConfigError("time grid: need at least two steps");
}

double kt_baseline(const GroundMotionParams& params) {
    // the sigma = 0 boundary (zero intensity) is admitted here even though
    // sampled parameters are strictly positive
    if (!(params.sigma_g >= 0.0) || !(params.zeta_g > 0.0) || !(params.omega_g > 0.0))
        throw ConfigError("kt spectrum: requires sigma_g >= 0, zeta_g > 0, omega_g > 0");
    return params.sigma_g * params.sigma_g * 2.0 * params.zeta_g /
           (kPi * params.omega_g * (4.0 * params.zeta_g * params.zeta_g + 1.0));
}

double kt_spectrum(double omega, const GroundMotionParams& params) {
    const double s0 = kt_baseline(params);
    const double wg2 = params.omega_g * params.omega_g;
    const double band = 2.0 * params.zeta_g * params.omega_g * omega;
    const double num = wg2 * wg2 + band * band;
    const double diff = wg2 - omega * omega;
    const double den = diff * diff + band * band;
    return s0 * num / den;
}

EnvelopeCoefficients envelope_coefficients(const GroundMotionParams& params) {
    params.validate();
    const double ln_eta = std::log(params.eta);
    const double den = 1.0 + params.eps_t * (ln_eta - 1.0);
    // den <= 0 flips the sign of b and the envelope loses its peak
    if (den <= 0.0) throw ConfigError("envelope: degenerate (eps_t, eta) combination");
    EnvelopeCoefficients coef;
    coef.b = -params.eps_t * ln_eta / den;
    coef.c = coef.b / params.eps_t;
    coef.a = std::pow(std::exp(1.0) / params.eps_t, coef.b);
    return coef;
}

double envelope(double t, const GroundMotionParams& params) {
    const EnvelopeCoefficients coef = envelope_coefficients(params);
    const double tau = t / params.t_n;
    if (tau == 0.0) return coef.b > 0.0 ? 0.0 : coef.a;
    return coef.a * std::pow(tau, coef.b) * std::exp(-coef.c * tau);
}

GroundMotionRecord synthesize(const GroundMotionParams& params, const TimeGrid& grid,
                              const SynthesisOptions& options, std::uint64_t seed) {
    params.validate();
    grid.validate();
    if (options.n_harmonics < 1) throw ConfigError("synthesize: need at least one harmonic");

    const double nyquist = kPi / grid.dt;
    const double omega_max = options.omega_max > 0.0 ? options.omega_max : 0.95 * nyquist;
    if (omega_max > nyquist)
        throw NumericalError("synthesize: omega_max above Nyquist frequency causes aliasing");

    const std::size_t n = options.n_harmonics;
    const double d_omega = omega_max / static_cast<double>(n);

    Rng rng(seed);
    std::vector<double> amplitude(n), omega(n), phase(n);
    for (std::size_t h = 0; h < n; ++h) {
        omega[h] = static_cast<double>(h + 1) * d_omega;
        amplitude[h] = std::sqrt(2.0 * kt_spectrum(omega[h], params) * d_omega);
        phase[h] = rng.uniform(0.0, 2.0 * kPi);
    }

    GroundMotionRecord record;
    record.params = params;
    record.grid = grid;
    record.seed = seed;
    record.accel.assign(grid.n_steps, 0.0);

    const EnvelopeCoefficients coef = envelope_coefficients(params);
    for (std::size_t j = 0; j < grid.n_steps; ++j) {
        const double t = grid.time(j);
        double sum = 0.0;
        for (std::size_t h = 0; h < n; ++h) sum += amplitude[h] * std::cos(omega[h] * t + phase[h]);
        double env = 1.0;
        if (options.apply_envelope) {
            const double tau = t / params.t_n;
            env = (tau == 0.0 && coef.b > 0.0)
                      ? 0.0
                      : coef.a * std::pow(tau, coef.b) * std::exp(-coef.c * tau);
        }
        record.accel[j] = env * sum;
    }
    if (!all_finite(record.accel)) throw NumericalError("synthesize: non-finite acceleration");
    return record;
}

void MotionSamplingBounds::validate() const {
    if (sigma_g_lo > sigma_g_hi || zeta_g_lo > zeta_g_hi || eps_t_lo > eps_t_hi)
        throw ConfigError("motion bounds: inverted interval");
    GroundMotionParams probe;
    probe.sigma_g = sigma_g_lo;
    probe.zeta_g = zeta_g_lo;
    probe.eps_t = eps_t_lo;
    probe.omega_g = omega_g;
    probe.eta = eta;
    probe.t_n = t_n;
    probe.validate();
    probe.sigma_g = sigma_g_hi;
    probe.zeta_g = zeta_g_hi;
    probe.eps_t = eps_t_hi;
    probe.validate();
}

GroundMotionParams sample_params(const MotionSamplingBounds& bounds, Rng& rng) {
    bounds.validate();
    GroundMotionParams params;
    params.sigma_g = rng.uniform(bounds.sigma_g_lo, bounds.sigma_g_hi);
    params.zeta_g = rng.uniform(bounds.zeta_g_lo, bounds.zeta_g_hi);
    params.eps_t = rng.uniform(bounds.eps_t_lo, bounds.eps_t_hi);
    params.omega_g = bounds.omega_g;
    params.eta = bounds.eta;
    params.t_n = bounds.t_n;
    return params;
}

GroundMotionParams sample_params(const MotionSamplingBounds& bounds, std::uint64_t seed) {
    Rng rng(seed);
    return sample_params(bounds, rng);
}

GroundMotionRecord generate_realization(const MotionSamplingBounds& bounds, const TimeGrid& grid,
                                        const SynthesisOptions& options, std::uint64_t master_seed,
                                        std::uint64_t index) {
    const std::uint64_t stream = derive_stream(master_seed, index);
    const GroundMotionParams params = sample_params(bounds, derive_stream(stream, "params"));
    GroundMotionRecord record = synthesize(params, grid, options, derive_stream(stream, "phases"));
    record.seed = stream;
    return record;
}

}  // namespace operon
