// Stochastic ground acceleration synthesis: Kanai-Tajimi spectral density,
// deterministic strong-motion envelope, and harmonic-superposition sampling
// with uncertain spectrum parameters.
#pragma once

#include "operon/common.hpp"
#include "operon/rng.hpp"

#include <cstdint>
#include <vector>

namespace operon {

struct GroundMotionParams {
    double sigma_g = 0.9;         // excitation standard deviation
    double zeta_g = 0.3;          // spectral bandwidth
    double omega_g = 10.0 * kPi;  // dominant frequency [rad/s]
    double eps_t = 0.15;          // normalized peak time, in (0,1)
    double eta = 0.05;            // residual amplitude fraction, in (0,1)
    double t_n = 2.0;             // strong-motion duration [s]

    void validate() const;
};

struct TimeGrid {
    double dt = 0.02;
    std::size_t n_steps = 101;

    double duration() const { return dt * static_cast<double>(n_steps - 1); }
    double time(std::size_t i) const { return dt * static_cast<double>(i); }
    void validate() const;
};

struct GroundMotionRecord {
    GroundMotionParams params;
    TimeGrid grid;
    std::vector<double> accel;  // [m/s^2], accel[0] at t = 0
    std::uint64_t seed = 0;
};

/// Spectrum normalization S0 = sigma^2 * 2 zeta / (pi omega_g (4 zeta^2 + 1)).
double kt_baseline(const GroundMotionParams& params);

/// Two-sided Kanai-Tajimi spectral density at circular frequency omega.
double kt_spectrum(double omega, const GroundMotionParams& params);

struct EnvelopeCoefficients {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
};

/// Coefficients of E(t) = a (t/t_n)^b exp(-c t/t_n), normalized so the peak
/// value at t = eps_t * t_n is exactly 1.
EnvelopeCoefficients envelope_coefficients(const GroundMotionParams& params);

/// Envelope amplitude at time t; E(0) = 0 for b > 0 (continuous limit).
double envelope(double t, const GroundMotionParams& params);

struct SynthesisOptions {
    std::size_t n_harmonics = 512;
    double omega_max = 0.0;      // 0 selects 0.95 * pi / dt
    bool apply_envelope = true;  // false produces the stationary process
};

/// Harmonic superposition over omega_n = n * d_omega with random phases from
/// the seeded stream; deterministic in (params, grid, options, seed).
/// Rejects omega_max above the Nyquist frequency pi / dt.
GroundMotionRecord synthesize(const GroundMotionParams& params, const TimeGrid& grid,
                              const SynthesisOptions& options, std::uint64_t seed);

struct MotionSamplingBounds {
    double sigma_g_lo = 0.8, sigma_g_hi = 1.0;
    double zeta_g_lo = 0.2, zeta_g_hi = 0.4;
    double eps_t_lo = 0.1, eps_t_hi = 0.2;
    double omega_g = 10.0 * kPi;
    double eta = 0.05;
    double t_n = 2.0;

    void validate() const;
};

/// Draws sigma_g, zeta_g, eps_t uniformly; omega_g, eta, t_n are fixed.
GroundMotionParams sample_params(const MotionSamplingBounds& bounds, Rng& rng);
GroundMotionParams sample_params(const MotionSamplingBounds& bounds, std::uint64_t seed);

/// Realization i of an ensemble: parameter draw plus synthesis, with the
/// per-realization stream derived from (master_seed, i).
GroundMotionRecord generate_realization(const MotionSamplingBounds& bounds, const TimeGrid& grid,
                                        const SynthesisOptions& options, std::uint64_t master_seed,
                                        std::uint64_t index);

}  // namespace operon
