// Error metrics, aggregate tables, worst-case identification, the
// training-size convergence study, and frequency-domain analysis (one-sided
// FFT spectra and cross-power spectral density decomposition).
#pragma once

#include "operon/training.hpp"

#include <complex>
#include <filesystem>

namespace operon {

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
    double rrmse_pct = 0.0;  // percent
    double r2_pct = 0.0;     // percent
    bool rrmse_defined = true;  // false when the target has zero energy
    bool r2_defined = true;     // false when the prediction has zero variance
};

struct MetricsOptions {
    // The R^2 denominator uses prediction deviations from the prediction
    // mean; set `textbook_r2` for the conventional target-deviation form
    // (not the form reported by this pipeline's tables).
    bool textbook_r2 = false;
};

/// Per-series MAE, RMSE, RRMSE (percent of target energy), and R^2.
Metrics compute_metrics(std::span<const double> pred, std::span<const double> target,
                        const MetricsOptions& options = {});

struct MetricsEntry {
    std::size_t realization_slot = 0;  // position within the evaluated split
    std::size_t realization_id = 0;    // dataset realization index
    std::size_t sensor = 0;
    Metrics m;
};

struct MetricsReport {
    std::vector<MetricsEntry> entries;  // realization-major, sensor-minor
    std::size_t n_realizations = 0;
    std::size_t n_sensors = 0;
};

/// Physical-space predictions for one realization: scales the input motion,
/// evaluates the operator over the full space-time grid, and inverts the
/// target scaling. Returns N_t-by-N_x.
Matrix predict_field(const OperatorModel& model, const MinMaxScaler& scaler,
                     std::span<const double> motion, const TimeGrid& grid);

/// Metrics for every (realization, sensor) pair of the given split.
MetricsReport evaluate_model(const OperatorModel& model, const MinMaxScaler& scaler,
                             const Dataset& raw, std::span<const std::size_t> indices,
                             const MetricsOptions& options = {});

struct SummaryStat {
    double mean = 0.0;
    double median = 0.0;
    double stddev = 0.0;
};

struct MetricSummary {
    SummaryStat mae, rmse, rrmse, r2;
    std::size_t count = 0;
    std::size_t rrmse_flagged = 0;  // sentinel entries excluded from rrmse stats
    std::size_t r2_flagged = 0;
};

struct AggregateTable {
    std::vector<MetricSummary> per_sensor;
    MetricSummary overall;
};

AggregateTable aggregate(const MetricsReport& report);

struct Histogram {
    double lo = 0.0;
    double bin_width = 0.0;
    std::vector<std::size_t> counts;
};

/// Fixed-width histogram; `bins` of zero selects the Freedman-Diaconis rule.
Histogram histogram(std::span<const double> values, std::size_t bins = 0);

struct WorstCase {
    std::size_t realization_slot = 0;
    std::size_t realization_id = 0;
    double mean_rrmse = 0.0;
    std::vector<double> per_sensor_rrmse;
};

/// Realization maximizing mean RRMSE over sensors (flagged sentinel entries
/// excluded from the mean); ties break toward the lowest slot.
WorstCase worst_case(const MetricsReport& report);

struct ConvergencePoint {
    std::size_t train_size = 0;
    double mean_rrmse = 0.0;
    double median_rrmse = 0.0;
};

/// Trains one model per requested training-set size on nested subsets of the
/// train split (scaler refitted per subset) and evaluates the fixed test
/// split.
std::vector<ConvergencePoint> convergence_study(std::span<const std::size_t> sizes,
                                                const Dataset& raw, const SplitIndices& split,
                                                const OperatorSizes& op_sizes,
                                                const TrainConfig& base_config,
                                                std::uint64_t init_seed);

struct AmplitudeSpectrum {
    std::vector<double> freq_hz;
    std::vector<double> amplitude;
};

/// One-sided amplitude spectrum with resolution 1 / (N dt).
AmplitudeSpectrum fft_spectrum(std::span<const double> series, double dt);

/// Complex DFT (radix-2 when the length is a power of two, direct otherwise).
std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x);

struct WelchConfig {
    std::size_t segment = 0;   // samples per segment; 0 selects a duration-based default
    double overlap = 0.5;      // fraction of segment shared by neighbours
    double peak_prominence = 0.01;  // local maxima below this fraction of the peak are ignored
    bool keep_cross = false;   // retain the averaged cross-PSD matrices
};

struct SpectralReport {
    std::vector<double> freq_hz;
    Matrix singular_values;           // n_freq-by-n_x, nonincreasing per row
    std::vector<double> peak_freqs_hz;  // picked on the first singular value
    // row-major n_x*n_x matrix per frequency when keep_cross is set
    std::vector<std::vector<std::complex<double>>> cross_psd;
};

/// Welch-averaged cross-power spectral density over one or more response
/// fields (N_t-by-N_x each), eigen-decomposed per frequency. Peaks of the
/// first singular value estimate the modal frequencies (frequency domain
/// decomposition).
SpectralReport cpsd_svd(std::span<const Matrix> fields, double dt, const WelchConfig& config = {});

/// Per-position table in the layout used by the aggregate reporting: one row
/// per sensor plus an average row.
void write_metrics_csv(const AggregateTable& table, const std::filesystem::path& path);
/// Raw per-(realization, sensor) metric entries, e.g. for histogramming.
void write_entries_csv(const MetricsReport& report, const std::filesystem::path& path);
void write_aggregate_json(const AggregateTable& table, const std::filesystem::path& path);
void write_spectral_csv(const SpectralReport& report, const std::filesystem::path& path);
void write_convergence_csv(std::span<const ConvergencePoint> points,
                           const std::filesystem::path& path);

}  // namespace operon
