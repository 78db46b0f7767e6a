// Dataset container, stratified splitting, min-max normalization, and the
// architecture-specific sample structuring that feeds training.
#pragma once

#include "operon/ground_motion.hpp"
#include "operon/linalg.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace operon {

struct Dataset {
    Matrix motions;                  // N_u-by-N_t ground accelerations
    std::vector<Matrix> responses;   // per realization, N_t-by-N_x sensor accelerations
    TimeGrid grid;
    std::vector<std::uint64_t> seeds;  // provenance, one per realization

    std::size_t n_real() const { return motions.rows(); }
    std::size_t n_time() const { return motions.cols(); }
    std::size_t n_sensors() const { return responses.empty() ? 0 : responses.front().cols(); }
    void validate() const;
};

struct SplitRatios {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Mean-based stratified split: realizations are ranked by their response
/// mean over all time steps and sensors, grouped into quantile bins, and
/// each bin is split by the requested ratios with seeded shuffling. Global
/// split sizes stay within one realization of the exact ratios.
SplitIndices stratified_split(const Dataset& data, const SplitRatios& ratios, std::size_t n_bins,
                              std::uint64_t seed);

/// Linear map of each signal group (inputs, targets) onto [-1, 1] using
/// extrema of the training split only. Values outside the training range map
/// outside [-1, 1] and are not clipped.
struct MinMaxScaler {
    double input_min = 0.0, input_max = 0.0;
    double target_min = 0.0, target_max = 0.0;
    bool input_degenerate = false;
    bool target_degenerate = false;

    double apply_input(double v) const {
        return input_degenerate ? 0.0 : 2.0 * (v - input_min) / (input_max - input_min) - 1.0;
    }
    double invert_input(double s) const {
        return input_degenerate ? input_min : input_min + 0.5 * (s + 1.0) * (input_max - input_min);
    }
    double apply_target(double v) const {
        return target_degenerate ? 0.0 : 2.0 * (v - target_min) / (target_max - target_min) - 1.0;
    }
    double invert_target(double s) const {
        return target_degenerate ? target_min
                                 : target_min + 0.5 * (s + 1.0) * (target_max - target_min);
    }
};

MinMaxScaler scaler_fit(const Dataset& data, std::span<const std::size_t> train_indices);
Dataset scaler_apply(const MinMaxScaler& scaler, const Dataset& data);

/// Normalized trunk coordinates: time and sensor index both mapped to [-1, 1].
double normalized_time(const TimeGrid& grid, std::size_t i);
double normalized_sensor(std::size_t j, std::size_t n_x);

struct PointwiseTuple {
    std::span<const double> u;
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
};

/// Sample stream for the VD/ExD trunk: one tuple per (realization, sensor,
/// time), enumerated realization-major, then sensor, then time.
class PointwiseStream {
public:
    PointwiseStream(const Dataset& data, std::vector<std::size_t> realizations);

    std::size_t count() const { return realizations_.size() * n_t_ * n_x_; }
    PointwiseTuple at(std::size_t flat) const;
    /// Gathers rows for training: u batch-by-N_t, coords batch-by-2, targets batch-by-1.
    void fill_batch(std::span<const std::size_t> ids, Matrix& u, Matrix& coords,
                    Matrix& targets) const;

private:
    const Dataset* data_;
    std::vector<std::size_t> realizations_;
    std::size_t n_t_, n_x_;
};

struct FullFieldTuple {
    std::span<const double> u;
    double t = 0.0;
    std::span<const double> y;  // length N_x
};

/// Sample stream for the FExD trunk: one tuple per (realization, time), each
/// carrying the full sensor vector.
class FullFieldStream {
public:
    FullFieldStream(const Dataset& data, std::vector<std::size_t> realizations);

    std::size_t count() const { return realizations_.size() * n_t_; }
    FullFieldTuple at(std::size_t flat) const;
    /// u batch-by-N_t, coords batch-by-1, targets batch-by-N_x.
    void fill_batch(std::span<const std::size_t> ids, Matrix& u, Matrix& coords,
                    Matrix& targets) const;

private:
    const Dataset* data_;
    std::vector<std::size_t> realizations_;
    std::size_t n_t_, n_x_;
};

/// Seeded per-epoch shuffle over [0, count); emits the final partial batch.
class BatchIterator {
public:
    BatchIterator(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                  std::uint64_t epoch);

    std::optional<std::span<const std::size_t>> next();
    std::size_t n_batches() const;

private:
    std::vector<std::size_t> order_;
    std::size_t batch_size_;
    std::size_t cursor_ = 0;
};

// Binary dataset file: magic "OPRN1", then little-endian u64 N_u, N_t, N_x,
// f64 dt, motions (N_u*N_t f64, row-major), responses (N_u*N_t*N_x f64,
// realization-major then time then sensor), then N_u u64 seeds.
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Plain-text export for inspection: one motions table and one long-format
/// responses table.
void export_dataset_csv(const Dataset& data, const std::filesystem::path& directory);

/// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::vector<double> a, std::vector<double> b);

}  // namespace operon
