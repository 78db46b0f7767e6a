// Optimization loop shared by the three operator kinds: MSE loss, epoch
// scheduling with the cyclical learning rate, early stopping on validation
// plateau, best-model retention, and checkpoint serialization.
#pragma once

#include "operon/data_pipeline.hpp"
#include "operon/operators.hpp"

#include <filesystem>
#include <limits>
#include <optional>

namespace operon {

struct TrainConfig {
    OperatorKind kind = OperatorKind::FExD;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 300;
    LrSchedule lr{1e-4, 1e-3, 0};  // cycle_length 0 selects 2 * n_train_batches
    AdamWConfig adamw{};
    std::size_t patience = 50;
    double improvement_threshold = 0.01;
    std::uint64_t shuffle_seed = 1;
    bool verbose = false;

    void validate() const;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr_last = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;  // index into epochs
    double best_val = std::numeric_limits<double>::infinity();
};

struct TrainResult {
    OperatorModel model;
    TrainHistory history;
};

/// Mean of squared differences over every predicted value in the batch.
double mse_loss(const Matrix& pred, const Matrix& target);

/// Same, also writing d loss / d pred = 2 (pred - target) / count.
double mse_loss(const Matrix& pred, const Matrix& target, Matrix& grad);

/// Plateau detector: an epoch counts toward the patience counter when the
/// relative improvement over the best validation loss so far stays below the
/// threshold; any larger improvement resets the counter.
class EarlyStopTracker {
public:
    EarlyStopTracker(std::size_t patience, double threshold)
        : patience_(patience), threshold_(threshold) {}

    /// Feeds one validation loss; true once the plateau has lasted `patience`
    /// consecutive epochs.
    bool update(double val_loss);

private:
    std::size_t patience_;
    double threshold_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t counter_ = 0;
};

/// Replays the tracker over a validation-loss sequence; returns the number
/// of entries consumed when the stop fires, if it fires.
std::optional<std::size_t> early_stop_epoch(std::span<const double> val_losses,
                                            std::size_t patience = 50, double threshold = 0.01);

/// Runs the epoch loop on an already scaled dataset and returns the model
/// with the best validation loss plus the loss/learning-rate history.
/// Aborts with NumericalError (tagged with epoch, batch, lr) on a non-finite
/// loss.
TrainResult train(OperatorModel model, const Dataset& scaled, const SplitIndices& split,
                  const TrainConfig& config);

struct Checkpoint {
    OperatorModel model;
    MinMaxScaler scaler;
    TrainConfig config;
};

void checkpoint_save(const OperatorModel& model, const MinMaxScaler& scaler,
                     const TrainConfig& config, const std::filesystem::path& path);

/// Loads a checkpoint; when `expected_kind` is given, a checkpoint of any
/// other kind is rejected.
Checkpoint checkpoint_load(const std::filesystem::path& path,
                           std::optional<OperatorKind> expected_kind = std::nullopt);

/// CSV columns: epoch, train_loss, val_loss, lr, seconds. Wall time is
/// zeroed when `zero_seconds` is set so deterministic runs serialize
/// identically.
void save_history_csv(const TrainHistory& history, const std::filesystem::path& path,
                      bool zero_seconds);

}  // namespace operon
