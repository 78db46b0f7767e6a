// Experiment orchestration: generate -> simulate -> split -> train -> eval
// -> frequency analysis, driven by one RunConfig and a master seed that fans
// out to named sub-seeds per stage. Every output lands in the run directory
// and is recorded in a manifest with its checksum.
#pragma once

#include "operon/run_config.hpp"

#include <filesystem>

namespace operon {

/// Motions for realizations [0, n); stream i derives from the motions seed.
Dataset generate_motion_dataset(const RunConfig& config, std::uint64_t motions_seed);

/// Testbed per config; empty story vectors select the tuned default chain.
StructuralModel testbed_from_config(const RunConfig& config);

/// Integrates every realization through the model and fills responses.
void simulate_responses(Dataset& data, const StructuralModel& model, bool verbose = false);

struct TrainedKind {
    OperatorKind kind = OperatorKind::VD;
    TrainResult result;
    MinMaxScaler scaler;
};

/// Scales data with a train-split scaler and trains one operator kind.
TrainedKind train_kind(const RunConfig& config, OperatorKind kind, const Dataset& raw,
                       const SplitIndices& split);

/// Full pipeline; writes dataset, split, checkpoints, histories, reports,
/// optional FDD spectra, and the manifest into `out_dir`. Stage failures are
/// rethrown with a stage tag; completed outputs are left in place.
void run_experiment(const RunConfig& config, const ConfigDoc& doc,
                    const std::filesystem::path& out_dir);

struct KindComparison {
    OperatorKind kind = OperatorKind::VD;
    MetricSummary overall;
    double samples_per_epoch = 0.0;
    double median_epoch_seconds = 0.0;
    std::size_t epochs = 0;
};

struct CompareResult {
    std::vector<KindComparison> rows;  // vd, exd, fexd order when present
    bool rrmse_ordering_holds = false;  // median RRMSE: fexd <= exd <= vd
    double pointwise_to_fullfield_ratio = 0.0;  // equals N_x
};

/// Side-by-side aggregate table from a finished run directory; missing
/// checkpoints are reported by kind name.
CompareResult compare_kinds(const std::filesystem::path& run_dir);
void write_compare_csv(const CompareResult& result, const std::filesystem::path& path);

void write_split_json(const SplitIndices& split, const std::filesystem::path& path);
SplitIndices read_split_json(const std::filesystem::path& path);

/// FNV-1a checksum of a file's bytes, as hex.
std::string file_checksum_hex(const std::filesystem::path& path);

}  // namespace operon
