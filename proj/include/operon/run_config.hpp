// Plain-text key/value configuration: dotted keys, one `key = value` pair
// per line, `#` comments. Lists are space-separated. A canonical rendering
// of the parsed document feeds the run manifest hash.
#pragma once

#include "operon/dynamics.hpp"
#include "operon/evaluation.hpp"
#include "operon/ground_motion.hpp"
#include "operon/operators.hpp"
#include "operon/training.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace operon {

class ConfigDoc {
public:
    static ConfigDoc from_file(const std::filesystem::path& path);
    static ConfigDoc from_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;  // empty when absent
    std::vector<std::size_t> get_sizes(const std::string& key) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    /// Sorted `key = value` lines; input to the manifest config hash.
    std::string canonical() const;

private:
    std::map<std::string, std::string> values_;
};

struct RunConfig {
    // ground motions
    std::size_t n_realizations = 3000;
    TimeGrid grid{0.02, 101};
    MotionSamplingBounds bounds{};
    SynthesisOptions synthesis{};

    // testbed; empty story vectors select the tuned 10-DoF default
    std::size_t n_dof = 10;
    std::vector<double> masses;
    std::vector<double> stiffnesses;
    double damping_zeta = 0.02;
    bool lowamp_sensors = false;

    // operators and training
    std::vector<OperatorKind> kinds{OperatorKind::VD, OperatorKind::ExD, OperatorKind::FExD};
    OperatorSizes op_sizes{};
    std::size_t batch_size = 256;
    std::size_t max_epochs = 300;
    LrSchedule lr{1e-4, 1e-3, 0};
    double weight_decay = 1e-8;
    std::size_t patience = 50;
    double improvement_threshold = 0.01;

    // split and evaluation
    std::size_t split_bins = 10;
    SplitRatios ratios{};
    WelchConfig welch{};
    bool run_fdd = false;

    std::uint64_t master_seed = 1;
    bool deterministic = false;
    bool verbose = false;

    void validate() const;
};

/// Builds a RunConfig from a parsed document, applying defaults for absent
/// keys and rejecting inconsistent values.
RunConfig run_config_from_doc(const ConfigDoc& doc);

/// The parsed document is kept alongside for manifest hashing.
struct LoadedRunConfig {
    RunConfig config;
    ConfigDoc doc;
};

LoadedRunConfig load_run_config(const std::filesystem::path& path);

}  // namespace operon
