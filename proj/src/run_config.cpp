#include "operon/run_config.hpp"

#include <fstream>
#include <sstream>

namespace operon {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigDoc ConfigDoc::from_string(const std::string& text) {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " is not a key = value pair");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(line_no));
        doc.values_[key] = value;
    }
    return doc;
}

ConfigDoc ConfigDoc::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_string(buffer.str());
}

std::string ConfigDoc::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double ConfigDoc::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not a number: " + it->second);
    }
}

std::size_t ConfigDoc::get_size(const std::string& key, std::size_t fallback) const {
    const double v = get_double(key, static_cast<double>(fallback));
    if (v < 0.0 || v != std::floor(v))
        throw ConfigError("config: key '" + key + "' must be a nonnegative integer");
    return static_cast<std::size_t>(v);
}

std::uint64_t ConfigDoc::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not an unsigned integer");
    }
}

bool ConfigDoc::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "on") return true;
    if (it->second == "false" || it->second == "0" || it->second == "off") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean");
}

std::vector<double> ConfigDoc::get_doubles(const std::string& key) const {
    const auto it = values_.find(key);
    std::vector<double> out;
    if (it == values_.end()) return out;
    std::istringstream in(it->second);
    double v;
    while (in >> v) out.push_back(v);
    if (!in.eof()) throw ConfigError("config: key '" + key + "' is not a list of numbers");
    return out;
}

std::vector<std::size_t> ConfigDoc::get_sizes(const std::string& key) const {
    std::vector<std::size_t> out;
    for (double v : get_doubles(key)) {
        if (v < 0.0 || v != std::floor(v))
            throw ConfigError("config: key '" + key + "' must list nonnegative integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::string ConfigDoc::canonical() const {
    std::ostringstream out;
    for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
    return out.str();
}

void RunConfig::validate() const {
    grid.validate();
    bounds.validate();
    if (n_realizations < 1) throw ConfigError("run config: need at least one realization");
    if (kinds.empty()) throw ConfigError("run config: no operator kinds selected");
    if (split_bins < 1) throw ConfigError("run config: split bins must be positive");
    if (batch_size < 1) throw ConfigError("run config: batch size must be positive");
}

RunConfig run_config_from_doc(const ConfigDoc& doc) {
    RunConfig cfg;
    cfg.n_realizations = doc.get_size("motions.n", cfg.n_realizations);
    cfg.grid.dt = doc.get_double("grid.dt", cfg.grid.dt);
    const double duration =
        doc.get_double("grid.duration", cfg.grid.dt * static_cast<double>(cfg.grid.n_steps - 1));
    cfg.grid.n_steps = static_cast<std::size_t>(std::llround(duration / cfg.grid.dt)) + 1;

    cfg.bounds.sigma_g_lo = doc.get_double("motions.sigma_g_lo", cfg.bounds.sigma_g_lo);
    cfg.bounds.sigma_g_hi = doc.get_double("motions.sigma_g_hi", cfg.bounds.sigma_g_hi);
    cfg.bounds.zeta_g_lo = doc.get_double("motions.zeta_g_lo", cfg.bounds.zeta_g_lo);
    cfg.bounds.zeta_g_hi = doc.get_double("motions.zeta_g_hi", cfg.bounds.zeta_g_hi);
    cfg.bounds.eps_t_lo = doc.get_double("motions.eps_t_lo", cfg.bounds.eps_t_lo);
    cfg.bounds.eps_t_hi = doc.get_double("motions.eps_t_hi", cfg.bounds.eps_t_hi);
    cfg.bounds.omega_g = doc.get_double("motions.omega_g", cfg.bounds.omega_g);
    cfg.bounds.eta = doc.get_double("motions.eta", cfg.bounds.eta);
    cfg.bounds.t_n = doc.get_double("motions.t_n", cfg.grid.duration());
    cfg.synthesis.n_harmonics = doc.get_size("motions.n_harmonics", cfg.synthesis.n_harmonics);
    cfg.synthesis.omega_max = doc.get_double("motions.omega_max", cfg.synthesis.omega_max);
    cfg.synthesis.apply_envelope = doc.get_bool("motions.envelope", cfg.synthesis.apply_envelope);

    cfg.n_dof = doc.get_size("testbed.n_dof", cfg.n_dof);
    cfg.masses = doc.get_doubles("testbed.masses");
    cfg.stiffnesses = doc.get_doubles("testbed.stiffnesses");
    cfg.damping_zeta = doc.get_double("testbed.damping_zeta", cfg.damping_zeta);
    cfg.lowamp_sensors = doc.get_bool("testbed.lowamp_sensors", cfg.lowamp_sensors);

    const std::string kinds = doc.get_string("train.kinds", "vd exd fexd");
    cfg.kinds.clear();
    std::istringstream kin(kinds);
    std::string tag;
    while (kin >> tag) cfg.kinds.push_back(operator_kind_from_string(tag));

    cfg.op_sizes.branch_depth = doc.get_size("operator.branch_depth", cfg.op_sizes.branch_depth);
    cfg.op_sizes.branch_width = doc.get_size("operator.branch_width", cfg.op_sizes.branch_width);
    cfg.op_sizes.trunk_depth = doc.get_size("operator.trunk_depth", cfg.op_sizes.trunk_depth);
    cfg.op_sizes.trunk_width = doc.get_size("operator.trunk_width", cfg.op_sizes.trunk_width);
    cfg.op_sizes.latent = doc.get_size("operator.latent", cfg.op_sizes.latent);

    cfg.batch_size = doc.get_size("train.batch_size", cfg.batch_size);
    cfg.max_epochs = doc.get_size("train.max_epochs", cfg.max_epochs);
    cfg.lr.lr_min = doc.get_double("train.lr_min", cfg.lr.lr_min);
    cfg.lr.lr_max = doc.get_double("train.lr_max", cfg.lr.lr_max);
    cfg.lr.cycle_length = doc.get_size("train.lr_cycle", cfg.lr.cycle_length);
    cfg.weight_decay = doc.get_double("train.weight_decay", cfg.weight_decay);
    cfg.patience = doc.get_size("train.patience", cfg.patience);
    cfg.improvement_threshold = doc.get_double("train.threshold", cfg.improvement_threshold);

    cfg.split_bins = doc.get_size("split.bins", cfg.split_bins);
    cfg.ratios.train = doc.get_double("split.train", cfg.ratios.train);
    cfg.ratios.val = doc.get_double("split.val", cfg.ratios.val);
    cfg.ratios.test = doc.get_double("split.test", cfg.ratios.test);

    cfg.welch.segment = doc.get_size("fdd.segment", cfg.welch.segment);
    cfg.welch.overlap = doc.get_double("fdd.overlap", cfg.welch.overlap);
    cfg.welch.peak_prominence = doc.get_double("fdd.prominence", cfg.welch.peak_prominence);
    cfg.run_fdd = doc.get_bool("fdd.enabled", cfg.run_fdd);

    cfg.master_seed = doc.get_u64("seed", cfg.master_seed);
    cfg.deterministic = doc.get_bool("deterministic", cfg.deterministic);
    cfg.verbose = doc.get_bool("verbose", cfg.verbose);

    cfg.validate();
    return cfg;
}

LoadedRunConfig load_run_config(const std::filesystem::path& path) {
    LoadedRunConfig loaded{RunConfig{}, ConfigDoc::from_file(path)};
    loaded.config = run_config_from_doc(loaded.doc);
    return loaded;
}

}  // namespace operon
