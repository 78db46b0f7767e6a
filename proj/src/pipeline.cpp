#include "operon/pipeline.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>

namespace operon {

namespace {

using nlohmann::json;

struct StageTimer {
    const char* name;
    bool verbose;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    StageTimer(const char* stage, bool v) : name(stage), verbose(v) {
        if (verbose) {
            std::printf("[%s] ...\n", name);
            std::fflush(stdout);
        }
    }
    ~StageTimer() {
        if (verbose) {
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                                 .count();
            std::printf("[%s] done in %.1fs\n", name, s);
            std::fflush(stdout);
        }
    }
};

template <typename Fn>
auto stage(const char* name, bool verbose, Fn&& fn) {
    StageTimer timer(name, verbose);
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("stage ") + name + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("stage ") + name + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(std::string("stage ") + name + ": " + e.what());
    }
}

}  // namespace

Dataset generate_motion_dataset(const RunConfig& config, std::uint64_t motions_seed) {
    Dataset data;
    data.grid = config.grid;
    data.motions.resize(config.n_realizations, config.grid.n_steps);
    data.seeds.resize(config.n_realizations);

    MotionSamplingBounds bounds = config.bounds;
    for (std::size_t i = 0; i < config.n_realizations; ++i) {
        const GroundMotionRecord record =
            generate_realization(bounds, config.grid, config.synthesis, motions_seed, i);
        std::copy(record.accel.begin(), record.accel.end(), data.motions.row(i));
        data.seeds[i] = record.seed;
    }
    return data;
}

StructuralModel testbed_from_config(const RunConfig& config) {
    if (config.masses.empty() && config.stiffnesses.empty() && config.n_dof == 10) {
        StructuralModel model = default_testbed(config.lowamp_sensors);
        return model;
    }
    std::vector<double> masses = config.masses.empty() ? std::vector<double>{1.0e3} : config.masses;
    std::vector<double> stiffnesses =
        config.stiffnesses.empty() ? std::vector<double>{2.6334e4} : config.stiffnesses;
    StructuralModel model =
        build_chain_model(config.n_dof, masses, stiffnesses,
                          DampingSpec::modal_pair(0, config.n_dof > 1 ? 1 : 0, config.damping_zeta,
                                                  config.damping_zeta));
    if (config.lowamp_sensors && config.n_dof >= 3) {
        model.sensor_scale[config.n_dof / 4] = 0.05;
        model.sensor_scale[(3 * config.n_dof) / 4] = 0.05;
    }
    return model;
}

void simulate_responses(Dataset& data, const StructuralModel& model, bool verbose) {
    data.responses.assign(data.n_real(), Matrix{});
    GroundMotionRecord record;
    record.grid = data.grid;
    for (std::size_t q = 0; q < data.n_real(); ++q) {
        record.accel.assign(data.motions.row(q), data.motions.row(q) + data.n_time());
        record.seed = data.seeds.empty() ? 0 : data.seeds[q];
        ResponseField field = newmark_integrate(model, record);
        data.responses[q] = std::move(field.accel);
        if (verbose && (q + 1) % 500 == 0) {
            std::printf("  simulated %zu / %zu realizations\n", q + 1, data.n_real());
            std::fflush(stdout);
        }
    }
    data.validate();
}

TrainedKind train_kind(const RunConfig& config, OperatorKind kind, const Dataset& raw,
                       const SplitIndices& split) {
    TrainedKind out;
    out.kind = kind;
    out.scaler = scaler_fit(raw, split.train);
    const Dataset scaled = scaler_apply(out.scaler, raw);

    TrainConfig tc;
    tc.kind = kind;
    tc.batch_size = config.batch_size;
    tc.max_epochs = config.max_epochs;
    tc.lr = config.lr;
    tc.adamw.weight_decay = config.weight_decay;
    tc.patience = config.patience;
    tc.improvement_threshold = config.improvement_threshold;
    tc.shuffle_seed = derive_stream(config.master_seed, "shuffle-" + to_string(kind));
    tc.verbose = config.verbose;

    OperatorModel model =
        make_operator(kind, raw.n_time(), raw.n_sensors(), config.op_sizes,
                      derive_stream(config.master_seed, "init-" + to_string(kind)));
    out.result = train(std::move(model), scaled, split, tc);
    return out;
}

namespace {

json summary_json(const MetricSummary& s) {
    auto stat = [](const SummaryStat& v) {
        return json{{"mean", v.mean}, {"median", v.median}, {"std", v.stddev}};
    };
    return json{{"mae", stat(s.mae)},       {"rmse", stat(s.rmse)},
                {"rrmse_pct", stat(s.rrmse)}, {"r2_pct", stat(s.r2)},
                {"count", s.count},         {"rrmse_flagged", s.rrmse_flagged},
                {"r2_flagged", s.r2_flagged}};
}

}  // namespace

void run_experiment(const RunConfig& config, const ConfigDoc& doc,
                    const std::filesystem::path& out_dir) {
    config.validate();
    std::filesystem::create_directories(out_dir);

    const std::uint64_t motions_seed = derive_stream(config.master_seed, "motions");
    const std::uint64_t split_seed = derive_stream(config.master_seed, "split");

    std::vector<std::string> emitted;
    auto record_file = [&](const std::filesystem::path& p) { emitted.push_back(p.filename()); };

    Dataset data = stage("gen-motions", config.verbose, [&] {
        return generate_motion_dataset(config, motions_seed);
    });

    const StructuralModel model = testbed_from_config(config);
    stage("simulate", config.verbose, [&] {
        simulate_responses(data, model, config.verbose);
        return 0;
    });
    save_dataset(data, out_dir / "dataset.bin");
    record_file("dataset.bin");

    const SplitIndices split = stage("split", config.verbose, [&] {
        return stratified_split(data, config.ratios, config.split_bins, split_seed);
    });
    write_split_json(split, out_dir / "split.json");
    record_file("split.json");

    std::vector<TrainedKind> trained;
    for (OperatorKind kind : config.kinds) {
        const std::string tag = to_string(kind);
        TrainedKind tk = stage(("train-" + tag).c_str(), config.verbose,
                               [&] { return train_kind(config, kind, data, split); });

        TrainConfig ckpt_config;
        ckpt_config.kind = kind;
        ckpt_config.batch_size = config.batch_size;
        ckpt_config.max_epochs = config.max_epochs;
        ckpt_config.lr = config.lr;
        ckpt_config.adamw.weight_decay = config.weight_decay;
        ckpt_config.patience = config.patience;
        ckpt_config.improvement_threshold = config.improvement_threshold;
        ckpt_config.shuffle_seed = derive_stream(config.master_seed, "shuffle-" + tag);
        checkpoint_save(tk.result.model, tk.scaler, ckpt_config, out_dir / ("ckpt_" + tag + ".bin"));
        record_file("ckpt_" + tag + ".bin");
        save_history_csv(tk.result.history, out_dir / ("history_" + tag + ".csv"),
                         config.deterministic);
        record_file("history_" + tag + ".csv");
        trained.push_back(std::move(tk));
    }

    json eval_summary;
    for (TrainedKind& tk : trained) {
        const std::string tag = to_string(tk.kind);
        const MetricsReport report = stage(("eval-" + tag).c_str(), config.verbose, [&] {
            return evaluate_model(tk.result.model, tk.scaler, data, split.test);
        });
        const AggregateTable table = aggregate(report);
        write_metrics_csv(table, out_dir / ("metrics_" + tag + ".csv"));
        record_file("metrics_" + tag + ".csv");
        write_entries_csv(report, out_dir / ("entries_" + tag + ".csv"));
        record_file("entries_" + tag + ".csv");
        write_aggregate_json(table, out_dir / ("aggregates_" + tag + ".json"));
        record_file("aggregates_" + tag + ".json");

        const WorstCase worst = worst_case(report);
        json kind_json;
        kind_json["overall"] = summary_json(table.overall);
        kind_json["worst_case"] = {{"realization", worst.realization_id},
                                   {"mean_rrmse", worst.mean_rrmse}};
        kind_json["epochs"] = tk.result.history.epochs.size();
        kind_json["best_val"] = tk.result.history.best_val;
        kind_json["samples_per_epoch"] =
            tk.kind == OperatorKind::FExD
                ? split.train.size() * data.n_time()
                : split.train.size() * data.n_time() * data.n_sensors();
        eval_summary[tag] = kind_json;
    }
    {
        std::ofstream out(out_dir / "summary.json");
        out << eval_summary.dump(2) << "\n";
        record_file("summary.json");
    }

    if (config.run_fdd) {
        stage("fdd", config.verbose, [&] {
            const TrainedKind* fexd = nullptr;
            for (const TrainedKind& tk : trained)
                if (tk.kind == OperatorKind::FExD) fexd = &tk;
            if (!fexd) throw ConfigError("fdd stage requires a trained fexd model");

            std::vector<Matrix> numerical, predicted;
            for (std::size_t q : split.test) {
                numerical.push_back(data.responses[q]);
                predicted.push_back(
                    predict_field(fexd->result.model, fexd->scaler, data.motions.row_span(q),
                                  data.grid));
            }
            WelchConfig welch = config.welch;
            const SpectralReport ref = cpsd_svd(numerical, data.grid.dt, welch);
            const SpectralReport pred = cpsd_svd(predicted, data.grid.dt, welch);
            write_spectral_csv(ref, out_dir / "fdd_numerical.csv");
            write_spectral_csv(pred, out_dir / "fdd_predicted.csv");
            json fdd;
            fdd["numerical_peaks_hz"] = ref.peak_freqs_hz;
            fdd["predicted_peaks_hz"] = pred.peak_freqs_hz;
            std::ofstream out(out_dir / "fdd_peaks.json");
            out << fdd.dump(2) << "\n";
            return 0;
        });
        record_file("fdd_numerical.csv");
        record_file("fdd_predicted.csv");
        record_file("fdd_peaks.json");
    }

    // manifest last: config hash, seeds, checksums of every emitted file
    json manifest;
    std::ostringstream hash_hex;
    hash_hex << std::hex << fnv1a64(doc.canonical());
    manifest["config_hash"] = hash_hex.str();
    manifest["master_seed"] = config.master_seed;
    manifest["seeds"] = {{"motions", motions_seed}, {"split", split_seed}};
    for (OperatorKind kind : config.kinds) {
        manifest["seeds"]["init-" + to_string(kind)] =
            derive_stream(config.master_seed, "init-" + to_string(kind));
        manifest["seeds"]["shuffle-" + to_string(kind)] =
            derive_stream(config.master_seed, "shuffle-" + to_string(kind));
    }
    manifest["deterministic"] = config.deterministic;
    for (const std::string& name : emitted)
        manifest["files"][name] = file_checksum_hex(out_dir / name);
    std::ofstream out(out_dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

CompareResult compare_kinds(const std::filesystem::path& run_dir) {
    CompareResult result;
    std::ifstream summary_in(run_dir / "summary.json");
    if (!summary_in) throw IoError("compare: missing summary.json in " + run_dir.string());
    json summary = json::parse(summary_in);

    double median_rrmse[3] = {0.0, 0.0, 0.0};
    bool present[3] = {false, false, false};
    for (OperatorKind kind : {OperatorKind::VD, OperatorKind::ExD, OperatorKind::FExD}) {
        const std::string tag = to_string(kind);
        if (!std::filesystem::exists(run_dir / ("ckpt_" + tag + ".bin")))
            throw ConfigError("compare: missing checkpoint for kind '" + tag + "'");
        if (!summary.contains(tag))
            throw ConfigError("compare: summary has no entry for kind '" + tag + "'");
        const json& k = summary[tag];

        KindComparison row;
        row.kind = kind;
        row.overall.mae = {k["overall"]["mae"]["mean"], k["overall"]["mae"]["median"],
                           k["overall"]["mae"]["std"]};
        row.overall.rmse = {k["overall"]["rmse"]["mean"], k["overall"]["rmse"]["median"],
                            k["overall"]["rmse"]["std"]};
        row.overall.rrmse = {k["overall"]["rrmse_pct"]["mean"], k["overall"]["rrmse_pct"]["median"],
                             k["overall"]["rrmse_pct"]["std"]};
        row.overall.r2 = {k["overall"]["r2_pct"]["mean"], k["overall"]["r2_pct"]["median"],
                          k["overall"]["r2_pct"]["std"]};
        row.overall.count = k["overall"]["count"];
        row.samples_per_epoch = k["samples_per_epoch"];
        row.epochs = k["epochs"];

        // median epoch wall time from the history file
        std::ifstream hist(run_dir / ("history_" + tag + ".csv"));
        if (hist) {
            std::string line;
            std::getline(hist, line);  // header
            std::vector<double> secs;
            while (std::getline(hist, line)) {
                const auto last_comma = line.find_last_of(',');
                if (last_comma != std::string::npos)
                    secs.push_back(std::stod(line.substr(last_comma + 1)));
            }
            row.median_epoch_seconds = median(secs);
        }
        median_rrmse[static_cast<int>(kind)] = row.overall.rrmse.median;
        present[static_cast<int>(kind)] = true;
        result.rows.push_back(row);
    }

    result.rrmse_ordering_holds =
        present[0] && present[1] && present[2] &&
        median_rrmse[2] <= median_rrmse[1] && median_rrmse[1] <= median_rrmse[0];
    if (result.rows.size() >= 3 && result.rows[2].samples_per_epoch > 0.0)
        result.pointwise_to_fullfield_ratio =
            result.rows[0].samples_per_epoch / result.rows[2].samples_per_epoch;
    return result;
}

void write_compare_csv(const CompareResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("compare csv: cannot open " + path.string());
    out << "kind,mae_mean,mae_median,rmse_mean,rmse_median,rrmse_mean,rrmse_median,"
           "r2_mean,r2_median,samples_per_epoch,median_epoch_seconds,epochs\n";
    out.precision(10);
    for (const KindComparison& row : result.rows)
        out << to_string(row.kind) << ',' << row.overall.mae.mean << ',' << row.overall.mae.median
            << ',' << row.overall.rmse.mean << ',' << row.overall.rmse.median << ','
            << row.overall.rrmse.mean << ',' << row.overall.rrmse.median << ','
            << row.overall.r2.mean << ',' << row.overall.r2.median << ','
            << row.samples_per_epoch << ',' << row.median_epoch_seconds << ',' << row.epochs
            << "\n";
    out << "# rrmse_ordering_holds = " << (result.rrmse_ordering_holds ? "yes" : "no") << "\n";
    out << "# pointwise_to_fullfield_ratio = " << result.pointwise_to_fullfield_ratio << "\n";
}

void write_split_json(const SplitIndices& split, const std::filesystem::path& path) {
    json doc;
    doc["train"] = split.train;
    doc["val"] = split.val;
    doc["test"] = split.test;
    std::ofstream out(path);
    if (!out) throw IoError("split: cannot open " + path.string() + " for writing");
    out << doc.dump() << "\n";
}

SplitIndices read_split_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("split: cannot open " + path.string());
    json doc = json::parse(in);
    SplitIndices split;
    split.train = doc["train"].get<std::vector<std::size_t>>();
    split.val = doc["val"].get<std::vector<std::size_t>>();
    split.test = doc["test"].get<std::vector<std::size_t>>();
    return split;
}

std::string file_checksum_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checksum: cannot open " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ull;
    char buffer[65536];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
        hash = fnv1a64(buffer, static_cast<std::size_t>(in.gcount()), hash);
        if (!in) break;
    }
    std::ostringstream out;
    out << std::hex << hash;
    return out.str();
}

}  // namespace operon
