// operon: stochastic ground motions -> N-DoF response simulation -> operator
// surrogate training (vd / exd / fexd) -> error metrics and frequency-domain
// evaluation, as a library CLI. Subcommands mirror the pipeline stages; `run`
// executes all of them from one config file.
#include "operon/evaluation.hpp"
#include "operon/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace operon;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

RunConfig config_or_default(const std::string& path, std::uint64_t seed_override,
                            bool deterministic, ConfigDoc* doc_out = nullptr) {
    ConfigDoc doc = path.empty() ? ConfigDoc{} : ConfigDoc::from_file(path);
    if (seed_override != 0) doc.set("seed", std::to_string(seed_override));
    if (deterministic) doc.set("deterministic", "true");
    if (doc_out) *doc_out = doc;
    return run_config_from_doc(doc);
}

int cmd_gen_motions(std::size_t n, double dt, double duration, std::uint64_t seed,
                    const std::string& out, std::size_t n_harmonics, bool stationary) {
    RunConfig config;
    config.n_realizations = n;
    config.grid.dt = dt;
    config.grid.n_steps = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
    config.bounds.t_n = duration;
    config.synthesis.n_harmonics = n_harmonics;
    config.synthesis.apply_envelope = !stationary;
    config.master_seed = seed;
    config.validate();

    const Dataset data = generate_motion_dataset(config, derive_stream(seed, "motions"));
    save_dataset(data, out);
    std::printf("wrote %zu motions (%zu steps @ %.3fs) to %s\n", data.n_real(), data.n_time(), dt,
                out.c_str());
    return kExitOk;
}

int cmd_simulate(const std::string& model_cfg, const std::string& motions,
                 const std::string& out) {
    const RunConfig config = config_or_default(model_cfg, 0, false);
    Dataset data = load_dataset(motions);
    const StructuralModel model = testbed_from_config(config);
    simulate_responses(data, model, true);
    save_dataset(data, out);
    std::printf("simulated %zu realizations on %zu-DoF chain (%zu sensors) -> %s\n", data.n_real(),
                model.n_dof(), model.n_sensors(), out.c_str());
    return kExitOk;
}

int cmd_split(const std::string& data_path, std::size_t bins, std::uint64_t seed,
              const std::string& out) {
    const Dataset data = load_dataset(data_path);
    const SplitIndices split = stratified_split(data, SplitRatios{}, bins, seed);
    write_split_json(split, out);
    std::printf("split %zu realizations into %zu/%zu/%zu -> %s\n", data.n_real(),
                split.train.size(), split.val.size(), split.test.size(), out.c_str());
    return kExitOk;
}

int cmd_train(const std::string& kind_tag, const std::string& data_path,
              const std::string& split_path, const std::string& config_path,
              const std::string& out, const std::string& history_path, std::uint64_t seed,
              bool deterministic) {
    const OperatorKind kind = operator_kind_from_string(kind_tag);
    RunConfig config = config_or_default(config_path, seed, deterministic);
    config.verbose = true;

    const Dataset data = load_dataset(data_path);
    const SplitIndices split =
        split_path.empty()
            ? stratified_split(data, config.ratios, config.split_bins,
                               derive_stream(config.master_seed, "split"))
            : read_split_json(split_path);

    TrainedKind trained = train_kind(config, kind, data, split);

    TrainConfig tc;
    tc.kind = kind;
    tc.batch_size = config.batch_size;
    tc.max_epochs = config.max_epochs;
    tc.lr = config.lr;
    tc.adamw.weight_decay = config.weight_decay;
    tc.patience = config.patience;
    tc.improvement_threshold = config.improvement_threshold;
    tc.shuffle_seed = derive_stream(config.master_seed, "shuffle-" + kind_tag);
    checkpoint_save(trained.result.model, trained.scaler, tc, out);
    if (!history_path.empty())
        save_history_csv(trained.result.history, history_path, config.deterministic);
    std::printf("trained %s for %zu epochs, best val %.6e -> %s\n", kind_tag.c_str(),
                trained.result.history.epochs.size(), trained.result.history.best_val,
                out.c_str());
    return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& split_path, const std::string& report_dir) {
    const Checkpoint ckpt = checkpoint_load(ckpt_path);
    const Dataset data = load_dataset(data_path);
    std::vector<std::size_t> indices;
    if (split_path.empty()) {
        indices.resize(data.n_real());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    } else {
        indices = read_split_json(split_path).test;
    }

    const MetricsReport report = evaluate_model(ckpt.model, ckpt.scaler, data, indices);
    const AggregateTable table = aggregate(report);
    fs::create_directories(report_dir);
    const std::string tag = to_string(ckpt.model.kind);
    write_metrics_csv(table, fs::path(report_dir) / ("metrics_" + tag + ".csv"));
    write_entries_csv(report, fs::path(report_dir) / ("entries_" + tag + ".csv"));
    write_aggregate_json(table, fs::path(report_dir) / ("aggregates_" + tag + ".json"));

    const WorstCase worst = worst_case(report);
    std::printf("%s on %zu test realizations: median RRMSE %.2f%%, mean R2 %.2f%% "
                "(worst case: realization %zu at %.2f%%)\n",
                tag.c_str(), report.n_realizations, table.overall.rrmse.median,
                table.overall.r2.mean, worst.realization_id, worst.mean_rrmse);
    return kExitOk;
}

int cmd_fdd(const std::string& data_path, const std::string& ckpt_path, const std::string& out_dir,
            std::size_t segment, double overlap, double prominence) {
    const Dataset data = load_dataset(data_path);
    if (data.n_sensors() == 0) throw ConfigError("fdd: dataset has no responses");

    std::vector<Matrix> fields;
    if (ckpt_path.empty()) {
        fields = data.responses;
    } else {
        const Checkpoint ckpt = checkpoint_load(ckpt_path);
        for (std::size_t q = 0; q < data.n_real(); ++q)
            fields.push_back(
                predict_field(ckpt.model, ckpt.scaler, data.motions.row_span(q), data.grid));
    }

    WelchConfig welch;
    welch.segment = segment;
    welch.overlap = overlap;
    welch.peak_prominence = prominence;
    const SpectralReport report = cpsd_svd(fields, data.grid.dt, welch);

    fs::create_directories(out_dir);
    const std::string name = ckpt_path.empty() ? "fdd_numerical.csv" : "fdd_predicted.csv";
    write_spectral_csv(report, fs::path(out_dir) / name);
    nlohmann::json peaks;
    peaks["peaks_hz"] = report.peak_freqs_hz;
    std::ofstream out(fs::path(out_dir) / "fdd_peaks.json");
    out << peaks.dump(2) << "\n";

    std::printf("fdd peaks (Hz):");
    for (double f : report.peak_freqs_hz) std::printf(" %.4f", f);
    std::printf("\n");
    return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
            bool deterministic) {
    ConfigDoc doc;
    RunConfig config = config_or_default(config_path, seed, deterministic, &doc);
    config.verbose = true;
    run_experiment(config, doc, out_dir);
    std::printf("run complete; manifest at %s\n", (fs::path(out_dir) / "manifest.json").c_str());
    return kExitOk;
}

int cmd_export_csv(const std::string& data_path, const std::string& out_dir) {
    const Dataset data = load_dataset(data_path);
    export_dataset_csv(data, out_dir);
    std::printf("exported %zu realizations to %s\n", data.n_real(), out_dir.c_str());
    return kExitOk;
}

int cmd_compare(const std::string& run_dir, const std::string& out_csv) {
    const CompareResult result = compare_kinds(run_dir);
    if (!out_csv.empty()) write_compare_csv(result, out_csv);
    std::printf("kind   rrmse_med   r2_med   samples/epoch   s/epoch\n");
    for (const KindComparison& row : result.rows)
        std::printf("%-5s  %9.3f  %7.2f  %13.0f  %8.3f\n", to_string(row.kind).c_str(),
                    row.overall.rrmse.median, row.overall.r2.median, row.samples_per_epoch,
                    row.median_epoch_seconds);
    std::printf("median RRMSE ordering fexd <= exd <= vd: %s\n",
                result.rrmse_ordering_holds ? "yes" : "no");
    std::printf("pointwise/fullfield samples-per-epoch ratio: %.1f\n",
                result.pointwise_to_fullfield_ratio);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"operon: operator-learning surrogates for stochastic structural dynamics"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;  // 0 keeps the config/default seed
    bool deterministic = false;
    std::size_t threads = 1;
    app.add_option("--seed", seed, "master seed override (0 keeps config value)");
    app.add_flag("--deterministic", deterministic,
                 "bit-reproducible outputs (zeroes wall-time columns)");
    app.add_option("--threads", threads,
                   "accepted for interface compatibility; execution is single-threaded");

    // gen-motions
    auto* gen = app.add_subcommand("gen-motions", "synthesize stochastic ground motions");
    std::size_t gen_n = 100;
    double gen_dt = 0.02, gen_duration = 2.0;
    std::uint64_t gen_seed = 1;
    std::string gen_out = "motions.bin";
    std::size_t gen_harmonics = 512;
    bool gen_stationary = false;
    gen->add_option("--n", gen_n, "number of realizations")->required();
    gen->add_option("--dt", gen_dt, "time step [s]");
    gen->add_option("--duration", gen_duration, "record duration [s]");
    gen->add_option("--seed", gen_seed, "master seed")->required();
    gen->add_option("--out", gen_out, "output dataset path")->required();
    gen->add_option("--n-harmonics", gen_harmonics, "superposition harmonic count");
    gen->add_flag("--stationary", gen_stationary, "disable the strong-motion envelope");

    // simulate
    auto* sim = app.add_subcommand("simulate", "integrate motions through the testbed");
    std::string sim_model, sim_motions, sim_out = "dataset.bin";
    sim->add_option("--model", sim_model, "testbed config file (empty = default 10-DoF chain)");
    sim->add_option("--motions", sim_motions, "input motions dataset")->required();
    sim->add_option("--out", sim_out, "output dataset path")->required();

    // split
    auto* spl = app.add_subcommand("split", "stratified train/val/test split");
    std::string spl_data, spl_out = "split.json";
    std::size_t spl_bins = 10;
    std::uint64_t spl_seed = 1;
    spl->add_option("--data", spl_data, "dataset path")->required();
    spl->add_option("--bins", spl_bins, "quantile bin count");
    spl->add_option("--seed", spl_seed, "split seed");
    spl->add_option("--out", spl_out, "output split json");

    // train
    auto* trn = app.add_subcommand("train", "train one operator kind");
    std::string trn_kind, trn_data, trn_split, trn_config, trn_out = "ckpt.bin", trn_history;
    trn->add_option("--kind", trn_kind, "vd | exd | fexd")->required();
    trn->add_option("--data", trn_data, "dataset path")->required();
    trn->add_option("--split", trn_split, "split json (empty = derive from config seed)");
    trn->add_option("--config", trn_config, "run config file");
    trn->add_option("--out", trn_out, "checkpoint output path")->required();
    trn->add_option("--history", trn_history, "training history csv path");

    // eval
    auto* evl = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string evl_ckpt, evl_data, evl_split, evl_report = "report";
    evl->add_option("--ckpt", evl_ckpt, "checkpoint path")->required();
    evl->add_option("--data", evl_data, "dataset path")->required();
    evl->add_option("--split", evl_split, "split json (empty = evaluate all realizations)");
    evl->add_option("--report", evl_report, "report output directory");

    // fdd
    auto* fdd = app.add_subcommand("fdd", "frequency domain decomposition");
    std::string fdd_data, fdd_ckpt, fdd_out = "fdd";
    std::size_t fdd_segment = 0;
    double fdd_overlap = 0.5, fdd_prominence = 0.01;
    fdd->add_option("--data", fdd_data, "dataset with responses (numerical input)")->required();
    fdd->add_option("--ckpt", fdd_ckpt, "optional checkpoint; FDD then runs on its predictions");
    fdd->add_option("--out", fdd_out, "output directory");
    fdd->add_option("--segment", fdd_segment, "Welch segment length (0 = duration default)");
    fdd->add_option("--overlap", fdd_overlap, "Welch overlap fraction");
    fdd->add_option("--prominence", fdd_prominence, "peak prominence fraction");

    // run
    auto* run = app.add_subcommand("run", "full experiment from one config");
    std::string run_config_path, run_out = "run";
    run->add_option("--config", run_config_path, "run config file (empty = defaults)");
    run->add_option("--out", run_out, "output directory")->required();

    // compare
    auto* cmp = app.add_subcommand("compare", "side-by-side table for a finished run");
    std::string cmp_run, cmp_out;
    cmp->add_option("--run", cmp_run, "run directory")->required();
    cmp->add_option("--out", cmp_out, "comparison csv path");

    // export-csv
    auto* exp = app.add_subcommand("export-csv", "dump a dataset as CSV for inspection");
    std::string exp_data, exp_out = "csv";
    exp->add_option("--data", exp_data, "dataset path")->required();
    exp->add_option("--out", exp_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_motions(gen_n, gen_dt, gen_duration, gen_seed, gen_out, gen_harmonics,
                                   gen_stationary);
        if (sim->parsed()) return cmd_simulate(sim_model, sim_motions, sim_out);
        if (spl->parsed()) return cmd_split(spl_data, spl_bins, spl_seed, spl_out);
        if (trn->parsed())
            return cmd_train(trn_kind, trn_data, trn_split, trn_config, trn_out, trn_history,
                             seed, deterministic);
        if (evl->parsed()) return cmd_eval(evl_ckpt, evl_data, evl_split, evl_report);
        if (fdd->parsed())
            return cmd_fdd(fdd_data, fdd_ckpt, fdd_out, fdd_segment, fdd_overlap, fdd_prominence);
        if (run->parsed()) return cmd_run(run_config_path, run_out, seed, deterministic);
        if (cmp->parsed()) return cmd_compare(cmp_run, cmp_out);
        if (exp->parsed()) return cmd_export_csv(exp_data, exp_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
