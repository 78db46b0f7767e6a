#include "operon/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace operon {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train config: batch size must be positive");
    if (!(improvement_threshold > 0.0 && improvement_threshold < 1.0))
        throw ConfigError("train config: improvement threshold must lie in (0,1)");
    if (patience < 1) throw ConfigError("train config: patience must be positive");
    if (lr.cycle_length != 0) lr.validate();
}

double mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw ConfigError("mse: shape mismatch");
    const double* p = pred.data().data();
    const double* t = target.data().data();
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = p[i] - t[i];
        sse += d * d;
    }
    return sse / static_cast<double>(pred.size());
}

double mse_loss(const Matrix& pred, const Matrix& target, Matrix& grad) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw ConfigError("mse: shape mismatch");
    grad.resize(pred.rows(), pred.cols());
    const double* p = pred.data().data();
    const double* t = target.data().data();
    double* g = grad.data().data();
    const double inv = 1.0 / static_cast<double>(pred.size());
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = p[i] - t[i];
        sse += d * d;
        g[i] = 2.0 * d * inv;
    }
    return sse * inv;
}

bool EarlyStopTracker::update(double val_loss) {
    if (!std::isfinite(best_)) {
        best_ = val_loss;
        counter_ = 0;
        return false;
    }
    const double rel = best_ > 0.0 ? (best_ - val_loss) / best_ : 0.0;
    if (rel > threshold_)
        counter_ = 0;
    else
        counter_ += 1;
    best_ = std::min(best_, val_loss);
    return counter_ >= patience_;
}

std::optional<std::size_t> early_stop_epoch(std::span<const double> val_losses,
                                            std::size_t patience, double threshold) {
    if (val_losses.empty()) throw ConfigError("early stop: need at least one validation entry");
    EarlyStopTracker tracker(patience, threshold);
    for (std::size_t i = 0; i < val_losses.size(); ++i)
        if (tracker.update(val_losses[i])) return i + 1;
    return std::nullopt;
}

namespace {

struct FlatModel {
    std::vector<std::span<double>> chunks;
    std::size_t total = 0;
};

FlatModel flat_view(OperatorModel& model) {
    FlatModel flat;
    flat.chunks = parameter_chunks(model);
    for (const auto& c : flat.chunks) flat.total += c.size();
    return flat;
}

template <typename Stream>
double validation_loss(const OperatorModel& model, const Stream& stream, std::size_t chunk_rows) {
    Matrix u, coords, targets;
    std::vector<std::size_t> ids;
    double sse = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < stream.count(); start += chunk_rows) {
        const std::size_t take = std::min(chunk_rows, stream.count() - start);
        ids.resize(take);
        for (std::size_t i = 0; i < take; ++i) ids[i] = start + i;
        stream.fill_batch(ids, u, coords, targets);
        const Matrix pred = operator_forward(model, u, coords);
        const double* p = pred.data().data();
        const double* t = targets.data().data();
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = p[i] - t[i];
            sse += d * d;
        }
        count += pred.size();
    }
    return count > 0 ? sse / static_cast<double>(count) : 0.0;
}

template <typename Stream>
TrainResult train_on_streams(OperatorModel model, const Stream& train_stream,
                             const Stream& val_stream, const TrainConfig& config) {
    using clock = std::chrono::steady_clock;

    FlatModel flat = flat_view(model);
    OptimizerState state(flat.total, config.adamw);
    std::vector<double> grad(flat.total, 0.0);

    LrSchedule schedule = config.lr;
    const std::size_t n_batches =
        (train_stream.count() + config.batch_size - 1) / config.batch_size;
    if (schedule.cycle_length == 0) schedule.cycle_length = std::max<std::size_t>(2, 2 * n_batches);
    schedule.validate();

    TrainResult result;
    result.history.best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_params(flat.total);
    pack_parameters(model, best_params);

    EarlyStopTracker stopper(config.patience, config.improvement_threshold);
    Matrix u, coords, targets, loss_grad;
    OperatorCache cache;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto epoch_start = clock::now();
        BatchIterator batches(train_stream.count(), config.batch_size, config.shuffle_seed, epoch);
        double sse_sum = 0.0;
        std::size_t value_count = 0;
        double lr = schedule.lr_min;
        std::size_t batch_index = 0;

        while (auto ids = batches.next()) {
            train_stream.fill_batch(*ids, u, coords, targets);
            const Matrix pred = operator_forward(model, u, coords, &cache);
            const double batch_loss = mse_loss(pred, targets, loss_grad);
            if (!std::isfinite(batch_loss)) {
                std::ostringstream msg;
                msg << "train: non-finite loss at epoch " << epoch << ", batch " << batch_index
                    << ", lr " << lr;
                throw NumericalError(msg.str());
            }
            sse_sum += batch_loss * static_cast<double>(pred.size());
            value_count += pred.size();

            std::fill(grad.begin(), grad.end(), 0.0);
            operator_backward(model, cache, loss_grad, grad);

            lr = cyclical_lr(state.step, schedule);
            state.step += 1;
            std::size_t offset = 0;
            for (auto& chunk : flat.chunks) {
                adamw_update_range(chunk.data(), grad.data() + offset,
                                   state.first_moment.data() + offset,
                                   state.second_moment.data() + offset, chunk.size(), state.step,
                                   state.config, lr);
                offset += chunk.size();
            }
            ++batch_index;
        }

        EpochStats stats;
        stats.train_loss = value_count ? sse_sum / static_cast<double>(value_count) : 0.0;
        stats.val_loss = validation_loss(model, val_stream, config.batch_size);
        stats.lr_last = lr;
        stats.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
        result.history.epochs.push_back(stats);

        if (stats.val_loss < result.history.best_val) {
            result.history.best_val = stats.val_loss;
            result.history.best_epoch = epoch;
            pack_parameters(model, best_params);
        }
        if (config.verbose) {
            std::printf("    epoch %4zu  train %.6e  val %.6e  lr %.2e  %.2fs\n", epoch,
                        stats.train_loss, stats.val_loss, stats.lr_last, stats.seconds);
            std::fflush(stdout);
        }
        if (stopper.update(stats.val_loss)) break;
    }

    unpack_parameters(model, best_params);
    result.model = std::move(model);
    return result;
}

}  // namespace

TrainResult train(OperatorModel model, const Dataset& scaled, const SplitIndices& split,
                  const TrainConfig& config) {
    config.validate();
    model.validate();
    if (model.kind != config.kind) throw ConfigError("train: model kind does not match config");
    if (scaled.n_sensors() != model.dims.n_x)
        throw ConfigError("train: dataset sensor count does not match model");
    if (scaled.n_time() != model.dims.n_t)
        throw ConfigError("train: dataset time length does not match model");

    if (config.max_epochs == 0) {
        TrainResult result;
        result.model = std::move(model);
        return result;
    }

    if (model.kind == OperatorKind::FExD) {
        FullFieldStream train_stream(scaled, split.train);
        FullFieldStream val_stream(scaled, split.val);
        return train_on_streams(std::move(model), train_stream, val_stream, config);
    }
    PointwiseStream train_stream(scaled, split.train);
    PointwiseStream val_stream(scaled, split.val);
    return train_on_streams(std::move(model), train_stream, val_stream, config);
}

namespace {

constexpr char kCheckpointMagic[5] = {'O', 'P', 'C', 'K', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw IoError("checkpoint: truncated file");
    return value;
}

void write_network_header(std::ofstream& out, const DenseNetwork& net) {
    put<std::uint64_t>(out, net.layers.size());
    for (const auto& layer : net.layers) {
        put<std::uint64_t>(out, layer.fan_in());
        put<std::uint64_t>(out, layer.fan_out());
        put<std::uint8_t>(out, static_cast<std::uint8_t>(layer.activation));
    }
}

DenseNetwork read_network_header(std::ifstream& in) {
    const auto n_layers = get<std::uint64_t>(in);
    if (n_layers == 0 || n_layers > 1024) throw IoError("checkpoint: implausible layer count");
    DenseNetwork net;
    net.layers.resize(n_layers);
    for (auto& layer : net.layers) {
        const auto fan_in = get<std::uint64_t>(in);
        const auto fan_out = get<std::uint64_t>(in);
        const auto act = get<std::uint8_t>(in);
        if (act > 1) throw IoError("checkpoint: unknown activation tag");
        layer.weight.resize(fan_out, fan_in);
        layer.bias.assign(fan_out, 0.0);
        layer.activation = static_cast<Activation>(act);
    }
    return net;
}

}  // namespace

void checkpoint_save(const OperatorModel& model, const MinMaxScaler& scaler,
                     const TrainConfig& config, const std::filesystem::path& path) {
    model.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot open " + path.string() + " for writing");

    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(model.kind));
    put<std::uint64_t>(out, model.dims.n_t);
    put<std::uint64_t>(out, model.dims.latent);
    put<std::uint64_t>(out, model.dims.n_x);
    put<std::uint64_t>(out, model.dims.trunk_depth);
    put<std::uint64_t>(out, model.dims.trunk_width);
    write_network_header(out, model.branch);
    write_network_header(out, model.trunk);

    std::vector<double> params(model.parameter_count());
    pack_parameters(model, params);
    out.write(reinterpret_cast<const char*>(params.data()),
              static_cast<std::streamsize>(params.size() * sizeof(double)));

    put<double>(out, scaler.input_min);
    put<double>(out, scaler.input_max);
    put<double>(out, scaler.target_min);
    put<double>(out, scaler.target_max);
    put<std::uint8_t>(out, scaler.input_degenerate ? 1 : 0);
    put<std::uint8_t>(out, scaler.target_degenerate ? 1 : 0);

    put<std::uint64_t>(out, config.batch_size);
    put<std::uint64_t>(out, config.max_epochs);
    put<double>(out, config.lr.lr_min);
    put<double>(out, config.lr.lr_max);
    put<std::uint64_t>(out, config.lr.cycle_length);
    put<double>(out, config.adamw.weight_decay);
    put<std::uint64_t>(out, config.patience);
    put<double>(out, config.improvement_threshold);
    put<std::uint64_t>(out, config.shuffle_seed);
    if (!out) throw IoError("checkpoint: write failed for " + path.string());
}

Checkpoint checkpoint_load(const std::filesystem::path& path,
                           std::optional<OperatorKind> expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path.string());

    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw IoError("checkpoint: bad magic bytes in " + path.string());
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version");

    Checkpoint ckpt;
    const auto kind_tag = get<std::uint8_t>(in);
    if (kind_tag > 2) throw IoError("checkpoint: unknown operator kind tag");
    ckpt.model.kind = static_cast<OperatorKind>(kind_tag);
    if (expected_kind && *expected_kind != ckpt.model.kind)
        throw ConfigError("checkpoint: holds kind '" + to_string(ckpt.model.kind) +
                          "' but '" + to_string(*expected_kind) + "' was requested");

    ckpt.model.dims.n_t = get<std::uint64_t>(in);
    ckpt.model.dims.latent = get<std::uint64_t>(in);
    ckpt.model.dims.n_x = get<std::uint64_t>(in);
    ckpt.model.dims.trunk_depth = get<std::uint64_t>(in);
    ckpt.model.dims.trunk_width = get<std::uint64_t>(in);
    ckpt.model.branch = read_network_header(in);
    ckpt.model.trunk = read_network_header(in);

    std::vector<double> params(ckpt.model.parameter_count());
    in.read(reinterpret_cast<char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint: truncated parameter block");
    unpack_parameters(ckpt.model, params);

    ckpt.scaler.input_min = get<double>(in);
    ckpt.scaler.input_max = get<double>(in);
    ckpt.scaler.target_min = get<double>(in);
    ckpt.scaler.target_max = get<double>(in);
    ckpt.scaler.input_degenerate = get<std::uint8_t>(in) != 0;
    ckpt.scaler.target_degenerate = get<std::uint8_t>(in) != 0;

    ckpt.config.kind = ckpt.model.kind;
    ckpt.config.batch_size = get<std::uint64_t>(in);
    ckpt.config.max_epochs = get<std::uint64_t>(in);
    ckpt.config.lr.lr_min = get<double>(in);
    ckpt.config.lr.lr_max = get<double>(in);
    ckpt.config.lr.cycle_length = get<std::uint64_t>(in);
    ckpt.config.adamw.weight_decay = get<double>(in);
    ckpt.config.patience = get<std::uint64_t>(in);
    ckpt.config.improvement_threshold = get<double>(in);
    ckpt.config.shuffle_seed = get<std::uint64_t>(in);

    ckpt.model.validate();
    return ckpt;
}

void save_history_csv(const TrainHistory& history, const std::filesystem::path& path,
                      bool zero_seconds) {
    std::ofstream out(path);
    if (!out) throw IoError("history: cannot open " + path.string() + " for writing");
    out << "epoch,train_loss,val_loss,lr,seconds\n";
    out.precision(17);
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const EpochStats& s = history.epochs[e];
        out << e << ',' << s.train_loss << ',' << s.val_loss << ',' << s.lr_last << ','
            << (zero_seconds ? 0.0 : s.seconds) << "\n";
    }
}

}  // namespace operon
