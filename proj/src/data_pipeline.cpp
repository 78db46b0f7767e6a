#include "operon/data_pipeline.hpp"

#include "operon/rng.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

namespace operon {

void Dataset::validate() const {
    grid.validate();
    if (motions.cols() != grid.n_steps)
        throw ConfigError("dataset: motion length does not match time grid");
    if (!responses.empty()) {
        if (responses.size() != n_real())
            throw ConfigError("dataset: response count does not match realizations");
        const std::size_t nx = responses.front().cols();
        for (const Matrix& r : responses) {
            if (r.rows() != grid.n_steps || r.cols() != nx)
                throw ConfigError("dataset: inconsistent response dimensions");
            if (!all_finite(r.data())) throw NumericalError("dataset: non-finite response");
        }
    }
    if (!all_finite(motions.data())) throw NumericalError("dataset: non-finite motion");
    if (!seeds.empty() && seeds.size() != n_real())
        throw ConfigError("dataset: seed count does not match realizations");
}

SplitIndices stratified_split(const Dataset& data, const SplitRatios& ratios, std::size_t n_bins,
                              std::uint64_t seed) {
    data.validate();
    if (data.responses.empty()) throw ConfigError("split: dataset has no responses to stratify on");
    if (n_bins < 1) throw ConfigError("split: need at least one bin");
    const std::size_t n = data.n_real();
    if (n < n_bins) throw ConfigError("split: fewer realizations than bins");
    const double rsum = ratios.train + ratios.val + ratios.test;
    if (std::abs(rsum - 1.0) > 1e-9) throw ConfigError("split: ratios must sum to 1");

    // realization summary statistic: mean over all time steps and sensors
    std::vector<double> means(n);
    for (std::size_t q = 0; q < n; ++q) means[q] = mean(data.responses[q].data());

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return means[a] < means[b]; });

    SplitIndices split;
    const double targets[3] = {ratios.train, ratios.val, ratios.test};
    double assigned[3] = {0.0, 0.0, 0.0};
    std::size_t processed = 0;

    for (std::size_t b = 0; b < n_bins; ++b) {
        const std::size_t lo = b * n / n_bins;
        const std::size_t hi = (b + 1) * n / n_bins;
        std::vector<std::size_t> bin(order.begin() + lo, order.begin() + hi);
        Rng rng(derive_stream(seed, b));
        rng.shuffle(bin);

        // quota method against the running ideal keeps global sizes within
        // one of the exact ratios
        processed += bin.size();
        std::size_t quota[3];
        double frac[3];
        std::size_t used = 0;
        for (int s = 0; s < 3; ++s) {
            const double ideal = targets[s] * static_cast<double>(processed) - assigned[s];
            quota[s] = static_cast<std::size_t>(std::max(0.0, std::floor(ideal)));
            frac[s] = ideal - std::floor(ideal);
            used += quota[s];
        }
        while (used < bin.size()) {
            int best = 0;
            for (int s = 1; s < 3; ++s)
                if (frac[s] > frac[best]) best = s;
            quota[best] += 1;
            frac[best] = -1.0;
            ++used;
        }
        for (int s = 0; s < 3; ++s) assigned[s] += static_cast<double>(quota[s]);

        std::size_t cursor = 0;
        for (std::size_t i = 0; i < quota[0]; ++i) split.train.push_back(bin[cursor++]);
        for (std::size_t i = 0; i < quota[1]; ++i) split.val.push_back(bin[cursor++]);
        for (std::size_t i = 0; i < quota[2]; ++i) split.test.push_back(bin[cursor++]);
    }

    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

MinMaxScaler scaler_fit(const Dataset& data, std::span<const std::size_t> train_indices) {
    data.validate();
    if (train_indices.empty()) throw ConfigError("scaler: empty training split");

    MinMaxScaler scaler;
    scaler.input_min = scaler.input_max = data.motions(train_indices[0], 0);
    for (std::size_t q : train_indices) {
        for (double v : data.motions.row_span(q)) {
            scaler.input_min = std::min(scaler.input_min, v);
            scaler.input_max = std::max(scaler.input_max, v);
        }
    }
    scaler.input_degenerate = !(scaler.input_max > scaler.input_min);

    if (!data.responses.empty()) {
        scaler.target_min = scaler.target_max = data.responses[train_indices[0]](0, 0);
        for (std::size_t q : train_indices) {
            for (double v : data.responses[q].data()) {
                scaler.target_min = std::min(scaler.target_min, v);
                scaler.target_max = std::max(scaler.target_max, v);
            }
        }
        scaler.target_degenerate = !(scaler.target_max > scaler.target_min);
    } else {
        scaler.target_degenerate = true;
    }
    return scaler;
}

Dataset scaler_apply(const MinMaxScaler& scaler, const Dataset& data) {
    Dataset out = data;
    for (double& v : out.motions.data()) v = scaler.apply_input(v);
    for (Matrix& r : out.responses)
        for (double& v : r.data()) v = scaler.apply_target(v);
    return out;
}

double normalized_time(const TimeGrid& grid, std::size_t i) {
    return 2.0 * grid.time(i) / grid.duration() - 1.0;
}

double normalized_sensor(std::size_t j, std::size_t n_x) {
    if (n_x <= 1) return 0.0;
    return 2.0 * static_cast<double>(j) / static_cast<double>(n_x - 1) - 1.0;
}

PointwiseStream::PointwiseStream(const Dataset& data, std::vector<std::size_t> realizations)
    : data_(&data), realizations_(std::move(realizations)), n_t_(data.n_time()),
      n_x_(data.n_sensors()) {
    if (n_x_ == 0) throw ConfigError("pointwise stream: dataset has no responses");
}

PointwiseTuple PointwiseStream::at(std::size_t flat) const {
    const std::size_t i = flat % n_t_;
    const std::size_t j = (flat / n_t_) % n_x_;
    const std::size_t slot = flat / (n_t_ * n_x_);
    const std::size_t q = realizations_[slot];
    PointwiseTuple tuple;
    tuple.u = data_->motions.row_span(q);
    tuple.t = normalized_time(data_->grid, i);
    tuple.x = normalized_sensor(j, n_x_);
    tuple.y = data_->responses[q](i, j);
    return tuple;
}

void PointwiseStream::fill_batch(std::span<const std::size_t> ids, Matrix& u, Matrix& coords,
                                 Matrix& targets) const {
    const std::size_t batch = ids.size();
    u.resize(batch, n_t_);
    coords.resize(batch, 2);
    targets.resize(batch, 1);
    for (std::size_t r = 0; r < batch; ++r) {
        const PointwiseTuple tuple = at(ids[r]);
        std::copy(tuple.u.begin(), tuple.u.end(), u.row(r));
        coords(r, 0) = tuple.t;
        coords(r, 1) = tuple.x;
        targets(r, 0) = tuple.y;
    }
}

FullFieldStream::FullFieldStream(const Dataset& data, std::vector<std::size_t> realizations)
    : data_(&data), realizations_(std::move(realizations)), n_t_(data.n_time()),
      n_x_(data.n_sensors()) {
    if (n_x_ == 0) throw ConfigError("full-field stream: dataset has no responses");
}

FullFieldTuple FullFieldStream::at(std::size_t flat) const {
    const std::size_t i = flat % n_t_;
    const std::size_t q = realizations_[flat / n_t_];
    FullFieldTuple tuple;
    tuple.u = data_->motions.row_span(q);
    tuple.t = normalized_time(data_->grid, i);
    tuple.y = data_->responses[q].row_span(i);
    return tuple;
}

void FullFieldStream::fill_batch(std::span<const std::size_t> ids, Matrix& u, Matrix& coords,
                                 Matrix& targets) const {
    const std::size_t batch = ids.size();
    u.resize(batch, n_t_);
    coords.resize(batch, 1);
    targets.resize(batch, n_x_);
    for (std::size_t r = 0; r < batch; ++r) {
        const FullFieldTuple tuple = at(ids[r]);
        std::copy(tuple.u.begin(), tuple.u.end(), u.row(r));
        coords(r, 0) = tuple.t;
        std::copy(tuple.y.begin(), tuple.y.end(), targets.row(r));
    }
}

BatchIterator::BatchIterator(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                             std::uint64_t epoch)
    : order_(count), batch_size_(batch_size) {
    if (batch_size < 1) throw ConfigError("batch iterator: batch size must be positive");
    std::iota(order_.begin(), order_.end(), 0);
    Rng rng(derive_stream(seed, epoch));
    rng.shuffle(order_);
}

std::optional<std::span<const std::size_t>> BatchIterator::next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t take = std::min(batch_size_, order_.size() - cursor_);
    std::span<const std::size_t> view(order_.data() + cursor_, take);
    cursor_ += take;
    return view;
}

std::size_t BatchIterator::n_batches() const {
    return (order_.size() + batch_size_ - 1) / batch_size_;
}

namespace {

constexpr char kDatasetMagic[5] = {'O', 'P', 'R', 'N', '1'};

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw IoError("dataset: truncated file");
    return value;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    data.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("dataset: cannot open " + path.string() + " for writing");

    out.write(kDatasetMagic, sizeof(kDatasetMagic));
    write_raw<std::uint64_t>(out, data.n_real());
    write_raw<std::uint64_t>(out, data.n_time());
    write_raw<std::uint64_t>(out, data.n_sensors());
    write_raw<double>(out, data.grid.dt);
    out.write(reinterpret_cast<const char*>(data.motions.data().data()),
              static_cast<std::streamsize>(data.motions.size() * sizeof(double)));
    for (const Matrix& r : data.responses)
        out.write(reinterpret_cast<const char*>(r.data().data()),
                  static_cast<std::streamsize>(r.size() * sizeof(double)));
    std::vector<std::uint64_t> seeds = data.seeds;
    seeds.resize(data.n_real(), 0);
    out.write(reinterpret_cast<const char*>(seeds.data()),
              static_cast<std::streamsize>(seeds.size() * sizeof(std::uint64_t)));
    if (!out) throw IoError("dataset: write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("dataset: cannot open " + path.string());

    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0)
        throw IoError("dataset: bad magic bytes in " + path.string());

    Dataset data;
    const auto n_u = read_raw<std::uint64_t>(in);
    const auto n_t = read_raw<std::uint64_t>(in);
    const auto n_x = read_raw<std::uint64_t>(in);
    data.grid.dt = read_raw<double>(in);
    data.grid.n_steps = n_t;
    data.motions.resize(n_u, n_t);
    in.read(reinterpret_cast<char*>(data.motions.data().data()),
            static_cast<std::streamsize>(n_u * n_t * sizeof(double)));
    if (!in) throw IoError("dataset: truncated motions block");
    if (n_x > 0) {
        data.responses.assign(n_u, Matrix(n_t, n_x));
        for (Matrix& r : data.responses) {
            in.read(reinterpret_cast<char*>(r.data().data()),
                    static_cast<std::streamsize>(n_t * n_x * sizeof(double)));
            if (!in) throw IoError("dataset: truncated responses block");
        }
    }
    data.seeds.resize(n_u);
    in.read(reinterpret_cast<char*>(data.seeds.data()),
            static_cast<std::streamsize>(n_u * sizeof(std::uint64_t)));
    if (!in) throw IoError("dataset: truncated seeds block");
    data.validate();
    return data;
}

void export_dataset_csv(const Dataset& data, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    {
        std::ofstream out(directory / "motions.csv");
        out << "realization";
        for (std::size_t i = 0; i < data.n_time(); ++i) out << ",t" << i;
        out << "\n";
        out.precision(17);
        for (std::size_t q = 0; q < data.n_real(); ++q) {
            out << q;
            for (double v : data.motions.row_span(q)) out << ',' << v;
            out << "\n";
        }
    }
    if (!data.responses.empty()) {
        std::ofstream out(directory / "responses.csv");
        out << "realization,time_index,sensor,value\n";
        out.precision(17);
        for (std::size_t q = 0; q < data.n_real(); ++q)
            for (std::size_t i = 0; i < data.n_time(); ++i)
                for (std::size_t j = 0; j < data.n_sensors(); ++j)
                    out << q << ',' << i << ',' << j << ',' << data.responses[q](i, j) << "\n";
    }
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ConfigError("ks distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        const double x = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] <= x) ++ia;
        while (ib < b.size() && b[ib] <= x) ++ib;
        const double fa = static_cast<double>(ia) / static_cast<double>(a.size());
        const double fb = static_cast<double>(ib) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

}  // namespace operon
