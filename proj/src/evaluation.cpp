#include "operon/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace operon {

Metrics compute_metrics(std::span<const double> pred, std::span<const double> target,
                        const MetricsOptions& options) {
    if (pred.size() != target.size() || pred.size() < 2)
        throw ConfigError("metrics: need equal-length series of at least two samples");
    const std::size_t n = pred.size();

    double abs_sum = 0.0, sq_sum = 0.0, target_energy = 0.0, pred_sum = 0.0, target_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred[i] - target[i];
        abs_sum += std::abs(d);
        sq_sum += d * d;
        target_energy += target[i] * target[i];
        pred_sum += pred[i];
        target_sum += target[i];
    }

    Metrics m;
    m.mae = abs_sum / static_cast<double>(n);
    m.rmse = std::sqrt(sq_sum / static_cast<double>(n));

    if (target_energy > 0.0) {
        m.rrmse_pct = std::sqrt(sq_sum / target_energy) * 100.0;
    } else {
        m.rrmse_defined = false;
        m.rrmse_pct = std::numeric_limits<double>::quiet_NaN();
    }

    const double ref_mean =
        (options.textbook_r2 ? target_sum : pred_sum) / static_cast<double>(n);
    double ref_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double base = options.textbook_r2 ? target[i] : pred[i];
        ref_var += (base - ref_mean) * (base - ref_mean);
    }
    if (ref_var > 0.0) {
        m.r2_pct = (1.0 - sq_sum / ref_var) * 100.0;
    } else {
        m.r2_defined = false;
        m.r2_pct = std::numeric_limits<double>::quiet_NaN();
    }
    return m;
}

Matrix predict_field(const OperatorModel& model, const MinMaxScaler& scaler,
                     std::span<const double> motion, const TimeGrid& grid) {
    if (motion.size() != model.dims.n_t)
        throw ConfigError("predict: motion length does not match model N_t");
    const std::size_t n_t = model.dims.n_t;
    const std::size_t n_x = model.dims.n_x;

    std::vector<double> u_scaled(n_t);
    for (std::size_t i = 0; i < n_t; ++i) u_scaled[i] = scaler.apply_input(motion[i]);

    Matrix field(n_t, n_x);
    if (model.kind == OperatorKind::FExD) {
        Matrix u(n_t, n_t), coords(n_t, 1);
        for (std::size_t i = 0; i < n_t; ++i) {
            std::copy(u_scaled.begin(), u_scaled.end(), u.row(i));
            coords(i, 0) = normalized_time(grid, i);
        }
        const Matrix out = operator_forward(model, u, coords);
        for (std::size_t i = 0; i < n_t; ++i)
            for (std::size_t j = 0; j < n_x; ++j) field(i, j) = scaler.invert_target(out(i, j));
        return field;
    }

    const std::size_t rows = n_t * n_x;
    Matrix u(rows, n_t), coords(rows, 2);
    for (std::size_t j = 0; j < n_x; ++j)
        for (std::size_t i = 0; i < n_t; ++i) {
            const std::size_t r = j * n_t + i;
            std::copy(u_scaled.begin(), u_scaled.end(), u.row(r));
            coords(r, 0) = normalized_time(grid, i);
            coords(r, 1) = normalized_sensor(j, n_x);
        }
    const Matrix out = operator_forward(model, u, coords);
    for (std::size_t j = 0; j < n_x; ++j)
        for (std::size_t i = 0; i < n_t; ++i)
            field(i, j) = scaler.invert_target(out(j * n_t + i, 0));
    return field;
}

MetricsReport evaluate_model(const OperatorModel& model, const MinMaxScaler& scaler,
                             const Dataset& raw, std::span<const std::size_t> indices,
                             const MetricsOptions& options) {
    raw.validate();
    if (raw.n_sensors() != model.dims.n_x || raw.n_time() != model.dims.n_t)
        throw ConfigError("evaluate: dataset dimensions do not match model");

    MetricsReport report;
    report.n_realizations = indices.size();
    report.n_sensors = raw.n_sensors();
    report.entries.reserve(indices.size() * raw.n_sensors());

    std::vector<double> pred_col(raw.n_time()), target_col(raw.n_time());
    for (std::size_t slot = 0; slot < indices.size(); ++slot) {
        const std::size_t q = indices[slot];
        const Matrix field = predict_field(model, scaler, raw.motions.row_span(q), raw.grid);
        for (std::size_t j = 0; j < raw.n_sensors(); ++j) {
            for (std::size_t i = 0; i < raw.n_time(); ++i) {
                pred_col[i] = field(i, j);
                target_col[i] = raw.responses[q](i, j);
            }
            MetricsEntry entry;
            entry.realization_slot = slot;
            entry.realization_id = q;
            entry.sensor = j;
            entry.m = compute_metrics(pred_col, target_col, options);
            report.entries.push_back(entry);
        }
    }
    return report;
}

namespace {

SummaryStat summarize(std::vector<double>& values) {
    SummaryStat s;
    if (values.empty()) return s;
    s.mean = mean(values);
    s.stddev = stddev(values);
    s.median = median(values);
    return s;
}

MetricSummary summarize_entries(std::span<const MetricsEntry> entries,
                                std::optional<std::size_t> sensor) {
    std::vector<double> mae, rmse, rrmse, r2;
    MetricSummary summary;
    for (const MetricsEntry& e : entries) {
        if (sensor && e.sensor != *sensor) continue;
        ++summary.count;
        mae.push_back(e.m.mae);
        rmse.push_back(e.m.rmse);
        if (e.m.rrmse_defined)
            rrmse.push_back(e.m.rrmse_pct);
        else
            ++summary.rrmse_flagged;
        if (e.m.r2_defined)
            r2.push_back(e.m.r2_pct);
        else
            ++summary.r2_flagged;
    }
    summary.mae = summarize(mae);
    summary.rmse = summarize(rmse);
    summary.rrmse = summarize(rrmse);
    summary.r2 = summarize(r2);
    return summary;
}

}  // namespace

AggregateTable aggregate(const MetricsReport& report) {
    if (report.entries.empty()) throw ConfigError("aggregate: empty report");
    AggregateTable table;
    table.per_sensor.reserve(report.n_sensors);
    for (std::size_t j = 0; j < report.n_sensors; ++j)
        table.per_sensor.push_back(summarize_entries(report.entries, j));
    table.overall = summarize_entries(report.entries, std::nullopt);
    return table;
}

Histogram histogram(std::span<const double> values, std::size_t bins) {
    if (values.empty()) throw ConfigError("histogram: empty data");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();

    Histogram h;
    h.lo = lo;
    if (hi == lo) {
        h.bin_width = 1.0;
        h.counts.assign(1, values.size());
        return h;
    }
    if (bins == 0) {
        // Freedman-Diaconis
        const auto quantile = [&](double p) {
            const double pos = p * static_cast<double>(sorted.size() - 1);
            const std::size_t k = static_cast<std::size_t>(pos);
            const double frac = pos - static_cast<double>(k);
            return k + 1 < sorted.size() ? sorted[k] * (1.0 - frac) + sorted[k + 1] * frac
                                         : sorted[k];
        };
        const double iqr = quantile(0.75) - quantile(0.25);
        const double width =
            2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
        bins = width > 0.0
                   ? static_cast<std::size_t>(std::ceil((hi - lo) / width))
                   : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(sorted.size()))));
        bins = std::clamp<std::size_t>(bins, 1, 10000);
    }
    h.bin_width = (hi - lo) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double v : values) {
        std::size_t b = static_cast<std::size_t>((v - lo) / h.bin_width);
        if (b >= bins) b = bins - 1;  // hi lands in the last bin
        ++h.counts[b];
    }
    return h;
}

WorstCase worst_case(const MetricsReport& report) {
    if (report.entries.empty()) throw ConfigError("worst case: empty report");
    WorstCase worst;
    double worst_value = -std::numeric_limits<double>::infinity();
    for (std::size_t slot = 0; slot < report.n_realizations; ++slot) {
        double sum = 0.0;
        std::size_t count = 0;
        std::vector<double> per_sensor(report.n_sensors,
                                       std::numeric_limits<double>::quiet_NaN());
        std::size_t id = 0;
        for (const MetricsEntry& e : report.entries) {
            if (e.realization_slot != slot) continue;
            id = e.realization_id;
            per_sensor[e.sensor] = e.m.rrmse_pct;
            if (e.m.rrmse_defined) {
                sum += e.m.rrmse_pct;
                ++count;
            }
        }
        const double mean_rrmse = count ? sum / static_cast<double>(count) : 0.0;
        if (mean_rrmse > worst_value) {
            worst_value = mean_rrmse;
            worst.realization_slot = slot;
            worst.realization_id = id;
            worst.mean_rrmse = mean_rrmse;
            worst.per_sensor_rrmse = std::move(per_sensor);
        }
    }
    return worst;
}

std::vector<ConvergencePoint> convergence_study(std::span<const std::size_t> sizes,
                                                const Dataset& raw, const SplitIndices& split,
                                                const OperatorSizes& op_sizes,
                                                const TrainConfig& base_config,
                                                std::uint64_t init_seed) {
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] < sizes[i - 1]) throw ConfigError("convergence study: sizes must ascend");

    std::vector<ConvergencePoint> curve;
    for (std::size_t size : sizes) {
        if (size > split.train.size())
            throw ConfigError("convergence study: size exceeds available training realizations");
        SplitIndices sub;
        sub.train.assign(split.train.begin(), split.train.begin() + size);
        sub.val = split.val;
        sub.test = split.test;

        const MinMaxScaler scaler = scaler_fit(raw, sub.train);
        const Dataset scaled = scaler_apply(scaler, raw);

        TrainConfig config = base_config;
        config.kind = OperatorKind::FExD;
        OperatorModel model = make_operator(OperatorKind::FExD, raw.n_time(), raw.n_sensors(),
                                            op_sizes, init_seed);
        TrainResult trained = train(std::move(model), scaled, sub, config);

        const MetricsReport report =
            evaluate_model(trained.model, scaler, raw, sub.test, MetricsOptions{});
        std::vector<double> rrmse;
        for (const MetricsEntry& e : report.entries)
            if (e.m.rrmse_defined) rrmse.push_back(e.m.rrmse_pct);

        ConvergencePoint point;
        point.train_size = size;
        point.mean_rrmse = mean(rrmse);
        point.median_rrmse = median(rrmse);
        curve.push_back(point);
    }
    return curve;
}

std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(x.begin(), x.end());
    if (n < 2) return out;

    if ((n & (n - 1)) == 0) {
        // iterative radix-2
        std::size_t j = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i < j) std::swap(out[i], out[j]);
            std::size_t bit = n >> 1;
            while (j & bit) {
                j ^= bit;
                bit >>= 1;
            }
            j |= bit;
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const double angle = -2.0 * kPi / static_cast<double>(len);
            const std::complex<double> wl(std::cos(angle), std::sin(angle));
            for (std::size_t start = 0; start < n; start += len) {
                std::complex<double> w(1.0, 0.0);
                for (std::size_t k = 0; k < len / 2; ++k) {
                    const auto even = out[start + k];
                    const auto odd = out[start + k + len / 2] * w;
                    out[start + k] = even + odd;
                    out[start + k + len / 2] = even - odd;
                    w *= wl;
                }
            }
        }
        return out;
    }

    std::vector<std::complex<double>> result(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double angle = -2.0 * kPi * static_cast<double>(k * i % n) / static_cast<double>(n);
            acc += out[i] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        result[k] = acc;
    }
    return result;
}

AmplitudeSpectrum fft_spectrum(std::span<const double> series, double dt) {
    if (series.size() < 2) throw ConfigError("fft: need at least two samples");
    if (!(dt > 0.0)) throw ConfigError("fft: dt must be positive");
    const std::size_t n = series.size();
    std::vector<std::complex<double>> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = series[i];
    const auto spectrum = dft(x);

    AmplitudeSpectrum out;
    const std::size_t n_freq = n / 2 + 1;
    out.freq_hz.resize(n_freq);
    out.amplitude.resize(n_freq);
    for (std::size_t k = 0; k < n_freq; ++k) {
        out.freq_hz[k] = static_cast<double>(k) / (static_cast<double>(n) * dt);
        const double mag = std::abs(spectrum[k]) / static_cast<double>(n);
        const bool interior = k > 0 && !(n % 2 == 0 && k == n / 2);
        out.amplitude[k] = interior ? 2.0 * mag : mag;
    }
    return out;
}

SpectralReport cpsd_svd(std::span<const Matrix> fields, double dt, const WelchConfig& config) {
    if (fields.empty()) throw ConfigError("cpsd: no fields");
    const std::size_t n_t = fields.front().rows();
    const std::size_t n_x = fields.front().cols();
    if (n_x < 1) throw ConfigError("cpsd: need at least one channel");
    for (const Matrix& f : fields)
        if (f.rows() != n_t || f.cols() != n_x)
            throw ConfigError("cpsd: inconsistent field dimensions");

    std::size_t segment = config.segment;
    if (segment == 0) {
        const double duration = static_cast<double>(n_t - 1) * dt;
        segment = duration < 5.0 ? n_t / 4 : n_t / 8;
        segment = std::max<std::size_t>(segment, 2);
    }
    if (segment > n_t) throw ConfigError("cpsd: segment longer than series");
    if (!(config.overlap >= 0.0 && config.overlap < 1.0))
        throw ConfigError("cpsd: overlap must lie in [0,1)");

    const std::size_t hop =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::llround(static_cast<double>(segment) * (1.0 - config.overlap))));

    // symmetric Hann window
    std::vector<double> window(segment);
    double window_energy = 0.0;
    for (std::size_t i = 0; i < segment; ++i) {
        window[i] = segment == 1
                        ? 1.0
                        : 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                                static_cast<double>(segment - 1)));
        window_energy += window[i] * window[i];
    }
    const double fs = 1.0 / dt;

    const std::size_t n_freq = segment / 2 + 1;
    // accumulate cross spectra: for each frequency an n_x*n_x Hermitian matrix
    std::vector<std::vector<std::complex<double>>> cross(
        n_freq, std::vector<std::complex<double>>(n_x * n_x, {0.0, 0.0}));
    std::size_t n_segments = 0;

    std::vector<std::vector<std::complex<double>>> channel_fft(n_x);
    std::vector<std::complex<double>> buffer(segment);
    for (const Matrix& field : fields) {
        for (std::size_t start = 0; start + segment <= n_t; start += hop) {
            for (std::size_t ch = 0; ch < n_x; ++ch) {
                for (std::size_t i = 0; i < segment; ++i)
                    buffer[i] = field(start + i, ch) * window[i];
                channel_fft[ch] = dft(buffer);
            }
            for (std::size_t k = 0; k < n_freq; ++k) {
                auto& mat = cross[k];
                for (std::size_t a = 0; a < n_x; ++a) {
                    const std::complex<double> xa = channel_fft[a][k];
                    for (std::size_t b = 0; b < n_x; ++b)
                        mat[a * n_x + b] += xa * std::conj(channel_fft[b][k]);
                }
            }
            ++n_segments;
        }
    }
    if (n_segments == 0) throw ConfigError("cpsd: no complete segments");

    SpectralReport report;
    report.freq_hz.resize(n_freq);
    report.singular_values.resize(n_freq, n_x);

    if (config.keep_cross)
        report.cross_psd.assign(n_freq, std::vector<std::complex<double>>(n_x * n_x));

    // Hermitian H maps to the symmetric real embedding [[Re, -Im], [Im, Re]],
    // whose eigenvalues are those of H duplicated.
    Matrix embed(2 * n_x, 2 * n_x);
    for (std::size_t k = 0; k < n_freq; ++k) {
        report.freq_hz[k] = static_cast<double>(k) * fs / static_cast<double>(segment);
        const bool interior = k > 0 && !(segment % 2 == 0 && k == segment / 2);
        const double scale = (interior ? 2.0 : 1.0) /
                             (static_cast<double>(n_segments) * fs * window_energy);
        for (std::size_t a = 0; a < n_x; ++a)
            for (std::size_t b = 0; b < n_x; ++b) {
                const std::complex<double> v = cross[k][a * n_x + b] * scale;
                if (config.keep_cross) report.cross_psd[k][a * n_x + b] = v;
                embed(a, b) = v.real();
                embed(n_x + a, n_x + b) = v.real();
                embed(a, n_x + b) = -v.imag();
                embed(n_x + a, b) = v.imag();
            }
        SymmetricEigen eig = symmetric_eigen(embed);
        // eigenvalues ascend and arrive in duplicated pairs; average each pair
        for (std::size_t s = 0; s < n_x; ++s) {
            const double lo = eig.values[2 * s];
            const double hi = eig.values[2 * s + 1];
            report.singular_values(k, n_x - 1 - s) = 0.5 * (lo + hi);
        }
    }

    // peak picking on the first singular value
    double peak_max = 0.0;
    for (std::size_t k = 0; k < n_freq; ++k)
        peak_max = std::max(peak_max, report.singular_values(k, 0));
    for (std::size_t k = 1; k + 1 < n_freq; ++k) {
        const double v = report.singular_values(k, 0);
        if (v >= config.peak_prominence * peak_max &&
            v > report.singular_values(k - 1, 0) && v > report.singular_values(k + 1, 0))
            report.peak_freqs_hz.push_back(report.freq_hz[k]);
    }
    return report;
}

void write_metrics_csv(const AggregateTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("metrics csv: cannot open " + path.string());
    out << "position,mae_mean,mae_median,mae_std,rmse_mean,rmse_median,rmse_std,"
           "rrmse_mean,rrmse_median,rrmse_std,r2_mean,r2_median,r2_std,"
           "rrmse_flagged,r2_flagged\n";
    out.precision(10);
    auto row = [&](const std::string& label, const MetricSummary& s) {
        out << label << ',' << s.mae.mean << ',' << s.mae.median << ',' << s.mae.stddev << ','
            << s.rmse.mean << ',' << s.rmse.median << ',' << s.rmse.stddev << ',' << s.rrmse.mean
            << ',' << s.rrmse.median << ',' << s.rrmse.stddev << ',' << s.r2.mean << ','
            << s.r2.median << ',' << s.r2.stddev << ',' << s.rrmse_flagged << ',' << s.r2_flagged
            << "\n";
    };
    for (std::size_t j = 0; j < table.per_sensor.size(); ++j)
        row(std::to_string(j), table.per_sensor[j]);
    row("average", table.overall);
}

void write_entries_csv(const MetricsReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("entries csv: cannot open " + path.string());
    out << "realization,sensor,mae,rmse,rrmse_pct,r2_pct,rrmse_defined,r2_defined\n";
    out.precision(10);
    for (const MetricsEntry& e : report.entries)
        out << e.realization_id << ',' << e.sensor << ',' << e.m.mae << ',' << e.m.rmse << ','
            << e.m.rrmse_pct << ',' << e.m.r2_pct << ',' << (e.m.rrmse_defined ? 1 : 0) << ','
            << (e.m.r2_defined ? 1 : 0) << "\n";
}

void write_aggregate_json(const AggregateTable& table, const std::filesystem::path& path) {
    nlohmann::json doc;
    auto stat = [](const SummaryStat& s) {
        return nlohmann::json{{"mean", s.mean}, {"median", s.median}, {"std", s.stddev}};
    };
    auto summary = [&](const MetricSummary& s) {
        return nlohmann::json{{"mae", stat(s.mae)},
                              {"rmse", stat(s.rmse)},
                              {"rrmse_pct", stat(s.rrmse)},
                              {"r2_pct", stat(s.r2)},
                              {"count", s.count},
                              {"rrmse_flagged", s.rrmse_flagged},
                              {"r2_flagged", s.r2_flagged}};
    };
    doc["overall"] = summary(table.overall);
    for (const auto& s : table.per_sensor) doc["per_sensor"].push_back(summary(s));
    std::ofstream out(path);
    if (!out) throw IoError("aggregate json: cannot open " + path.string());
    out << doc.dump(2) << "\n";
}

void write_spectral_csv(const SpectralReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("spectral csv: cannot open " + path.string());
    out << "freq_hz";
    for (std::size_t s = 0; s < report.singular_values.cols(); ++s) out << ",sv" << (s + 1);
    out << "\n";
    out.precision(10);
    for (std::size_t k = 0; k < report.freq_hz.size(); ++k) {
        out << report.freq_hz[k];
        for (std::size_t s = 0; s < report.singular_values.cols(); ++s)
            out << ',' << report.singular_values(k, s);
        out << "\n";
    }
}

void write_convergence_csv(std::span<const ConvergencePoint> points,
                           const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("convergence csv: cannot open " + path.string());
    out << "train_size,mean_rrmse,median_rrmse\n";
    out.precision(10);
    for (const auto& p : points)
        out << p.train_size << ',' << p.mean_rrmse << ',' << p.median_rrmse << "\n";
}

}  // namespace operon
