#include "operon/evaluation.hpp"

#include "oracle_helpers.hpp"
#include "operon/dynamics.hpp"

#include <doctest.h>

using namespace operon;

TEST_CASE("metrics hand arithmetic") {
    SUBCASE("perfect prediction") {
        const std::vector<double> y{1.0, -2.0, 3.0};
        const Metrics m = compute_metrics(y, y);
        CHECK(m.mae == 0.0);
        CHECK(m.rmse == 0.0);
        CHECK(m.rrmse_pct == 0.0);
        CHECK(m.r2_pct == doctest::Approx(100.0));
        CHECK(m.rrmse_defined);
        CHECK(m.r2_defined);
    }
    SUBCASE("zero prediction of [3, 4]") {
        const std::vector<double> y{3.0, 4.0}, yhat{0.0, 0.0};
        const Metrics m = compute_metrics(yhat, y);
        CHECK(m.mae == doctest::Approx(3.5));
        CHECK(m.rmse == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
        CHECK(m.rrmse_pct == doctest::Approx(100.0).epsilon(1e-12));
        CHECK(!m.r2_defined);  // zero prediction variance
    }
    SUBCASE("zero-energy target flags rrmse") {
        const std::vector<double> y{0.0, 0.0, 0.0}, yhat{0.1, -0.2, 0.0};
        const Metrics m = compute_metrics(yhat, y);
        CHECK(!m.rrmse_defined);
        CHECK(m.mae > 0.0);
    }
    SUBCASE("r2 uses prediction deviations unless the textbook flag is set") {
        const std::vector<double> y{1.0, 2.0, 4.0, 0.5};
        const std::vector<double> yhat{1.1, 1.9, 3.7, 0.9};
        const Metrics printed = compute_metrics(yhat, y);
        MetricsOptions textbook;
        textbook.textbook_r2 = true;
        const Metrics conventional = compute_metrics(yhat, y, textbook);

        double sq = 0.0, pred_mean = 0.0, target_mean = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            sq += (yhat[i] - y[i]) * (yhat[i] - y[i]);
            pred_mean += yhat[i] / 4.0;
            target_mean += y[i] / 4.0;
        }
        double pred_var = 0.0, target_var = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            pred_var += (yhat[i] - pred_mean) * (yhat[i] - pred_mean);
            target_var += (y[i] - target_mean) * (y[i] - target_mean);
        }
        CHECK(printed.r2_pct == doctest::Approx(100.0 * (1.0 - sq / pred_var)).epsilon(1e-12));
        CHECK(conventional.r2_pct ==
              doctest::Approx(100.0 * (1.0 - sq / target_var)).epsilon(1e-12));
    }
}

TEST_CASE("metric laws on fuzzed data") {
    Rng rng(2026);
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<double> y(8), yhat(8);
        for (std::size_t i = 0; i < 8; ++i) {
            y[i] = rng.uniform(-5.0, 5.0);
            yhat[i] = rng.uniform(-5.0, 5.0);
        }
        const Metrics m = compute_metrics(yhat, y);
        CHECK(m.mae <= m.rmse + 1e-15);
        if (m.rrmse_defined) CHECK(m.rrmse_pct >= 0.0);

        // rrmse is invariant under joint scaling
        const double c = rng.uniform(0.5, 3.0) * (trial % 2 == 0 ? 1.0 : -1.0);
        std::vector<double> ys(8), yhs(8);
        for (std::size_t i = 0; i < 8; ++i) {
            ys[i] = c * y[i];
            yhs[i] = c * yhat[i];
        }
        const Metrics ms = compute_metrics(yhs, ys);
        if (m.rrmse_defined)
            CHECK(ms.rrmse_pct == doctest::Approx(m.rrmse_pct).epsilon(1e-12));
    }

    // r2 equals 100 iff prediction matches exactly (nondegenerate variance)
    std::vector<double> y{0.3, -0.7, 1.9, 0.2};
    const Metrics exact = compute_metrics(y, y);
    CHECK(exact.r2_pct == doctest::Approx(100.0));
    std::vector<double> off = y;
    off[2] += 1e-6;
    const Metrics perturbed = compute_metrics(off, y);
    CHECK(perturbed.r2_pct < 100.0);
}

TEST_CASE("aggregate matches a streaming-statistics oracle") {
    Rng rng(31);
    MetricsReport report;
    report.n_realizations = 600;
    report.n_sensors = 4;
    oracle::Streaming mae_stream;
    std::vector<double> all_mae;
    for (std::size_t q = 0; q < 600; ++q)
        for (std::size_t j = 0; j < 4; ++j) {
            MetricsEntry e;
            e.realization_slot = q;
            e.realization_id = q;
            e.sensor = j;
            e.m.mae = rng.uniform(0.0, 1.0);
            e.m.rmse = e.m.mae * rng.uniform(1.0, 1.5);
            e.m.rrmse_pct = rng.uniform(1.0, 80.0);
            e.m.r2_pct = rng.uniform(50.0, 100.0);
            report.entries.push_back(e);
            mae_stream.push(e.m.mae);
            all_mae.push_back(e.m.mae);
        }
    const AggregateTable table = aggregate(report);
    CHECK(table.overall.count == 2400);
    CHECK(table.overall.mae.mean == doctest::Approx(mae_stream.mean).epsilon(1e-10));
    CHECK(table.overall.mae.stddev == doctest::Approx(mae_stream.stddev()).epsilon(1e-10));
    std::sort(all_mae.begin(), all_mae.end());
    CHECK(table.overall.mae.median ==
          doctest::Approx(0.5 * (all_mae[1199] + all_mae[1200])).epsilon(1e-12));

    SUBCASE("single entry and symmetric pair") {
        MetricsReport tiny;
        tiny.n_realizations = 1;
        tiny.n_sensors = 1;
        MetricsEntry e;
        e.m.mae = 0.4;
        e.m.rmse = 0.5;
        e.m.rrmse_pct = 10.0;
        e.m.r2_pct = 95.0;
        tiny.entries.push_back(e);
        const AggregateTable t1 = aggregate(tiny);
        CHECK(t1.overall.mae.mean == 0.4);
        CHECK(t1.overall.mae.median == 0.4);
        CHECK(t1.overall.mae.stddev == 0.0);

        MetricsEntry e2 = e;
        e2.sensor = 0;
        e2.m.mae = 0.6;
        tiny.entries.push_back(e2);
        tiny.n_realizations = 2;
        const AggregateTable t2 = aggregate(tiny);
        CHECK(t2.overall.mae.mean == doctest::Approx(0.5));
        CHECK(t2.overall.mae.median == doctest::Approx(0.5));
    }
}

TEST_CASE("histogram shapes") {
    SUBCASE("constant data occupies one bin") {
        const std::vector<double> v(37, 1.25);
        const Histogram h = histogram(v);
        REQUIRE(h.counts.size() == 1);
        CHECK(h.counts[0] == 37);
    }
    SUBCASE("counts always sum to n") {
        Rng rng(41);
        std::vector<double> v(1000);
        for (double& x : v) x = rng.uniform(-3.0, 7.0);
        const Histogram h = histogram(v);
        std::size_t total = 0;
        for (std::size_t c : h.counts) total += c;
        CHECK(total == v.size());
    }
    SUBCASE("bimodal mixture shows a dip between the modes") {
        Rng rng(43);
        std::vector<double> v;
        for (int i = 0; i < 500; ++i) v.push_back(0.0 + rng.uniform(-0.5, 0.5));
        for (int i = 0; i < 500; ++i) v.push_back(10.0 + rng.uniform(-0.5, 0.5));
        const Histogram h = histogram(v, 20);
        const std::size_t third = h.counts.size() / 3;
        std::size_t low_peak = 0, mid_valley = v.size(), high_peak = 0;
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            if (b < third) low_peak = std::max(low_peak, h.counts[b]);
            else if (b < 2 * third) mid_valley = std::min(mid_valley, h.counts[b]);
            else high_peak = std::max(high_peak, h.counts[b]);
        }
        CHECK(mid_valley == 0);
        CHECK(low_peak > 50);
        CHECK(high_peak > 50);
    }
}

TEST_CASE("worst case picks the largest mean rrmse") {
    MetricsReport report;
    report.n_realizations = 5;
    report.n_sensors = 2;
    for (std::size_t q = 0; q < 5; ++q)
        for (std::size_t j = 0; j < 2; ++j) {
            MetricsEntry e;
            e.realization_slot = q;
            e.realization_id = 100 + q;
            e.sensor = j;
            e.m.rrmse_pct = (q == 3) ? 80.0 : 10.0;  // inflated realization
            report.entries.push_back(e);
        }
    const WorstCase worst = worst_case(report);
    CHECK(worst.realization_slot == 3);
    CHECK(worst.realization_id == 103);
    CHECK(worst.mean_rrmse == doctest::Approx(80.0));
    REQUIRE(worst.per_sensor_rrmse.size() == 2);
    CHECK(worst.per_sensor_rrmse[0] == 80.0);

    SUBCASE("single realization is its own worst case") {
        MetricsReport single;
        single.n_realizations = 1;
        single.n_sensors = 1;
        MetricsEntry e;
        e.realization_id = 42;
        e.m.rrmse_pct = 5.0;
        single.entries.push_back(e);
        CHECK(worst_case(single).realization_id == 42);
    }
    SUBCASE("ties break toward the lowest slot") {
        for (auto& e : report.entries) e.m.rrmse_pct = 7.0;
        CHECK(worst_case(report).realization_slot == 0);
    }
}

TEST_CASE("fft spectrum") {
    SUBCASE("pure cosine at a bin frequency dominates that bin") {
        const double dt = 0.01;
        const std::size_t n = 200;
        std::vector<double> x(n);
        const double f0 = 5.0;  // bin 10 of 1/(200*0.01) = 0.5 Hz resolution
        for (std::size_t i = 0; i < n; ++i)
            x[i] = 2.3 * std::cos(2.0 * kPi * f0 * dt * static_cast<double>(i));
        const AmplitudeSpectrum spec = fft_spectrum(x, dt);
        std::size_t argmax = 0;
        for (std::size_t k = 1; k < spec.amplitude.size(); ++k)
            if (spec.amplitude[k] > spec.amplitude[argmax]) argmax = k;
        CHECK(spec.freq_hz[argmax] == doctest::Approx(5.0));
        CHECK(spec.amplitude[argmax] == doctest::Approx(2.3).epsilon(1e-10));
        CHECK(spec.freq_hz[1] - spec.freq_hz[0] == doctest::Approx(0.5));
    }
    SUBCASE("zero series gives a zero spectrum") {
        const std::vector<double> x(64, 0.0);
        const AmplitudeSpectrum spec = fft_spectrum(x, 0.02);
        for (double a : spec.amplitude) CHECK(a == 0.0);
    }
    SUBCASE("parseval identity") {
        Rng rng(47);
        for (std::size_t n : {128ul, 101ul}) {  // radix-2 and direct paths
            std::vector<std::complex<double>> x(n);
            double time_energy = 0.0;
            for (auto& v : x) {
                v = rng.uniform(-1.0, 1.0);
                time_energy += std::norm(v);
            }
            const auto spectrum = dft(x);
            double freq_energy = 0.0;
            for (const auto& v : spectrum) freq_energy += std::norm(v);
            CHECK(freq_energy / static_cast<double>(n) ==
                  doctest::Approx(time_energy).epsilon(1e-8));
        }
    }
}

TEST_CASE("cross-psd svd structure") {
    const double dt = 0.02;
    const std::size_t n_t = 512;
    Rng rng(53);

    SUBCASE("identical channels form a rank-one matrix") {
        Matrix field(n_t, 3);
        for (std::size_t i = 0; i < n_t; ++i) {
            const double s = rng.uniform(-1.0, 1.0);
            for (std::size_t j = 0; j < 3; ++j) field(i, j) = s;
        }
        Matrix single(n_t, 1);
        for (std::size_t i = 0; i < n_t; ++i) single(i, 0) = field(i, 0);

        WelchConfig welch;
        welch.segment = 128;
        const SpectralReport multi = cpsd_svd(std::vector<Matrix>{field}, dt, welch);
        const SpectralReport solo = cpsd_svd(std::vector<Matrix>{single}, dt, welch);
        for (std::size_t k = 0; k < multi.freq_hz.size(); ++k) {
            CHECK(multi.singular_values(k, 0) ==
                  doctest::Approx(3.0 * solo.singular_values(k, 0)).epsilon(1e-9));
            CHECK(std::abs(multi.singular_values(k, 1)) <=
                  1e-10 * std::max(multi.singular_values(k, 0), 1e-30));
        }
    }

    SUBCASE("shared sinusoid peaks at its bin and svs are ordered") {
        const double f0 = 3.125;  // exact bin for segment 256 at dt 0.02
        Matrix field(n_t, 4);
        for (std::size_t i = 0; i < n_t; ++i) {
            const double t = dt * static_cast<double>(i);
            const double s = std::sin(2.0 * kPi * f0 * t);
            for (std::size_t j = 0; j < 4; ++j)
                field(i, j) = (0.5 + 0.25 * j) * s + 0.01 * rng.uniform(-1.0, 1.0);
        }
        WelchConfig welch;
        welch.segment = 256;
        welch.keep_cross = true;
        const SpectralReport report = cpsd_svd(std::vector<Matrix>{field}, dt, welch);

        REQUIRE(!report.peak_freqs_hz.empty());
        double best_peak = report.peak_freqs_hz[0];
        double best_value = 0.0;
        for (std::size_t k = 0; k < report.freq_hz.size(); ++k)
            for (double p : report.peak_freqs_hz)
                if (report.freq_hz[k] == p && report.singular_values(k, 0) > best_value) {
                    best_value = report.singular_values(k, 0);
                    best_peak = p;
                }
        CHECK(best_peak == doctest::Approx(f0).epsilon(1e-12));

        for (std::size_t k = 0; k < report.freq_hz.size(); ++k)
            for (std::size_t s = 0; s + 1 < 4; ++s) {
                CHECK(report.singular_values(k, s) >= report.singular_values(k, s + 1) - 1e-12);
                CHECK(report.singular_values(k, s) >= -1e-12);
            }

        // Hermitian symmetry of the averaged cross-PSD
        for (const auto& mat : report.cross_psd)
            for (std::size_t a = 0; a < 4; ++a)
                for (std::size_t b = 0; b < 4; ++b) {
                    const auto h_ab = mat[a * 4 + b];
                    const auto h_ba = std::conj(mat[b * 4 + a]);
                    CHECK(std::abs(h_ab - h_ba) < 1e-10 * (1.0 + std::abs(h_ab)));
                }
    }

    SUBCASE("segment longer than the series is rejected") {
        Matrix field(64, 2);
        WelchConfig welch;
        welch.segment = 128;
        CHECK_THROWS_AS(cpsd_svd(std::vector<Matrix>{field}, dt, welch), ConfigError);
    }
}

TEST_CASE("fdd recovers the testbed's first modes from simulated data") {
    const StructuralModel model = default_testbed(false);
    const std::vector<double> reference = natural_frequencies(model);

    const TimeGrid grid{0.02, 501};  // 10 s records
    GroundMotionParams params;
    params.t_n = 10.0;
    std::vector<Matrix> fields;
    for (int r = 0; r < 120; ++r) {
        const GroundMotionRecord rec = synthesize(params, grid, {}, 9000 + r);
        fields.push_back(newmark_integrate(model, rec).accel);
    }

    WelchConfig welch;
    welch.segment = grid.n_steps;  // ensemble averaging across realizations
    welch.peak_prominence = 1e-4;
    const SpectralReport report = cpsd_svd(fields, grid.dt, welch);
    const double bin = report.freq_hz[1] - report.freq_hz[0];

    REQUIRE(report.peak_freqs_hz.size() >= 3);
    for (std::size_t mode = 0; mode < 3; ++mode)
        CHECK(std::abs(report.peak_freqs_hz[mode] - reference[mode]) <= bin + 1e-12);
}

TEST_CASE("convergence study bookkeeping") {
    // tiny dataset so the study runs in milliseconds
    Dataset data;
    data.grid = TimeGrid{0.02, 5};
    const std::size_t n = 24;
    data.motions.resize(n, 5);
    data.responses.assign(n, Matrix(5, 2));
    Rng rng(59);
    for (std::size_t q = 0; q < n; ++q) {
        for (double& v : data.motions.row_span(q)) v = rng.uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                data.responses[q](i, j) = 0.5 * data.motions(q, i) + 0.1 * static_cast<double>(j);
    }
    const SplitIndices split = stratified_split(data, SplitRatios{}, 2, 3);

    OperatorSizes sizes;
    sizes.branch_depth = 1;
    sizes.branch_width = 4;
    sizes.trunk_depth = 1;
    sizes.trunk_width = 4;
    TrainConfig config;
    config.kind = OperatorKind::FExD;
    config.batch_size = 8;
    config.max_epochs = 3;

    SUBCASE("identical sizes give identical points") {
        const std::vector<std::size_t> sizes_list{8, 8};
        const auto curve = convergence_study(sizes_list, data, split, sizes, config, 7);
        REQUIRE(curve.size() == 2);
        CHECK(curve[0].mean_rrmse == curve[1].mean_rrmse);
        CHECK(curve[0].median_rrmse == curve[1].median_rrmse);
    }
    SUBCASE("empty size list gives an empty curve") {
        CHECK(convergence_study({}, data, split, sizes, config, 7).empty());
    }
    SUBCASE("oversized request is rejected") {
        const std::vector<std::size_t> sizes_list{split.train.size() + 1};
        CHECK_THROWS_AS(convergence_study(sizes_list, data, split, sizes, config, 7),
                        ConfigError);
    }
    SUBCASE("descending sizes are rejected") {
        const std::vector<std::size_t> sizes_list{8, 4};
        CHECK_THROWS_AS(convergence_study(sizes_list, data, split, sizes, config, 7),
                        ConfigError);
    }
}
