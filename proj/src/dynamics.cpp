#include "operon/dynamics.hpp"

#include <cmath>
#include <set>

namespace operon {

void StructuralModel::validate() const {
    const std::size_t n = mass.rows();
    if (mass.cols() != n || stiffness.rows() != n || stiffness.cols() != n ||
        damping.rows() != n || damping.cols() != n)
        throw ConfigError("structural model: matrix dimensions inconsistent");
    if (influence.size() != n) throw ConfigError("structural model: influence vector length");
    for (double r : influence)
        if (r != 0.0 && r != 1.0)
            throw ConfigError("structural model: influence entries must be 0 or 1");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(mass(i, j) - mass(j, i)) > 1e-12 * (1.0 + std::abs(mass(i, j))) ||
                std::abs(stiffness(i, j) - stiffness(j, i)) >
                    1e-9 * (1.0 + std::abs(stiffness(i, j))) ||
                std::abs(damping(i, j) - damping(j, i)) > 1e-9 * (1.0 + std::abs(damping(i, j))))
                throw ConfigError("structural model: matrices must be symmetric");
        }
    // SPD checks via factorization success
    cholesky_factor(mass);
    cholesky_factor(stiffness);

    if (sensors.size() != sensor_scale.size())
        throw ConfigError("structural model: sensor scale length mismatch");
    std::set<std::size_t> seen;
    for (std::size_t s : sensors) {
        if (s >= n) throw ConfigError("structural model: sensor index out of range");
        if (!seen.insert(s).second) throw ConfigError("structural model: duplicate sensor index");
    }
}

DampingSpec DampingSpec::rayleigh(double alpha, double beta) {
    DampingSpec spec;
    spec.kind = Kind::Rayleigh;
    spec.alpha = alpha;
    spec.beta = beta;
    return spec;
}

DampingSpec DampingSpec::modal_pair(std::size_t mode_i, std::size_t mode_j, double zeta_i,
                                    double zeta_j) {
    DampingSpec spec;
    spec.kind = Kind::ModalPair;
    spec.mode_i = mode_i;
    spec.mode_j = mode_j;
    spec.zeta_i = zeta_i;
    spec.zeta_j = zeta_j;
    return spec;
}

std::pair<double, double> rayleigh_from_frequencies(double omega_i, double omega_j, double zeta_i,
                                                    double zeta_j) {
    if (!(omega_i > 0.0) || !(omega_j > omega_i))
        throw ConfigError("rayleigh damping: anchor frequencies must be positive and ordered");
    const double den = omega_j * omega_j - omega_i * omega_i;
    const double alpha = 2.0 * omega_i * omega_j * (zeta_i * omega_j - zeta_j * omega_i) / den;
    const double beta = 2.0 * (zeta_j * omega_j - zeta_i * omega_i) / den;
    return {alpha, beta};
}

StructuralModel build_chain_model(std::size_t n_dof, std::span<const double> masses,
                                  std::span<const double> stiffnesses,
                                  const DampingSpec& damping) {
    if (n_dof < 1) throw ConfigError("chain model: n_dof must be at least 1");
    auto story_value = [n_dof](std::span<const double> v, std::size_t i, const char* what) {
        if (v.size() != 1 && v.size() != n_dof)
            throw ConfigError(std::string("chain model: ") + what +
                              " needs one value or one per story");
        const double x = v.size() == 1 ? v[0] : v[i];
        if (!(x > 0.0)) throw ConfigError(std::string("chain model: nonpositive ") + what);
        return x;
    };

    StructuralModel model;
    model.mass.resize(n_dof, n_dof);
    model.stiffness.resize(n_dof, n_dof);
    for (std::size_t i = 0; i < n_dof; ++i) {
        model.mass(i, i) = story_value(masses, i, "mass");
        const double ki = story_value(stiffnesses, i, "stiffness");
        model.stiffness(i, i) += ki;
        if (i + 1 < n_dof) {
            const double knext = story_value(stiffnesses, i + 1, "stiffness");
            model.stiffness(i, i) += knext;
            model.stiffness(i, i + 1) -= knext;
            model.stiffness(i + 1, i) -= knext;
        }
    }
    model.influence.assign(n_dof, 1.0);
    model.sensors.resize(n_dof);
    for (std::size_t i = 0; i < n_dof; ++i) model.sensors[i] = i;
    model.sensor_scale.assign(n_dof, 1.0);

    if (damping.kind == DampingSpec::Kind::Rayleigh) {
        model.damping.resize(n_dof, n_dof);
        for (std::size_t i = 0; i < n_dof; ++i)
            for (std::size_t j = 0; j < n_dof; ++j)
                model.damping(i, j) =
                    damping.alpha * model.mass(i, j) + damping.beta * model.stiffness(i, j);
    } else {
        model.damping.resize(n_dof, n_dof);  // zero placeholder for the eigenanalysis
        const auto eig = generalized_eigen(model.stiffness, model.mass);
        if (damping.mode_i >= n_dof || damping.mode_j >= n_dof || damping.mode_i == damping.mode_j)
            throw ConfigError("chain model: damping anchor modes out of range");
        const double wi = std::sqrt(eig.values[damping.mode_i]);
        const double wj = std::sqrt(eig.values[damping.mode_j]);
        const auto [alpha, beta] = rayleigh_from_frequencies(wi, wj, damping.zeta_i, damping.zeta_j);
        for (std::size_t i = 0; i < n_dof; ++i)
            for (std::size_t j = 0; j < n_dof; ++j)
                model.damping(i, j) = alpha * model.mass(i, j) + beta * model.stiffness(i, j);
    }
    model.validate();
    return model;
}

StructuralModel default_testbed(bool lowamp_sensors) {
    // Stiffness graded 9:1 from base to top compresses the frequency spectrum
    // relative to a uniform chain; with this scale the first three modes land
    // at 0.290 / 0.677 / 1.068 Hz.
    constexpr std::size_t n = 10;
    std::vector<double> masses(n, 1.0e3);
    std::vector<double> stiffnesses(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
        stiffnesses[i] = 2.6334e4 * (1.0 + 8.0 * (1.0 - frac));
    }
    StructuralModel model =
        build_chain_model(n, masses, stiffnesses, DampingSpec::modal_pair(0, 1, 0.02, 0.02));
    if (lowamp_sensors) {
        model.sensor_scale[2] = 0.05;
        model.sensor_scale[7] = 0.05;
    }
    return model;
}

namespace {

std::vector<double> effective_force_vector(const StructuralModel& model) {
    // f(t) = -M r u''_g; precompute -M r once.
    const std::size_t n = model.n_dof();
    std::vector<double> mr(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += model.mass(i, j) * model.influence[j];
        mr[i] = -acc;
    }
    return mr;
}

void store_sensor_row(const StructuralModel& model, std::span<const double> accel_rel,
                      double ground_accel, Matrix& out, std::size_t row) {
    for (std::size_t s = 0; s < model.n_sensors(); ++s) {
        const std::size_t dof = model.sensors[s];
        const double absolute = accel_rel[dof] + model.influence[dof] * ground_accel;
        out(row, s) = model.sensor_scale[s] * absolute;
    }
}

}  // namespace

ResponseField newmark_integrate(const StructuralModel& model, const GroundMotionRecord& record,
                                const NewmarkScheme& scheme, const IntegrationOptions& options) {
    model.validate();
    record.grid.validate();
    if (record.accel.size() != record.grid.n_steps)
        throw ConfigError("newmark: record length does not match grid");
    if (!(scheme.beta > 0.0) || !(scheme.gamma > 0.0))
        throw ConfigError("newmark: scheme parameters must be positive");

    const std::size_t n = model.n_dof();
    const std::size_t steps = record.grid.n_steps;
    const double dt = record.grid.dt;
    const double a0 = 1.0 / (scheme.beta * dt * dt);
    const double a1 = scheme.gamma / (scheme.beta * dt);
    const double a2 = 1.0 / (scheme.beta * dt);
    const double a3 = 1.0 / (2.0 * scheme.beta) - 1.0;
    const double a4 = scheme.gamma / scheme.beta - 1.0;
    const double a5 = 0.5 * dt * (scheme.gamma / scheme.beta - 2.0);

    Matrix k_eff(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            k_eff(i, j) = model.stiffness(i, j) + a0 * model.mass(i, j) + a1 * model.damping(i, j);
    const Matrix k_eff_l = cholesky_factor(k_eff);

    const std::vector<double> mr = effective_force_vector(model);

    std::vector<double> y(n, 0.0), v(n, 0.0), a(n, 0.0);
    // quiescent start: M a0 = f(0) => a = -r * ug(0)
    for (std::size_t i = 0; i < n; ++i) a[i] = -model.influence[i] * record.accel[0];

    ResponseField field;
    field.grid = record.grid;
    field.accel.resize(steps, model.n_sensors());
    if (options.keep_states) {
        field.displacement.resize(steps, n);
        field.velocity.resize(steps, n);
    }
    store_sensor_row(model, a, record.accel[0], field.accel, 0);

    std::vector<double> rhs(n), ynew(n), anew(n), tmp_m(n), tmp_c(n);
    for (std::size_t step = 1; step < steps; ++step) {
        const double ug = record.accel[step];
        for (std::size_t i = 0; i < n; ++i) {
            tmp_m[i] = a0 * y[i] + a2 * v[i] + a3 * a[i];
            tmp_c[i] = a1 * y[i] + a4 * v[i] + a5 * a[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double acc = mr[i] * ug;
            const double* m_row = model.mass.row(i);
            const double* c_row = model.damping.row(i);
            for (std::size_t j = 0; j < n; ++j) acc += m_row[j] * tmp_m[j] + c_row[j] * tmp_c[j];
            rhs[i] = acc;
        }
        ynew = rhs;
        cholesky_solve(k_eff_l, ynew);
        for (std::size_t i = 0; i < n; ++i)
            anew[i] = a0 * (ynew[i] - y[i]) - a2 * v[i] - a3 * a[i];
        for (std::size_t i = 0; i < n; ++i)
            v[i] += dt * ((1.0 - scheme.gamma) * a[i] + scheme.gamma * anew[i]);
        y = ynew;
        a = anew;

        store_sensor_row(model, a, ug, field.accel, step);
        if (options.keep_states) {
            for (std::size_t i = 0; i < n; ++i) {
                field.displacement(step, i) = y[i];
                field.velocity(step, i) = v[i];
            }
        }
    }
    if (!all_finite(field.accel.data())) throw NumericalError("newmark: non-finite response");
    return field;
}

ModalBasis modal_analysis(const StructuralModel& model) {
    model.validate();
    const std::size_t n = model.n_dof();
    const SymmetricEigen eig = generalized_eigen(model.stiffness, model.mass);

    ModalBasis basis;
    basis.omega.resize(n);
    basis.zeta.resize(n);
    basis.shapes = eig.vectors;
    for (std::size_t r = 0; r < n; ++r) {
        if (eig.values[r] <= 0.0) throw NumericalError("modal analysis: nonpositive eigenvalue");
        basis.omega[r] = std::sqrt(eig.values[r]);
    }

    // modal damping: Phi^T C Phi must be diagonal for the decoupled solution
    Matrix cphi(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < n; ++t) acc += model.damping(i, t) * basis.shapes(t, j);
            cphi(i, j) = acc;
        }
    double max_diag = 0.0, max_off = 0.0;
    Matrix modal_c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < n; ++t) acc += basis.shapes(t, i) * cphi(t, j);
            modal_c(i, j) = acc;
            if (i == j)
                max_diag = std::max(max_diag, std::abs(acc));
            else
                max_off = std::max(max_off, std::abs(acc));
        }
    if (max_off > 1e-6 * std::max(max_diag, 1e-300))
        throw NumericalError("modal analysis: non-classical damping is unsupported");
    for (std::size_t r = 0; r < n; ++r) basis.zeta[r] = modal_c(r, r) / (2.0 * basis.omega[r]);
    return basis;
}

std::vector<double> natural_frequencies(const StructuralModel& model) {
    const ModalBasis basis = modal_analysis(model);
    std::vector<double> hz(basis.omega.size());
    for (std::size_t i = 0; i < hz.size(); ++i) hz[i] = basis.omega[i] / (2.0 * kPi);
    return hz;
}

ResponseField modal_oracle(const StructuralModel& model, const GroundMotionRecord& record,
                           const IntegrationOptions& options) {
    record.grid.validate();
    if (record.accel.size() != record.grid.n_steps)
        throw ConfigError("modal oracle: record length does not match grid");
    const ModalBasis basis = modal_analysis(model);
    const std::size_t n = model.n_dof();
    const std::size_t steps = record.grid.n_steps;
    const double dt = record.grid.dt;

    // modal participation: p_r(t) = -phi_r^T M r * ug(t) (unit modal mass)
    std::vector<double> gamma(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mi = 0.0;
            for (std::size_t j = 0; j < n; ++j) mi += model.mass(i, j) * model.influence[j];
            acc += basis.shapes(i, r) * mi;
        }
        gamma[r] = -acc;
    }

    Matrix q(steps, n), qdd(steps, n);
    for (std::size_t r = 0; r < n; ++r) {
        const double w = basis.omega[r];
        const double z = basis.zeta[r];
        if (!(z >= 0.0 && z < 1.0))
            throw NumericalError("modal oracle: requires underdamped modes");
        const double wd = w * std::sqrt(1.0 - z * z);
        const double zr = z / std::sqrt(1.0 - z * z);
        const double e = std::exp(-z * w * dt);
        const double sd = std::sin(wd * dt);
        const double cd = std::cos(wd * dt);
        const double w2 = w * w;

        // exact response to piecewise-linear load over one step
        const double ca = e * (zr * sd + cd);
        const double cb = e * sd / wd;
        const double cc = (2.0 * z / (w * dt) +
                           e * (((1.0 - 2.0 * z * z) / (wd * dt) - zr) * sd -
                                (1.0 + 2.0 * z / (w * dt)) * cd)) /
                          w2;
        const double cdcoef =
            (1.0 - 2.0 * z / (w * dt) +
             e * ((2.0 * z * z - 1.0) / (wd * dt) * sd + 2.0 * z / (w * dt) * cd)) /
            w2;
        const double cap = -e * (w / std::sqrt(1.0 - z * z)) * sd;
        const double cbp = e * (cd - zr * sd);
        const double ccp = (-1.0 / dt + e * ((w / std::sqrt(1.0 - z * z) + zr / dt) * sd + cd / dt)) / w2;
        const double cdp = (1.0 - e * (zr * sd + cd)) / (w2 * dt);

        double qi = 0.0, vi = 0.0;
        double p_prev = gamma[r] * record.accel[0];
        q(0, r) = 0.0;
        qdd(0, r) = p_prev;  // zero initial displacement/velocity
        for (std::size_t sstep = 1; sstep < steps; ++sstep) {
            const double p_next = gamma[r] * record.accel[sstep];
            const double qn = ca * qi + cb * vi + cc * p_prev + cdcoef * p_next;
            const double vn = cap * qi + cbp * vi + ccp * p_prev + cdp * p_next;
            qi = qn;
            vi = vn;
            p_prev = p_next;
            q(sstep, r) = qi;
            qdd(sstep, r) = p_next - 2.0 * z * w * vi - w2 * qi;
        }
    }

    ResponseField field;
    field.grid = record.grid;
    field.accel.resize(steps, model.n_sensors());
    if (options.keep_states) field.displacement.resize(steps, n);
    for (std::size_t step = 0; step < steps; ++step) {
        for (std::size_t s = 0; s < model.n_sensors(); ++s) {
            const std::size_t dof = model.sensors[s];
            double rel = 0.0;
            for (std::size_t r = 0; r < n; ++r) rel += basis.shapes(dof, r) * qdd(step, r);
            field.accel(step, s) =
                model.sensor_scale[s] * (rel + model.influence[dof] * record.accel[step]);
        }
        if (options.keep_states)
            for (std::size_t i = 0; i < n; ++i) {
                double d = 0.0;
                for (std::size_t r = 0; r < n; ++r) d += basis.shapes(i, r) * q(step, r);
                field.displacement(step, i) = d;
            }
    }
    if (!all_finite(field.accel.data())) throw NumericalError("modal oracle: non-finite response");
    return field;
}

}  // namespace operon
