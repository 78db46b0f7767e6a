#include "operon/linalg.hpp"

#include <cmath>

namespace operon {

Matrix cholesky_factor(const Matrix& a) {
    if (a.rows() != a.cols()) throw NumericalError("cholesky: matrix not square");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s))
                    throw NumericalError("cholesky: matrix not positive definite");
                l(i, j) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

void cholesky_solve(const Matrix& lower, std::span<double> x) {
    const std::size_t n = lower.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * x[k];
        x[i] = s / lower(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * x[k];
        x[ii] = s / lower(ii, ii);
    }
}

SymmetricEigen symmetric_eigen(Matrix a) {
    if (a.rows() != a.cols()) throw NumericalError("eigen: matrix not square");
    const std::size_t n = a.rows();
    Matrix v = Matrix::identity(n);

    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-300) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double scale = std::abs(a(p, p)) + std::abs(a(q, q));
                if (scale + std::abs(apq) * 1e2 == scale) {
                    a(p, q) = a(q, p) = 0.0;
                    continue;
                }
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0)
                                     ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                                     : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i);
                    const double aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    SymmetricEigen out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return out.values[x] < out.values[y]; });

    SymmetricEigen sorted;
    sorted.values.resize(n);
    sorted.vectors.resize(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        sorted.values[j] = out.values[order[j]];
        for (std::size_t i = 0; i < n; ++i) sorted.vectors(i, j) = v(i, order[j]);
    }
    return sorted;
}

SymmetricEigen generalized_eigen(const Matrix& k, const Matrix& m) {
    if (k.rows() != m.rows() || k.cols() != m.cols())
        throw NumericalError("generalized_eigen: dimension mismatch");
    const std::size_t n = k.rows();
    const Matrix l = cholesky_factor(m);

    // B = L^-1 K L^-T, formed column by column via triangular solves.
    Matrix b(n, n);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = k(i, j);
        // forward solve L y = k_col
        for (std::size_t i = 0; i < n; ++i) {
            double s = col[i];
            for (std::size_t t = 0; t < i; ++t) s -= l(i, t) * col[t];
            col[i] = s / l(i, i);
        }
        for (std::size_t i = 0; i < n; ++i) b(i, j) = col[i];
    }
    // now b = L^-1 K; apply the same solve to rows for L^-1 K L^-T
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) col[j] = b(i, j);
        for (std::size_t t = 0; t < n; ++t) {
            double s = col[t];
            for (std::size_t u = 0; u < t; ++u) s -= l(t, u) * col[u];
            col[t] = s / l(t, t);
        }
        for (std::size_t j = 0; j < n; ++j) b(i, j) = col[j];
    }
    // symmetrize against roundoff
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (b(i, j) + b(j, i));
            b(i, j) = b(j, i) = avg;
        }

    SymmetricEigen std_eig = symmetric_eigen(b);

    // back-substitute: v = L^-T u, which lands v^T M v = 1
    SymmetricEigen out;
    out.values = std_eig.values;
    out.vectors.resize(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = std_eig.vectors(i, j);
        for (std::size_t ii = n; ii-- > 0;) {
            double s = col[ii];
            for (std::size_t t = ii + 1; t < n; ++t) s -= l(t, ii) * col[t];
            col[ii] = s / l(ii, ii);
        }
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = col[i];
    }
    return out;
}

}  // namespace operon
