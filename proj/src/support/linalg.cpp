#include "conserva/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include "conserva/errors.hpp"

namespace conserva {

void matmul(const Matrix& a, const Matrix& b, Matrix& out, ExecMode mode) {
    if (a.cols() != b.rows()) throw std::logic_error("matmul: shape mismatch");
    if (out.rows() != a.rows() || out.cols() != b.cols()) out = Matrix(a.rows(), b.cols());
    const int n = a.rows(), k = a.cols(), m = b.cols();
    const bool par = (mode == ExecMode::parallel);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
    for (int i = 0; i < n; ++i) {
        double* oi = out.row(i);
        for (int j = 0; j < m; ++j) oi[j] = 0.0;
        const double* ai = a.row(i);
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b.row(p);
            for (int j = 0; j < m; ++j) oi[j] += aip * bp[j];
        }
    }
    (void)par;
}

void add_scaled(const Matrix& a, double alpha, const Matrix& b, double beta, Matrix& out) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::logic_error("add_scaled: shape mismatch");
    }
    if (out.rows() != a.rows() || out.cols() != a.cols()) out = Matrix(a.rows(), a.cols());
    auto da = a.data();
    auto db = b.data();
    auto dout = out.data();
    for (std::size_t i = 0; i < da.size(); ++i) dout[i] = alpha * da[i] + beta * db[i];
}

void symmetrize(Matrix& m) {
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
}

double min_eigenvalue_estimate(const Matrix& sym, int iterations) {
    const int n = sym.rows();
    if (n == 0) return 0.0;
    // Gershgorin upper bound on the spectrum.
    double shift = 0.0;
    for (int i = 0; i < n; ++i) {
        double r = 0.0;
        for (int j = 0; j < n; ++j) r += std::abs(sym(i, j));
        shift = std::max(shift, r);
    }
    if (shift == 0.0) return 0.0;
    // Power iteration on shift*I - sym converges to shift - lambda_min.
    std::vector<double> v(n), w(n);
    for (int i = 0; i < n; ++i) v[i] = 1.0 / std::sqrt(double(n)) * (1.0 + 0.01 * i);
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        for (int i = 0; i < n; ++i) {
            double s = shift * v[i];
            const double* ri = sym.row(i);
            for (int j = 0; j < n; ++j) s -= ri[j] * v[j];
            w[i] = s;
        }
        double norm = 0.0;
        for (int i = 0; i < n; ++i) norm += w[i] * w[i];
        norm = std::sqrt(norm);
        if (norm == 0.0) return shift;
        lambda = norm;
        for (int i = 0; i < n; ++i) v[i] = w[i] / norm;
    }
    return shift - lambda;
}

void jacobi_eigen(const Matrix& sym, Matrix& eigenvectors, std::vector<double>& eigenvalues) {
    const int n = sym.rows();
    Matrix a = sym;
    eigenvectors = Matrix::identity(n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-24 * std::max(1.0, a.max_abs() * a.max_abs())) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = eigenvectors(i, p), viq = eigenvectors(i, q);
                    eigenvectors(i, p) = c * vip - s * viq;
                    eigenvectors(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    eigenvalues.resize(n);
    for (int i = 0; i < n; ++i) eigenvalues[i] = a(i, i);
}

Matrix psd_factor(const Matrix& sym, double tol) {
    Matrix vecs;
    std::vector<double> vals;
    jacobi_eigen(sym, vecs, vals);
    double wmax = 0.0;
    for (double w : vals) wmax = std::max(wmax, std::abs(w));
    const int n = sym.rows();
    Matrix b(n, n);
    for (int j = 0; j < n; ++j) {
        if (vals[j] < -tol * std::max(wmax, 1e-300)) {
            throw numeric_error("psd_factor: matrix is not positive semidefinite");
        }
        const double s = vals[j] > 0.0 ? std::sqrt(vals[j]) : 0.0;
        for (int i = 0; i < n; ++i) b(i, j) = vecs(i, j) * s;
    }
    return b;
}

} // namespace conserva
