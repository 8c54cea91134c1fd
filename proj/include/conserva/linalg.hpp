#ifndef CONSERVA_LINALG_HPP
#define CONSERVA_LINALG_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "conserva/parallel.hpp"

namespace conserva {

/// Row-major dense matrix. Sized for the stacked-grid covariance flow
/// ((K+1)*M square, a few hundred rows), not for general-purpose BLAS work.
class Matrix {
  public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, 0.0) {}

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return data_[std::size_t(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[std::size_t(i) * cols_ + j]; }

    double* row(int i) { return data_.data() + std::size_t(i) * cols_; }
    const double* row(int i) const { return data_.data() + std::size_t(i) * cols_; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

  private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// out = a * b. Each output row is computed by a single worker with a fixed
/// inner order, so serial and parallel runs agree bitwise.
void matmul(const Matrix& a, const Matrix& b, Matrix& out, ExecMode mode = ExecMode::parallel);

/// out = alpha*a + beta*b (elementwise, shapes must match).
void add_scaled(const Matrix& a, double alpha, const Matrix& b, double beta, Matrix& out);

/// In-place (m + m^T)/2.
void symmetrize(Matrix& m);

/// Smallest eigenvalue estimate of a symmetric matrix via a Gershgorin shift
/// and power iteration. Good to a few percent, which is all the PSD
/// monitoring needs.
double min_eigenvalue_estimate(const Matrix& sym, int iterations = 200);

/// Jacobi eigendecomposition of a small symmetric matrix: sym = V diag(w) V^T.
void jacobi_eigen(const Matrix& sym, Matrix& eigenvectors, std::vector<double>& eigenvalues);

/// Factor a symmetric PSD matrix as B B^T via eigendecomposition, clamping
/// eigenvalues below -tol*max|w| as an error and small negatives to zero.
Matrix psd_factor(const Matrix& sym, double tol = 1e-9);

} // namespace conserva

#endif
