#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "dgwave/errors.hpp"

namespace dgwave {

using Vector = std::vector<double>;

/// Row-major dense matrix. All systems in this library are small (a few
/// hundred rows at most), so there is no sparse storage and no blocking.
class DenseMatrix {
  public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const Vector& entries() const { return data_; }

    DenseMatrix transposed() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    DenseMatrix& operator+=(const DenseMatrix& other) {
        if (other.rows_ != rows_ || other.cols_ != cols_)
            throw DimensionMismatch("matrix addition shapes differ");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    DenseMatrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }

    friend DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }
    friend DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

    friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
        if (a.cols_ != b.rows_) throw DimensionMismatch("matrix product shapes differ");
        DenseMatrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        }
        return c;
    }

    friend Vector operator*(const DenseMatrix& a, const Vector& x) {
        if (a.cols_ != x.size()) throw DimensionMismatch("matrix-vector shapes differ");
        Vector y(a.rows_, 0.0);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < a.cols_; ++j) s += a(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

  private:
    std::size_t rows_ = 0, cols_ = 0;
    Vector data_;
};

inline double max_abs(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

namespace detail {

// Pivots of the equilibrated matrix at or below this are treated as exact
// singularity; after scaling every row tops out between 1 and 2, so the
// threshold acts relative to the row magnitudes.
inline constexpr double kPivotThreshold = 1e-14;

// Exact power-of-two inverse scale for a magnitude, so equilibration never
// perturbs mantissa bits. Zero rows keep scale 1 and fail at the pivot check.
inline double pow2_inverse_scale(double m) {
    if (!(m > 0.0) || !std::isfinite(m)) return 1.0;
    return std::exp2(static_cast<double>(-std::ilogb(m)));
}

struct LuFactors {
    std::size_t n = 0;
    DenseMatrix lu;                // factors of diag(row) * a * diag(col)
    std::vector<std::size_t> perm; // perm[i] = original row now in position i
    std::vector<double> row, col;

    // Solve a*x = r through the scaled factors: x = C y, (RAC) y = R r.
    Vector solve(const Vector& r) const {
        Vector y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = r[perm[i]] * row[perm[i]];
        for (std::size_t i = 0; i < n; ++i) {
            double s = y[i];
            for (std::size_t j = 0; j < i; ++j) s -= lu(i, j) * y[j];
            y[i] = s;
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t j = ii + 1; j < n; ++j) s -= lu(ii, j) * y[j];
            y[ii] = s / lu(ii, ii);
        }
        for (std::size_t i = 0; i < n; ++i) y[i] *= col[i];
        return y;
    }
};

inline LuFactors lu_factor(const DenseMatrix& a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw DimensionMismatch("lu_solve needs a square matrix");

    LuFactors f;
    f.n = n;
    f.row.assign(n, 1.0);
    f.col.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double m = 0.0;
        for (std::size_t j = 0; j < n; ++j) m = std::max(m, std::abs(a(i, j)));
        f.row[i] = pow2_inverse_scale(m);
    }
    for (std::size_t j = 0; j < n; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(a(i, j)) * f.row[i]);
        f.col[j] = pow2_inverse_scale(m);
    }

    f.lu = DenseMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) f.lu(i, j) = a(i, j) * f.row[i] * f.col[j];

    f.perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(f.lu(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double cand = std::abs(f.lu(r, col));
            if (cand > best) {
                best = cand;
                piv = r;
            }
        }
        if (best <= kPivotThreshold)
            throw SingularMatrix("pivot below threshold at column " + std::to_string(col));
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(col, j), f.lu(piv, j));
            std::swap(f.perm[col], f.perm[piv]);
        }
        const double inv_piv = 1.0 / f.lu(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double fac = f.lu(r, col) * inv_piv;
            f.lu(r, col) = fac;
            if (fac == 0.0) continue;
            for (std::size_t j = col + 1; j < n; ++j) f.lu(r, j) -= fac * f.lu(col, j);
        }
    }
    return f;
}

} // namespace detail

/// Solve a*x = b by LU with partial pivoting on a power-of-two equilibrated
/// copy, then polish with one step of iterative refinement using an
/// extended-precision residual. The slab blocks mix O(1/k^2) derivative terms
/// with O(1) trace terms, and without the scaling and refinement that dynamic
/// range costs several digits at the finest time steps.
/// Throws SingularMatrix when an equilibrated pivot underflows the threshold.
inline Vector lu_solve(const DenseMatrix& a, const Vector& b) {
    const std::size_t n = a.rows();
    if (b.size() != n) throw DimensionMismatch("lu_solve right-hand side length");

    const detail::LuFactors f = detail::lu_factor(a);
    Vector x = f.solve(b);

    Vector r(n);
    for (std::size_t i = 0; i < n; ++i) {
        long double s = b[i];
        for (std::size_t j = 0; j < n; ++j)
            s -= static_cast<long double>(a(i, j)) * static_cast<long double>(x[j]);
        r[i] = static_cast<double>(s);
    }
    const Vector dx = f.solve(r);
    for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
    return x;
}

struct EigenDecomposition {
    Vector eigenvalues;     // unordered
    DenseMatrix eigenvectors; // columns
};

/// Cyclic Jacobi rotations for a symmetric matrix. Sweeps stop once the
/// off-diagonal Frobenius norm drops below 1e-14 * ||a||_F.
inline EigenDecomposition jacobi_eigendecomposition(const DenseMatrix& a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw DimensionMismatch("eigendecomposition needs a square matrix");

    DenseMatrix m = a;
    DenseMatrix v = DenseMatrix::identity(n);
    const double stop = 1e-14 * m.frobenius_norm();

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * m(i, j) * m(i, j);
        return std::sqrt(s);
    };

    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps && off_norm() > stop; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t i = 0; i < n; ++i) {
                    const double mip = m(i, p), miq = m(i, q);
                    m(i, p) = c * mip - s * miq;
                    m(i, q) = s * mip + c * miq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double mpj = m(p, j), mqj = m(q, j);
                    m(p, j) = c * mpj - s * mqj;
                    m(q, j) = s * mpj + c * mqj;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    EigenDecomposition d;
    d.eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.eigenvalues[i] = m(i, i);
    d.eigenvectors = std::move(v);
    return d;
}

namespace detail {

inline void require_symmetric(const DenseMatrix& a) {
    const std::size_t n = a.rows();
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) dev = std::max(dev, std::abs(a(i, j) - a(j, i)));
    if (dev > 1e-12) throw NotSPD("matrix is not symmetric");
}

// s = V diag(g(lambda)) V^T with eigenvalue screening shared by both roots.
template <class G>
DenseMatrix spd_function(const DenseMatrix& a, G&& g) {
    require_symmetric(a);
    const auto eig = jacobi_eigendecomposition(a);
    const std::size_t n = a.rows();

    double lam_max = 0.0;
    for (double lam : eig.eigenvalues) lam_max = std::max(lam_max, lam);
    for (double lam : eig.eigenvalues)
        if (lam <= 1e-13 * lam_max || lam_max <= 0.0)
            throw NotSPD("matrix has a non-positive eigenvalue");

    DenseMatrix scaled = eig.eigenvectors;
    for (std::size_t j = 0; j < n; ++j) {
        const double f = g(eig.eigenvalues[j]);
        for (std::size_t i = 0; i < n; ++i) scaled(i, j) *= f;
    }
    return scaled * eig.eigenvectors.transposed();
}

} // namespace detail

/// Symmetric square root of an SPD matrix (s*s = a).
inline DenseMatrix spd_sqrt(const DenseMatrix& a) {
    return detail::spd_function(a, [](double lam) { return std::sqrt(lam); });
}

/// Symmetric inverse square root of an SPD matrix (s*a*s = identity).
inline DenseMatrix spd_inv_sqrt(const DenseMatrix& a) {
    return detail::spd_function(a, [](double lam) { return 1.0 / std::sqrt(lam); });
}

} // namespace dgwave
