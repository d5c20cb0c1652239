#ifndef PCN_MATRIX_HPP
#define PCN_MATRIX_HPP

#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "pcn/errors.hpp"
#include "pcn/rng.hpp"

namespace pcn {

// Worker cap for row-parallel products (PC_ENGINE_THREADS). Rows are
// distributed in fixed contiguous chunks and every output element keeps its
// serial accumulation order, so results are identical for any thread count.
inline std::atomic<unsigned>& max_threads_ref() {
    static std::atomic<unsigned> n{1};
    return n;
}
inline void set_max_threads(unsigned n) { max_threads_ref() = n ? n : 1; }
inline unsigned max_threads() { return max_threads_ref().load(); }

namespace detail {

template <typename Fn>
void parallel_rows(std::size_t rows, Fn&& body) {
    const unsigned want = max_threads();
    if (want <= 1 || rows < 128) {
        body(std::size_t(0), rows);
        return;
    }
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(want, rows));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (rows + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(rows, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

template <typename T>
using Vector = std::vector<T>;

// Dense row-major matrix. The scalar type selects the arithmetic mode:
// Matrix<double> is the default, Matrix<float> reproduces single-precision
// behaviour end to end (every intermediate is rounded to float).
template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T(0))
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const {
        return data[i * cols + j];
    }

    T* row(std::size_t i) { return data.data() + i * cols; }
    const T* row(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const {
        return rows == o.rows && cols == o.cols;
    }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

template <typename T>
inline void check_same_shape(const Matrix<T>& a, const Matrix<T>& b,
                             const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             a.shape_str() + " vs " + b.shape_str());
    }
}

// ---------------------------------------------------------------------------
// Products. All loops run in a fixed serial order so results are
// bit-reproducible; each output element accumulates its k-terms ascending.
// ---------------------------------------------------------------------------

// c = a * b
template <typename T>
Matrix<T> gemm(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols != b.rows) {
        throw DimensionError("gemm: inner dimensions disagree, " +
                             a.shape_str() + " * " + b.shape_str());
    }
    Matrix<T> c(a.rows, b.cols);
    detail::parallel_rows(a.rows, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            T* ci = c.row(i);
            const T* ai = a.row(i);
            for (std::size_t k = 0; k < a.cols; ++k) {
                const T aik = ai[k];
                if (aik == T(0)) continue;
                const T* bk = b.row(k);
                for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
            }
        }
    });
    return c;
}

// c = a * b^T
template <typename T>
Matrix<T> gemm_nt(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols != b.cols) {
        throw DimensionError("gemm_nt: inner dimensions disagree, " +
                             a.shape_str() + " * " + b.shape_str() + "^T");
    }
    Matrix<T> c(a.rows, b.rows);
    detail::parallel_rows(a.rows, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const T* ai = a.row(i);
            T* ci = c.row(i);
            for (std::size_t j = 0; j < b.rows; ++j) {
                const T* bj = b.row(j);
                T acc = T(0);
                for (std::size_t k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
                ci[j] = acc;
            }
        }
    });
    return c;
}

// c = a^T * b
template <typename T>
Matrix<T> gemm_tn(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.rows != b.rows) {
        throw DimensionError("gemm_tn: inner dimensions disagree, " +
                             a.shape_str() + "^T * " + b.shape_str());
    }
    Matrix<T> c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const T* ak = a.row(k);
        const T* bk = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const T aki = ak[i];
            if (aki == T(0)) continue;
            T* ci = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
    Matrix<T> t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

// ---------------------------------------------------------------------------
// Elementwise helpers
// ---------------------------------------------------------------------------

template <typename T>
Matrix<T> operator+(const Matrix<T>& a, const Matrix<T>& b) {
    check_same_shape(a, b, "operator+");
    Matrix<T> c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
    return c;
}

template <typename T>
Matrix<T> operator-(const Matrix<T>& a, const Matrix<T>& b) {
    check_same_shape(a, b, "operator-");
    Matrix<T> c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

template <typename T>
Matrix<T>& operator+=(Matrix<T>& a, const Matrix<T>& b) {
    check_same_shape(a, b, "operator+=");
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
    return a;
}

template <typename T>
Matrix<T>& operator-=(Matrix<T>& a, const Matrix<T>& b) {
    check_same_shape(a, b, "operator-=");
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] -= b.data[i];
    return a;
}

template <typename T>
Matrix<T> operator*(T s, const Matrix<T>& a) {
    Matrix<T> c = a;
    for (auto& v : c.data) v *= s;
    return c;
}

// a += s * b
template <typename T>
void axpy(T s, const Matrix<T>& b, Matrix<T>& a) {
    check_same_shape(a, b, "axpy");
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += s * b.data[i];
}

template <typename T>
double max_abs(const Matrix<T>& a) {
    double m = 0.0;
    for (const T& v : a.data) {
        const double av = std::fabs(static_cast<double>(v));
        if (av > m) m = av;
    }
    return m;
}

template <typename T>
double frobenius_norm(const Matrix<T>& a) {
    double s = 0.0;
    for (const T& v : a.data) {
        const double dv = static_cast<double>(v);
        s += dv * dv;
    }
    return std::sqrt(s);
}

template <typename T>
bool all_finite(const Matrix<T>& a) {
    for (const T& v : a.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <typename U, typename T>
Matrix<U> cast_matrix(const Matrix<T>& a) {
    Matrix<U> c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i)
        c.data[i] = static_cast<U>(a.data[i]);
    return c;
}

// ---------------------------------------------------------------------------
// LU factorization with partial pivoting, and direct solves built on it.
// ---------------------------------------------------------------------------

template <typename T>
struct LuFactors {
    Matrix<T> lu;                // L below the diagonal (unit), U on and above
    std::vector<std::size_t> perm;
    int sign = 1;

    std::size_t n() const { return lu.rows; }

    // Solves LU x = P b for one right-hand side laid out as a column of b.
    void solve_in_place(Vector<T>& x) const {
        const std::size_t m = n();
        Vector<T> y(m);
        for (std::size_t i = 0; i < m; ++i) y[i] = x[perm[i]];
        // forward: L y' = y
        for (std::size_t i = 1; i < m; ++i) {
            T acc = y[i];
            const T* li = lu.row(i);
            for (std::size_t j = 0; j < i; ++j) acc -= li[j] * y[j];
            y[i] = acc;
        }
        // backward: U x = y'
        for (std::size_t ii = m; ii-- > 0;) {
            T acc = y[ii];
            const T* ui = lu.row(ii);
            for (std::size_t j = ii + 1; j < m; ++j) acc -= ui[j] * y[j];
            y[ii] = acc / ui[ii];
        }
        x = std::move(y);
    }

    // Multi-RHS solve: B has one system per column.
    Matrix<T> solve(const Matrix<T>& b) const {
        if (b.rows != n()) {
            throw DimensionError("lu_solve: rhs has " +
                                 std::to_string(b.rows) + " rows, expected " +
                                 std::to_string(n()));
        }
        Matrix<T> x(b.rows, b.cols);
        Vector<T> col(b.rows);
        for (std::size_t j = 0; j < b.cols; ++j) {
            for (std::size_t i = 0; i < b.rows; ++i) col[i] = b(i, j);
            solve_in_place(col);
            for (std::size_t i = 0; i < b.rows; ++i) x(i, j) = col[i];
        }
        return x;
    }

    double log_abs_det() const {
        double s = 0.0;
        for (std::size_t i = 0; i < n(); ++i)
            s += std::log(std::fabs(static_cast<double>(lu(i, i))));
        return s;
    }

    double det() const {
        double d = sign;
        for (std::size_t i = 0; i < n(); ++i)
            d *= static_cast<double>(lu(i, i));
        return d;
    }
};

template <typename T>
LuFactors<T> lu_factor(const Matrix<T>& a) {
    if (a.rows != a.cols) {
        throw DimensionError("lu_factor: matrix is not square, " +
                             a.shape_str());
    }
    const std::size_t n = a.rows;
    LuFactors<T> f;
    f.lu = a;
    f.perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;

    const double scale = max_abs(a);
    const double tol =
        scale * static_cast<double>(n) *
        static_cast<double>(std::numeric_limits<T>::epsilon());

    Matrix<T>& m = f.lu;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::fabs(static_cast<double>(m(k, k)));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::fabs(static_cast<double>(m(i, k)));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best <= tol) {
            throw SingularMatrixError(
                "lu_factor: pivot " + std::to_string(best) +
                    " at column " + std::to_string(k) +
                    " is below tolerance " + std::to_string(tol),
                best);
        }
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(m(k, j), m(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
            f.sign = -f.sign;
        }
        const T pivot = m(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const T l = m(i, k) / pivot;
            m(i, k) = l;
            if (l == T(0)) continue;
            T* mi = m.row(i);
            const T* mk = m.row(k);
            for (std::size_t j = k + 1; j < n; ++j) mi[j] -= l * mk[j];
        }
    }
    return f;
}

// Solves a x = b for square a.
template <typename T>
Vector<T> solve_dense(const Matrix<T>& a, const Vector<T>& b) {
    if (b.size() != a.rows) {
        throw DimensionError("solve_dense: rhs length " +
                             std::to_string(b.size()) +
                             " does not match matrix " + a.shape_str());
    }
    LuFactors<T> f = lu_factor(a);
    Vector<T> x = b;
    f.solve_in_place(x);
    return x;
}

// Multi-RHS variant, one system per column of b.
template <typename T>
Matrix<T> solve_dense(const Matrix<T>& a, const Matrix<T>& b) {
    return lu_factor(a).solve(b);
}

template <typename T>
double determinant(const Matrix<T>& a) {
    try {
        return lu_factor(a).det();
    } catch (const SingularMatrixError&) {
        return 0.0;
    }
}

// ---------------------------------------------------------------------------
// Thin Householder QR and the orthogonal initializer built on it.
// ---------------------------------------------------------------------------

// Factors a (n x m, n >= m) as Q R with Q n x m column-orthonormal. The
// columns of Q are sign-fixed so that diag(R) > 0, which pins down an
// otherwise arbitrary sign convention and keeps draws reproducible.
template <typename T>
Matrix<T> qr_orthonormal(Matrix<T> a) {
    const std::size_t n = a.rows, m = a.cols;
    if (n < m) throw DimensionError("qr_orthonormal: expects rows >= cols");

    std::vector<Vector<T>> reflectors(m);
    for (std::size_t k = 0; k < m; ++k) {
        // Householder vector for column k.
        double norm2 = 0.0;
        for (std::size_t i = k; i < n; ++i) {
            const double v = static_cast<double>(a(i, k));
            norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        Vector<T>& v = reflectors[k];
        v.assign(n - k, T(0));
        if (norm == 0.0) {
            v[0] = T(1);
            continue;
        }
        const double x0 = static_cast<double>(a(k, k));
        const double alpha = (x0 >= 0.0) ? -norm : norm;
        double vnorm2 = 0.0;
        for (std::size_t i = k; i < n; ++i) {
            double vi = static_cast<double>(a(i, k));
            if (i == k) vi -= alpha;
            v[i - k] = static_cast<T>(vi);
            vnorm2 += vi * vi;
        }
        const T inv = static_cast<T>(1.0 / std::sqrt(vnorm2));
        for (auto& vi : v) vi *= inv;
        // Apply reflector to the trailing block of a.
        for (std::size_t j = k; j < m; ++j) {
            T dot = T(0);
            for (std::size_t i = k; i < n; ++i) dot += v[i - k] * a(i, j);
            dot *= T(2);
            for (std::size_t i = k; i < n; ++i) a(i, j) -= dot * v[i - k];
        }
    }

    // Form thin Q by applying the reflectors to the first m identity columns.
    Matrix<T> q(n, m);
    for (std::size_t j = 0; j < m; ++j) q(j, j) = T(1);
    for (std::size_t kk = m; kk-- > 0;) {
        const Vector<T>& v = reflectors[kk];
        for (std::size_t j = 0; j < m; ++j) {
            T dot = T(0);
            for (std::size_t i = kk; i < n; ++i) dot += v[i - kk] * q(i, j);
            dot *= T(2);
            for (std::size_t i = kk; i < n; ++i) q(i, j) -= dot * v[i - kk];
        }
    }

    // diag(R) sits in a after the reflections.
    for (std::size_t j = 0; j < m; ++j) {
        if (static_cast<double>(a(j, j)) < 0.0) {
            for (std::size_t i = 0; i < n; ++i) q(i, j) = -q(i, j);
        }
    }
    return q;
}

// Gain-scaled orthogonal matrix: for rows <= cols the rows are orthonormal
// (times gain), and symmetrically for cols <= rows. Same seed, same matrix.
template <typename T>
Matrix<T> orthogonal_init(std::size_t rows, std::size_t cols, double gain,
                          Rng& rng) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("orthogonal_init: zero dimension requested");
    }
    const std::size_t n = std::max(rows, cols);
    const std::size_t m = std::min(rows, cols);
    Matrix<T> g(n, m);
    for (std::size_t i = 0; i < g.size(); ++i)
        g.data[i] = static_cast<T>(rng.gaussian());
    Matrix<T> q = qr_orthonormal(std::move(g));
    Matrix<T> w = (rows >= cols) ? std::move(q) : transpose(q);
    const T tg = static_cast<T>(gain);
    for (auto& v : w.data) v *= tg;
    return w;
}

}  // namespace pcn

#endif  // PCN_MATRIX_HPP
