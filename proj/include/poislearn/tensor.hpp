#pragma once
// Dense row-major matrices/vectors of double plus the arithmetic kernels
// shared by the plain and taped evaluation paths.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace poislearn {

using Vec = std::vector<double>;

struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * c, 0.0) {}

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.d[0] = v;
    return t;
  }
  // Column vector n x 1.
  static Tensor col_vec(std::span<const double> xs) {
    Tensor t(static_cast<int>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) t.d[i] = xs[i];
    return t;
  }

  double& operator()(int i, int j) { return d[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return d[static_cast<std::size_t>(i) * cols + j]; }

  std::size_t size() const { return d.size(); }
  bool empty() const { return d.empty(); }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  bool is_vector() const { return cols == 1; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  double s() const { return d[0]; }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  Vec to_vec() const { return d; }
};

inline void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() +
                              " and " + b.shape_str());
}

inline void shape_fail(const char* op, const Tensor& a) {
  throw std::invalid_argument(std::string(op) + ": bad shape " + a.shape_str());
}

// Numerically stable scalar activations.
inline double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail("add", a, b);
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] += b.d[i];
  return r;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail("sub", a, b);
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] -= b.d[i];
  return r;
}

// Elementwise product; either side may be a 1x1 scalar broadcast.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.is_scalar() && !b.is_scalar()) {
    Tensor r = b;
    for (std::size_t i = 0; i < r.size(); ++i) r.d[i] *= a.s();
    return r;
  }
  if (b.is_scalar()) {
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.d[i] *= b.s();
    return r;
  }
  if (!a.same_shape(b)) shape_fail("mul", a, b);
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] *= b.d[i];
  return r;
}

// Elementwise quotient; divisor may be a 1x1 scalar broadcast.
inline Tensor div(const Tensor& a, const Tensor& b) {
  if (b.is_scalar()) {
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.d[i] /= b.s();
    return r;
  }
  if (!a.same_shape(b)) shape_fail("div", a, b);
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] /= b.d[i];
  return r;
}

inline Tensor neg(const Tensor& a) {
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] = -r.d[i];
  return r;
}

// A (m x n) times column vector b (n x 1).
inline Tensor matvec(const Tensor& a, const Tensor& b) {
  if (!b.is_vector() || a.cols != b.rows) shape_fail("matvec", a, b);
  Tensor r(a.rows, 1);
  for (int i = 0; i < a.rows; ++i) {
    double acc = 0.0;
    const double* ai = a.d.data() + static_cast<std::size_t>(i) * a.cols;
    for (int j = 0; j < a.cols; ++j) acc += ai[j] * b.d[j];
    r.d[i] = acc;
  }
  return r;
}

// A^T (n x m) times column vector b (m x 1), without forming the transpose.
inline Tensor matvec_t(const Tensor& a, const Tensor& b) {
  if (!b.is_vector() || a.rows != b.rows) shape_fail("matvec_t", a, b);
  Tensor r(a.cols, 1);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.d.data() + static_cast<std::size_t>(i) * a.cols;
    double bi = b.d[i];
    for (int j = 0; j < a.cols; ++j) r.d[j] += ai[j] * bi;
  }
  return r;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows) shape_fail("matmul", a, b);
  Tensor r(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.d.data() + static_cast<std::size_t>(k) * b.cols;
      double* ri = r.d.data() + static_cast<std::size_t>(i) * b.cols;
      for (int j = 0; j < b.cols; ++j) ri[j] += aik * bk[j];
    }
  }
  return r;
}

// Inner product of two equal-shape tensors, returned as 1x1.
inline Tensor dot(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_fail("dot", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.d[i] * b.d[i];
  return Tensor::scalar(acc);
}

inline Tensor cross3(const Tensor& a, const Tensor& b) {
  if (a.rows != 3 || !a.is_vector() || b.rows != 3 || !b.is_vector()) shape_fail("cross3", a, b);
  Tensor r(3, 1);
  r.d[0] = a.d[1] * b.d[2] - a.d[2] * b.d[1];
  r.d[1] = a.d[2] * b.d[0] - a.d[0] * b.d[2];
  r.d[2] = a.d[0] * b.d[1] - a.d[1] * b.d[0];
  return r;
}

inline Tensor softplus(const Tensor& a) {
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] = softplus(r.d[i]);
  return r;
}

inline Tensor sigmoid(const Tensor& a) {
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] = sigmoid(r.d[i]);
  return r;
}

inline Tensor exp(const Tensor& a) {
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] = std::exp(r.d[i]);
  return r;
}

inline Tensor log(const Tensor& a) {
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] = std::log(r.d[i]);
  return r;
}

inline Tensor square(const Tensor& a) {
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] *= r.d[i];
  return r;
}

inline Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.d) acc += v;
  return Tensor::scalar(acc);
}

inline Tensor l2norm(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.d) acc += v * v;
  return Tensor::scalar(std::sqrt(acc));
}

// Row i of a matrix as a column vector.
inline Tensor row(const Tensor& a, int i) {
  if (i < 0 || i >= a.rows) shape_fail("row", a);
  Tensor r(a.cols, 1);
  for (int j = 0; j < a.cols; ++j) r.d[j] = a(i, j);
  return r;
}

// Column j of a matrix as a column vector.
inline Tensor col(const Tensor& a, int j) {
  if (j < 0 || j >= a.cols) shape_fail("col", a);
  Tensor r(a.rows, 1);
  for (int i = 0; i < a.rows; ++i) r.d[i] = a(i, j);
  return r;
}

// Number of strict upper-triangle entries of an n x n matrix.
constexpr int upper_count(int n) { return n * (n - 1) / 2; }

// Inverse of upper_count; -1 when m is not of the form n(n-1)/2.
inline int dim_from_upper_count(int m) {
  for (int n = 2; n <= 64; ++n)
    if (upper_count(n) == m) return n;
  return -1;
}

// Assemble a skew-symmetric n x n matrix from its strict upper triangle,
// given in row-major order (0,1),(0,2),...,(n-2,n-1).
inline Tensor skew_from_upper(const Tensor& v) {
  if (!v.is_vector()) shape_fail("skew_from_upper", v);
  int n = dim_from_upper_count(v.rows);
  if (n < 0) shape_fail("skew_from_upper", v);
  Tensor r(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++k) {
      r(i, j) = v.d[k];
      r(j, i) = -v.d[k];
    }
  }
  return r;
}

// Plain-path helpers (not tape primitives).

inline Tensor scale(const Tensor& a, double c) {
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.d[i] *= c;
  return r;
}

inline double frobenius(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.d) acc += v * v;
  return std::sqrt(acc);
}

// LU decomposition with partial pivoting, for small dense systems.
namespace detail {
struct Lu {
  Tensor a;
  std::vector<int> piv;
  double sign = 1.0;
  bool singular = false;
};

inline Lu lu_factor(Tensor a) {
  if (a.rows != a.cols) shape_fail("lu_factor", a);
  int n = a.rows;
  Lu f{std::move(a), std::vector<int>(n), 1.0, false};
  for (int i = 0; i < n; ++i) f.piv[i] = i;
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::fabs(f.a(k, k));
    for (int i = k + 1; i < n; ++i) {
      double v = std::fabs(f.a(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best == 0.0) {
      f.singular = true;
      continue;
    }
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(f.a(k, j), f.a(p, j));
      std::swap(f.piv[k], f.piv[p]);
      f.sign = -f.sign;
    }
    for (int i = k + 1; i < n; ++i) {
      f.a(i, k) /= f.a(k, k);
      double lik = f.a(i, k);
      if (lik == 0.0) continue;
      for (int j = k + 1; j < n; ++j) f.a(i, j) -= lik * f.a(k, j);
    }
  }
  return f;
}
}  // namespace detail

inline double determinant(const Tensor& a) {
  detail::Lu f = detail::lu_factor(a);
  if (f.singular) return 0.0;
  double det = f.sign;
  for (int i = 0; i < f.a.rows; ++i) det *= f.a(i, i);
  return det;
}

// Solve A x = b; throws on a singular matrix.
inline Vec solve_linear(const Tensor& a, const Vec& b) {
  if (a.rows != static_cast<int>(b.size())) {
    throw std::invalid_argument("solve_linear: size mismatch");
  }
  detail::Lu f = detail::lu_factor(a);
  if (f.singular) throw std::runtime_error("solve_linear: singular matrix");
  int n = a.rows;
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = b[f.piv[i]];
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) x[i] -= f.a(i, j) * x[j];
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= f.a(i, j) * x[j];
    x[i] /= f.a(i, i);
  }
  return x;
}

inline double max_abs(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Tensor& t) { return all_finite(t.d); }

}  // namespace poislearn
