// Dense complex linear algebra used by every other part of qcap.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcap {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Tolerance for structural invariants (hermiticity, trace, isometry).
inline constexpr double kStructTol = 1e-9;
/// Eigenvalues below this are exact zeros for logs, inverses and entropies.
inline constexpr double kEigenCutoff = 1e-12;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Default cap on the largest dense composite dimension formed by a computation.
inline constexpr std::size_t kDefaultBudgetDim = 4096;

inline void check_budget(std::size_t dim, std::size_t budget, const std::string& what) {
  if (dim > budget) {
    throw BudgetError(what + " has dimension " + std::to_string(dim) +
                      " which exceeds the dimension budget " + std::to_string(budget));
  }
}

/// Integer power with overflow saturation (dimension bookkeeping only).
inline std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (base != 0 && r > static_cast<std::size_t>(-1) / base) return static_cast<std::size_t>(-1);
    r *= base;
  }
  return r;
}

/// Kronecker product a ⊗ b.
inline CMatrix tensor(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline CVector tensor(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

/// a^{⊗l}
inline CMatrix tensor_power(const CMatrix& a, std::size_t l) {
  if (l == 0) return CMatrix::Identity(1, 1);
  CMatrix out = a;
  for (std::size_t i = 1; i < l; ++i) out = tensor(out, a);
  return out;
}

enum class Subsystem { A, B };

/// Traces out `side` of an operator on C^{dA} ⊗ C^{dB}.
inline CMatrix partial_trace(const CMatrix& m, Eigen::Index dA, Eigen::Index dB, Subsystem side) {
  if (m.rows() != m.cols() || m.rows() != dA * dB) {
    throw DimensionError("partial_trace: operator is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected square of size " +
                         std::to_string(dA * dB));
  }
  if (side == Subsystem::B) {
    CMatrix out = CMatrix::Zero(dA, dA);
    for (Eigen::Index i = 0; i < dA; ++i)
      for (Eigen::Index j = 0; j < dA; ++j) out(i, j) = m.block(i * dB, j * dB, dB, dB).trace();
    return out;
  }
  CMatrix out = CMatrix::Zero(dB, dB);
  for (Eigen::Index i = 0; i < dA; ++i) out += m.block(i * dB, i * dB, dB, dB);
  return out;
}

/// Reduces an operator on ⊗_t C^{dims[t]} to the factors with keep[t] == true
/// (kept factors stay in their original order).
inline CMatrix reduce(const CMatrix& m, std::span<const Eigen::Index> dims,
                      std::span<const bool> keep) {
  if (dims.size() != keep.size()) throw DimensionError("reduce: dims/keep length mismatch");
  Eigen::Index total = 1;
  for (auto d : dims) total *= d;
  if (m.rows() != total || m.cols() != total) throw DimensionError("reduce: operator size mismatch");
  const std::size_t n = dims.size();
  Eigen::Index kept = 1;
  for (std::size_t t = 0; t < n; ++t)
    if (keep[t]) kept *= dims[t];

  // Map each full index to (kept index, traced index).
  std::vector<Eigen::Index> kidx(total), tidx(total);
  std::vector<Eigen::Index> digits(n);
  for (Eigen::Index idx = 0; idx < total; ++idx) {
    Eigen::Index r = idx;
    for (std::size_t t = n; t-- > 0;) {
      digits[t] = r % dims[t];
      r /= dims[t];
    }
    Eigen::Index k = 0, tr = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (keep[t]) k = k * dims[t] + digits[t];
      else tr = tr * dims[t] + digits[t];
    }
    kidx[idx] = k;
    tidx[idx] = tr;
  }
  CMatrix out = CMatrix::Zero(kept, kept);
  for (Eigen::Index i = 0; i < total; ++i)
    for (Eigen::Index j = 0; j < total; ++j)
      if (tidx[i] == tidx[j]) out(kidx[i], kidx[j]) += m(i, j);
  return out;
}

inline double hermiticity_residual(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline CMatrix symmetrize(const CMatrix& m) { return (m + m.adjoint()) / 2.0; }

/// Spectral decomposition of a Hermitian matrix, eigenvalues descending.
struct Spectrum {
  RVector values;
  CMatrix vectors;  // columns
};

namespace detail {
inline void normalize_phase(Eigen::Ref<CVector> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-10) {
      v *= std::conj(v(i)) / std::abs(v(i));
      return;
    }
  }
}

inline bool lex_greater(const CVector& a, const CVector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double dr = a(i).real() - b(i).real();
    if (std::abs(dr) > 1e-10) return dr > 0;
    const double di = a(i).imag() - b(i).imag();
    if (std::abs(di) > 1e-10) return di > 0;
  }
  return false;
}
}  // namespace detail

/// Eigendecomposition with a deterministic basis: eigenvalues descending, each
/// eigenvector phased so its first nonzero entry is real positive, and ties in
/// the eigenvalue broken lexicographically on the eigenvector entries.
inline Spectrum eigh(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(symmetrize(m));
  const Eigen::Index n = m.rows();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  CMatrix vecs = es.eigenvectors();
  for (Eigen::Index i = 0; i < n; ++i) {
    CVector col = vecs.col(i);
    detail::normalize_phase(col);
    vecs.col(i) = col;
  }
  const RVector& vals = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (std::abs(vals(a) - vals(b)) > kEigenCutoff) return vals(a) > vals(b);
    return detail::lex_greater(vecs.col(a), vecs.col(b));
  });
  Spectrum s{RVector(n), CMatrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    s.values(i) = vals(order[i]);
    s.vectors.col(i) = vecs.col(order[i]);
  }
  return s;
}

inline RVector eigenvalues(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  RVector v = es.eigenvalues();
  std::sort(v.data(), v.data() + v.size(), std::greater<>());
  return v;
}

inline double min_eigenvalue(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  return eigenvalues(m).minCoeff();
}

inline double max_eigenvalue(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  return eigenvalues(m).maxCoeff();
}

/// f applied to the spectrum of a Hermitian matrix.
inline CMatrix hermitian_function(const CMatrix& m, const std::function<double(double)>& f) {
  const Spectrum s = eigh(m);
  RVector fv(s.values.size());
  for (Eigen::Index i = 0; i < fv.size(); ++i) fv(i) = f(s.values(i));
  return s.vectors * fv.cast<Complex>().asDiagonal() * s.vectors.adjoint();
}

/// Square root of a PSD matrix; negative float noise is clipped to zero.
inline CMatrix psd_sqrt(const CMatrix& m) {
  return hermitian_function(m, [](double x) { return x > 0 ? std::sqrt(x) : 0.0; });
}

/// Moore-Penrose inverse square root restricted to the support of a PSD matrix.
inline CMatrix psd_inv_sqrt(const CMatrix& m) {
  return hermitian_function(m, [](double x) { return x > kEigenCutoff ? 1.0 / std::sqrt(x) : 0.0; });
}

/// Base-two logarithm on the support; zero on the kernel.
inline CMatrix support_log2(const CMatrix& m) {
  return hermitian_function(m, [](double x) { return x > kEigenCutoff ? std::log2(x) : 0.0; });
}

/// Orthonormal basis of the support (eigenvalues above cutoff) of a PSD matrix.
inline CMatrix support_basis(const CMatrix& m, double cutoff = kEigenCutoff) {
  const Spectrum s = eigh(m);
  Eigen::Index r = 0;
  while (r < s.values.size() && s.values(r) > cutoff) ++r;
  return s.vectors.leftCols(r);
}

/// −Σ λ log₂ λ over the spectrum of a PSD operator (not necessarily unit trace).
inline double entropy_of_spectrum(const RVector& values) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double x = values(i);
    if (x > kEigenCutoff) s -= x * std::log2(x);
  }
  return s;
}

inline double operator_entropy(const CMatrix& m) { return entropy_of_spectrum(eigenvalues(m)); }

inline double shannon_entropy(std::span<const double> p) {
  double s = 0.0;
  for (double x : p)
    if (x > kEigenCutoff) s -= x * std::log2(x);
  return s;
}

/// Sum of singular values.
inline double trace_norm(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(a);
  return svd.singularValues().sum();
}

/// Hilbert-Schmidt (Frobenius) norm √tr(a†a).
inline double hs_norm(const CMatrix& a) { return a.norm(); }

/// tr(a†b)
inline Complex hs_inner(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("hs_inner: shape mismatch");
  return (a.adjoint() * b).trace();
}

inline double max_abs(const CMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

inline double isometry_residual(const CMatrix& v) {
  return max_abs(v.adjoint() * v - CMatrix::Identity(v.cols(), v.cols()));
}

inline bool is_unitary(const CMatrix& u, double tol = 1e-10) {
  return u.rows() == u.cols() && isometry_residual(u) <= tol;
}

inline CMatrix basis_projector(Eigen::Index dim, Eigen::Index index) {
  CMatrix p = CMatrix::Zero(dim, dim);
  p(index, index) = 1.0;
  return p;
}

inline CVector basis_vector(Eigen::Index dim, Eigen::Index index) {
  CVector v = CVector::Zero(dim);
  v(index) = 1.0;
  return v;
}

/// Euclidean projection of a real vector onto the probability simplex.
inline RVector project_to_simplex(const RVector& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cumsum += u[i];
    const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0) theta = t;
  }
  RVector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = std::max(v(i) - theta, 0.0);
  return out;
}

}  // namespace qcap
