// Validated quantum states, subspaces and projections.
#pragma once

#include "qcap/linalg.hpp"

#include <string>
#include <tuple>

namespace qcap {

/// Positive semidefinite unit-trace operator.
class DensityState {
 public:
  /// Validates and symmetrizes; throws ValidationError when `m` is not a state
  /// within `tol` (hermiticity, positivity, unit trace).
  static DensityState from_matrix(const CMatrix& m, double tol = kStructTol) {
    if (m.rows() != m.cols() || m.rows() == 0) throw DimensionError("DensityState: matrix must be square");
    const double herm = hermiticity_residual(m);
    if (herm > tol) throw ValidationError("DensityState: hermiticity residual " + std::to_string(herm));
    CMatrix h = symmetrize(m);
    const double tr_err = std::abs(h.trace() - Complex(1.0));
    if (tr_err > tol) throw ValidationError("DensityState: trace deviates from 1 by " + std::to_string(tr_err));
    const double lmin = min_eigenvalue(h);
    if (lmin < -tol) throw ValidationError("DensityState: negative eigenvalue " + std::to_string(lmin));
    return DensityState(std::move(h));
  }

  /// Normalizes a nonzero PSD operator to unit trace.
  static DensityState normalized(const CMatrix& m) {
    const double tr = m.trace().real();
    if (!(tr > kEigenCutoff)) throw DegenerateError("DensityState: cannot normalize operator with trace " + std::to_string(tr));
    return from_matrix(m / tr);
  }

  static DensityState pure(const CVector& v) {
    return from_matrix(v * v.adjoint() / v.squaredNorm());
  }

  static DensityState maximally_mixed(Eigen::Index dim) {
    return DensityState(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
  }

  static DensityState diagonal(std::span<const double> probs) {
    CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(probs.size()), static_cast<Eigen::Index>(probs.size()));
    for (std::size_t i = 0; i < probs.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = probs[i];
    return from_matrix(m);
  }

  Eigen::Index dim() const { return matrix_.rows(); }
  const CMatrix& matrix() const { return matrix_; }

 private:
  explicit DensityState(CMatrix m) : matrix_(std::move(m)) {}
  CMatrix matrix_;
};

inline DensityState tensor(const DensityState& a, const DensityState& b) {
  return DensityState::from_matrix(tensor(a.matrix(), b.matrix()));
}

inline DensityState tensor_power(const DensityState& a, std::size_t l) {
  return DensityState::from_matrix(tensor_power(a.matrix(), l));
}

/// Unit vector.
class PureVector {
 public:
  static PureVector from_amplitudes(const CVector& v, double tol = kStructTol) {
    const double err = std::abs(v.norm() - 1.0);
    if (err > tol) throw ValidationError("PureVector: norm deviates from 1 by " + std::to_string(err));
    return PureVector(v);
  }
  static PureVector normalized(const CVector& v) {
    const double n = v.norm();
    if (!(n > 0)) throw DegenerateError("PureVector: zero vector");
    return PureVector(v / n);
  }

  Eigen::Index dim() const { return amplitudes_.size(); }
  const CVector& amplitudes() const { return amplitudes_; }
  CMatrix projector() const { return amplitudes_ * amplitudes_.adjoint(); }

 private:
  explicit PureVector(CVector v) : amplitudes_(std::move(v)) {}
  CVector amplitudes_;
};

/// Orthonormal basis of a k-dimensional subspace of C^{ambient}.
class SubspaceBasis {
 public:
  static SubspaceBasis from_columns(const CMatrix& columns, double tol = kStructTol) {
    if (columns.cols() == 0 || columns.cols() > columns.rows())
      throw DimensionError("SubspaceBasis: need 1 <= k <= ambient dimension");
    const double res = isometry_residual(columns);
    if (res > tol) throw ValidationError("SubspaceBasis: columns not orthonormal, residual " + std::to_string(res));
    return SubspaceBasis(columns);
  }
  static SubspaceBasis full(Eigen::Index dim) { return SubspaceBasis(CMatrix::Identity(dim, dim)); }
  /// Span of the first k standard basis vectors.
  static SubspaceBasis leading(Eigen::Index ambient, Eigen::Index k) {
    if (k < 1 || k > ambient) throw DimensionError("SubspaceBasis::leading: need 1 <= k <= ambient");
    return SubspaceBasis(CMatrix::Identity(ambient, ambient).leftCols(k));
  }

  Eigen::Index ambient_dim() const { return columns_.rows(); }
  Eigen::Index k() const { return columns_.cols(); }
  const CMatrix& columns() const { return columns_; }
  CMatrix projector() const { return columns_ * columns_.adjoint(); }
  SubspaceBasis leading_subspace(Eigen::Index k) const {
    if (k < 1 || k > this->k()) throw DimensionError("SubspaceBasis: leading subspace larger than basis");
    return SubspaceBasis(columns_.leftCols(k));
  }

 private:
  explicit SubspaceBasis(CMatrix c) : columns_(std::move(c)) {}
  CMatrix columns_;
};

/// Hermitian idempotent.
class OrthogonalProjector {
 public:
  static OrthogonalProjector from_matrix(const CMatrix& p, double tol = kStructTol) {
    if (p.rows() != p.cols()) throw DimensionError("OrthogonalProjector: matrix must be square");
    const double herm = hermiticity_residual(p);
    const double idem = max_abs(p * p - p);
    if (herm > tol || idem > tol)
      throw ValidationError("OrthogonalProjector: not a projection (hermiticity " + std::to_string(herm) +
                            ", idempotence " + std::to_string(idem) + ")");
    return OrthogonalProjector(symmetrize(p));
  }
  static OrthogonalProjector onto(const SubspaceBasis& b) { return OrthogonalProjector(b.projector()); }
  static OrthogonalProjector identity(Eigen::Index dim) { return OrthogonalProjector(CMatrix::Identity(dim, dim)); }
  static OrthogonalProjector zero(Eigen::Index dim) { return OrthogonalProjector(CMatrix::Zero(dim, dim)); }

  Eigen::Index dim() const { return matrix_.rows(); }
  const CMatrix& matrix() const { return matrix_; }
  OrthogonalProjector complement() const {
    return OrthogonalProjector(CMatrix::Identity(dim(), dim()) - matrix_);
  }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(std::llround(matrix_.trace().real())); }

 private:
  explicit OrthogonalProjector(CMatrix m) : matrix_(std::move(m)) {}
  CMatrix matrix_;
};

/// S(ρ) in bits.
inline double von_neumann_entropy(const DensityState& rho) { return operator_entropy(rho.matrix()); }

/// B·B†/k
inline DensityState maximally_mixed(const SubspaceBasis& basis) {
  return DensityState::from_matrix(basis.projector() / static_cast<double>(basis.k()));
}

/// Canonical purification Σ_m √λ_m h_m ⊗ g_m on H_a ⊗ H with H_a = H, where
/// g_m are the eigenvectors of ρ and h_m their complex conjugates.  The
/// reference system is the first tensor factor.
inline PureVector purify(const DensityState& rho) {
  const Spectrum s = eigh(rho.matrix());
  const Eigen::Index d = rho.dim();
  CVector psi = CVector::Zero(d * d);
  for (Eigen::Index m = 0; m < d; ++m) {
    const double lam = s.values(m);
    if (lam <= kEigenCutoff) continue;
    const CVector g = s.vectors.col(m);
    const CVector h = g.conjugate();
    psi += std::sqrt(lam) * tensor(h, g);
  }
  return PureVector::normalized(psi);
}

struct SchmidtDecomposition {
  RVector coefficients;  // descending, nonnegative
  CMatrix basis_a;       // columns a_m
  CMatrix basis_b;       // columns b_m
};

/// ψ = Σ_m c_m a_m ⊗ b_m; only coefficients above the cutoff are kept.
inline SchmidtDecomposition schmidt(const PureVector& psi, Eigen::Index dA, Eigen::Index dB) {
  if (psi.dim() != dA * dB) throw DimensionError("schmidt: vector length does not match dA*dB");
  CMatrix m(dA, dB);
  for (Eigen::Index i = 0; i < dA; ++i)
    for (Eigen::Index j = 0; j < dB; ++j) m(i, j) = psi.amplitudes()(i * dB + j);
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > 1e-12) ++r;
  SchmidtDecomposition out;
  out.coefficients = sv.head(r);
  out.basis_a = svd.matrixU().leftCols(r);
  out.basis_b = svd.matrixV().leftCols(r).conjugate();
  return out;
}

}  // namespace qcap
