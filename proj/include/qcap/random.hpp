// Seeded random ensembles.  Every stream is derived from (master seed, index)
// so results do not depend on evaluation order.
#pragma once

#include "qcap/state.hpp"

#include <cstdint>
#include <random>

namespace qcap {

/// splitmix64 finalizer applied to a seed combined with a stream index.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t master, std::uint64_t index) : engine_(derive_seed(master, index)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return normal_(engine_); }
  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re * M_SQRT1_2, im * M_SQRT1_2};
  }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Matrix with i.i.d. standard complex Gaussian entries.
inline CMatrix ginibre(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  CMatrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = rng.complex_normal();
  return g;
}

/// Haar-distributed isometry C^cols → C^rows: Ginibre + QR with the phases of
/// R's diagonal moved into Q.
inline CMatrix haar_isometry(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const CMatrix g = ginibre(rng, rows, cols);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ() * CMatrix::Identity(rows, cols);
  const CMatrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < cols; ++j) {
    const Complex d = r(j, j);
    const double a = std::abs(d);
    if (a > 0) q.col(j) *= d / a;
  }
  return q;
}

inline CMatrix haar_unitary(Rng& rng, Eigen::Index dim) { return haar_isometry(rng, dim, dim); }

/// ρ = GG†/tr(GG†) with G square complex Ginibre.
inline DensityState random_state(Rng& rng, Eigen::Index dim) {
  const CMatrix g = ginibre(rng, dim, dim);
  const CMatrix m = g * g.adjoint();
  return DensityState::from_matrix(m / m.trace().real());
}

inline PureVector random_pure(Rng& rng, Eigen::Index dim) {
  CVector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.complex_normal();
  return PureVector::normalized(v);
}

/// Random Hermitian matrix with Gaussian entries.
inline CMatrix random_hermitian(Rng& rng, Eigen::Index dim) {
  const CMatrix g = ginibre(rng, dim, dim);
  return (g + g.adjoint()) / 2.0;
}

}  // namespace qcap
