// Frequency-typical projections, the exponent functions h(l) and φ(δ), and
// reduced operations clipped by environment typicality.
#pragma once

#include "qcap/channels.hpp"

#include <cmath>
#include <vector>

namespace qcap {

struct ExponentBook {
  int d = 0;
  int kappa = 0;
  int l = 0;
  double delta = 0.0;
  double h_l = 0.0;        // (dκ/l) log₂(l+1)
  double phi_delta = 0.0;  // −δ log₂(δ/(dκ))
};

inline double h_of_l(int d, int kappa, int l) {
  return static_cast<double>(d) * kappa / l * std::log2(static_cast<double>(l) + 1.0);
}

inline double phi_of_delta(int d, int kappa, double delta) {
  return -delta * std::log2(delta / (static_cast<double>(d) * kappa));
}

inline ExponentBook exponents(int d, int kappa, int l, double delta) {
  if (d < 1 || kappa < 1) throw ValidationError("exponents: dimensions must be positive");
  if (l < 1) throw ValidationError("exponents: l must be at least 1");
  if (!(delta > 0.0 && delta < 0.5)) throw ValidationError("exponents: delta must lie in (0, 1/2)");
  return {d, kappa, l, delta, h_of_l(d, kappa, l), phi_of_delta(d, kappa, delta)};
}

struct TypeClass {
  std::vector<int> counts;   // occurrences of each eigenvalue index
  double size = 0.0;         // multinomial coefficient
  double probability = 0.0;  // Π λ_i^{counts_i}, one sequence
};

namespace detail {

inline double multinomial(const std::vector<int>& counts) {
  int total = 0;
  double lg = 0.0;
  for (int c : counts) {
    total += c;
    lg -= std::lgamma(c + 1.0);
  }
  lg += std::lgamma(total + 1.0);
  return std::round(std::exp(lg));
}

inline void compositions(int remaining, std::size_t slot, std::vector<int>& cur,
                         std::vector<std::vector<int>>& out) {
  if (slot + 1 == cur.size()) {
    cur[slot] = remaining;
    out.push_back(cur);
    return;
  }
  for (int c = remaining; c >= 0; --c) {
    cur[slot] = c;
    compositions(remaining - c, slot + 1, cur, out);
  }
}

}  // namespace detail

/// Whether counts/l lies within δ of the spectrum in max norm and avoids
/// zero eigenvalues.
inline bool is_typical(const std::vector<int>& counts, const RVector& spectrum, double delta, int l) {
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double lam = spectrum(static_cast<Eigen::Index>(i));
    if (lam <= kEigenCutoff && counts[i] > 0) return false;
    if (std::abs(static_cast<double>(counts[i]) / l - std::max(lam, 0.0)) > delta + 1e-12) return false;
  }
  return true;
}

/// Typical type classes of a spectrum, without forming any projector.
inline std::vector<TypeClass> typical_types(const RVector& spectrum, double delta, int l) {
  if (l < 1) throw ValidationError("typical_types: l must be at least 1");
  if (!(delta > 0)) throw ValidationError("typical_types: delta must be positive");
  std::vector<std::vector<int>> all;
  std::vector<int> cur(static_cast<std::size_t>(spectrum.size()), 0);
  detail::compositions(l, 0, cur, all);
  std::vector<TypeClass> out;
  for (auto& c : all) {
    if (!is_typical(c, spectrum, delta, l)) continue;
    double logp = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c[i] > 0) logp += c[i] * std::log(spectrum(static_cast<Eigen::Index>(i)));
    const double size = detail::multinomial(c);
    out.push_back({std::move(c), size, std::exp(logp)});
  }
  return out;
}

/// tr(ρ^{⊗l} q_{δ,l}) from the type classes.
inline double typical_weight(const DensityState& rho, double delta, int l) {
  double w = 0.0;
  for (const auto& t : typical_types(eigh(rho.matrix()).values, delta, l)) w += t.size * t.probability;
  return w;
}

struct TypicalProjector {
  Eigen::Index base_dim = 0;
  int l = 0;
  double delta = 0.0;
  OrthogonalProjector projector = OrthogonalProjector::identity(1);
  CMatrix basis;  // orthonormal columns spanning the range, one per typical sequence
  Eigen::Index rank = 0;
  std::vector<TypeClass> type_classes;
  RVector base_spectrum;
  CMatrix base_eigenvectors;

  /// Largest Π λ over included sequences (0 when empty).
  double max_probability() const {
    double m = 0.0;
    for (const auto& t : type_classes) m = std::max(m, t.probability);
    return m;
  }
  double weight() const {
    double w = 0.0;
    for (const auto& t : type_classes) w += t.size * t.probability;
    return w;
  }
};

/// Projector onto the eigenbasis sequences of ρ^{⊗l} whose frequencies are δ-typical.
inline TypicalProjector frequency_typical_projector(const DensityState& rho, double delta, int l,
                                                   std::size_t budget = kDefaultBudgetDim) {
  if (l < 1) throw ValidationError("frequency_typical_projector: l must be at least 1");
  if (!(delta > 0)) throw ValidationError("frequency_typical_projector: delta must be positive");
  const Eigen::Index d = rho.dim();
  const std::size_t total = ipow(static_cast<std::size_t>(d), static_cast<std::size_t>(l));
  check_budget(total, budget, "typical projector on (" + std::to_string(d) + ")^" + std::to_string(l));
  const Spectrum sp = eigh(rho.matrix());
  TypicalProjector tp;
  tp.base_dim = d;
  tp.l = l;
  tp.delta = delta;
  tp.base_spectrum = sp.values;
  tp.base_eigenvectors = sp.vectors;
  tp.type_classes = typical_types(sp.values, delta, l);

  std::vector<CVector> cols;
  std::vector<int> seq(static_cast<std::size_t>(l), 0), counts(static_cast<std::size_t>(d), 0);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    std::fill(counts.begin(), counts.end(), 0);
    for (int t = l - 1; t >= 0; --t) {
      seq[static_cast<std::size_t>(t)] = static_cast<int>(c % static_cast<std::size_t>(d));
      c /= static_cast<std::size_t>(d);
      ++counts[static_cast<std::size_t>(seq[static_cast<std::size_t>(t)])];
    }
    if (!is_typical(counts, sp.values, delta, l)) continue;
    CVector v = sp.vectors.col(seq[0]);
    for (int t = 1; t < l; ++t) v = tensor(v, CVector(sp.vectors.col(seq[static_cast<std::size_t>(t)])));
    cols.push_back(std::move(v));
  }
  const Eigen::Index dim = static_cast<Eigen::Index>(total);
  tp.rank = static_cast<Eigen::Index>(cols.size());
  tp.basis = CMatrix(dim, tp.rank);
  for (Eigen::Index i = 0; i < tp.rank; ++i) tp.basis.col(i) = cols[static_cast<std::size_t>(i)];
  tp.projector = OrthogonalProjector::from_matrix(tp.basis * tp.basis.adjoint());
  return tp;
}

/// π_{δ,l} = q_{δ,l} / tr q_{δ,l}
inline DensityState typical_state(const TypicalProjector& q) {
  if (q.rank == 0)
    throw DegenerateError("typical_state: no typical sequences for delta=" + std::to_string(q.delta) +
                          ", l=" + std::to_string(q.l));
  return DensityState::from_matrix(q.projector.matrix() / static_cast<double>(q.rank));
}

inline DensityState typical_state(const DensityState& rho, double delta, int l,
                                  std::size_t budget = kDefaultBudgetDim) {
  return typical_state(frequency_typical_projector(rho, delta, l, budget));
}

struct ReducedOperation {
  KrausMap base;
  DensityState pi_g;
  double delta = 0.0;
  int l = 0;
  KrausMap map;  // on (C^{din})^{⊗l} → (C^{dout})^{⊗l}, trace decreasing
  std::size_t kraus_count = 0;
  TypicalProjector env_projector;
  double env_entropy = 0.0;  // S(σ_e) = S_e(π_G, 𝒩)
};

/// 𝒩_{δ,l}(a) = tr_env((1 ⊗ q^e) V^{⊗l} a V^{⊗l†} (1 ⊗ q^e)) with q^e the
/// typical projector of σ_e = 𝒩^c(π_G).  Kraus operators are ⊗_t L_{x_t} over
/// typical environment words x, L_x = Σ_i conj(w_x[i]) K_i.
inline ReducedOperation reduced_operation(const KrausMap& n, const DensityState& pi_g, double delta, int l,
                                          std::size_t budget = kDefaultBudgetDim) {
  if (!n.trace_preserving()) throw ValidationError("reduced_operation: channel must be trace preserving");
  if (pi_g.dim() != n.dim_in()) throw DimensionError("reduced_operation: state and channel dimensions differ");
  const KrausMap m = minimal_kraus(n);
  const std::size_t big = ipow(static_cast<std::size_t>(std::max(n.dim_in(), n.dim_out())), static_cast<std::size_t>(l));
  check_budget(big, budget, "reduced operation on (" + std::to_string(std::max(n.dim_in(), n.dim_out())) + ")^" +
                                std::to_string(l));
  const DensityState sigma_e = DensityState::normalized(apply(complementary(m), pi_g));
  TypicalProjector qe = frequency_typical_projector(sigma_e, delta, l, budget);

  const Eigen::Index de = sigma_e.dim();
  std::vector<CMatrix> site_ops;
  for (Eigen::Index x = 0; x < de; ++x) {
    CMatrix lx = CMatrix::Zero(m.dim_out(), m.dim_in());
    for (Eigen::Index i = 0; i < de; ++i) lx += std::conj(qe.base_eigenvectors(i, x)) * m.kraus_ops()[i];
    site_ops.push_back(std::move(lx));
  }
  std::vector<CMatrix> ops;
  const std::size_t words = ipow(static_cast<std::size_t>(de), static_cast<std::size_t>(l));
  std::vector<int> seq(static_cast<std::size_t>(l)), counts(static_cast<std::size_t>(de));
  for (std::size_t code = 0; code < words; ++code) {
    std::size_t c = code;
    std::fill(counts.begin(), counts.end(), 0);
    for (int t = l - 1; t >= 0; --t) {
      seq[static_cast<std::size_t>(t)] = static_cast<int>(c % static_cast<std::size_t>(de));
      c /= static_cast<std::size_t>(de);
      ++counts[static_cast<std::size_t>(seq[static_cast<std::size_t>(t)])];
    }
    if (!is_typical(counts, qe.base_spectrum, delta, l)) continue;
    CMatrix k = site_ops[static_cast<std::size_t>(seq[0])];
    for (int t = 1; t < l; ++t) k = tensor(k, site_ops[static_cast<std::size_t>(seq[static_cast<std::size_t>(t)])]);
    ops.push_back(std::move(k));
  }
  const Eigen::Index din_l = static_cast<Eigen::Index>(ipow(static_cast<std::size_t>(n.dim_in()), static_cast<std::size_t>(l)));
  const Eigen::Index dout_l = static_cast<Eigen::Index>(ipow(static_cast<std::size_t>(n.dim_out()), static_cast<std::size_t>(l)));
  const std::size_t count = ops.size();
  KrausMap map(std::move(ops), din_l, dout_l);
  const double se = von_neumann_entropy(sigma_e);
  return {n, pi_g, delta, l, std::move(map), count, std::move(qe), se};
}

/// 𝒬 ∘ 𝒩 with 𝒬(a) = q a q.
inline KrausMap clip_output(const KrausMap& n, const OrthogonalProjector& q) {
  if (q.dim() != n.dim_out()) throw DimensionError("clip_output: projector does not match map output");
  return postcompose(q.matrix(), n);
}

inline KrausMap clip_output(const KrausMap& n, const TypicalProjector& q) { return clip_output(n, q.projector); }

struct L2BoundCheck {
  double lhs = 0.0;  // ‖n̂(π_G^{⊗l})‖₂²
  double rhs = 0.0;  // 2^{−l(S_out − φ)}
  bool holds = false;
  double sum_of_squares = 0.0;  // Σ_m ‖K_m π K_m†‖₂²
  bool superadditive = false;   // ‖Σ A_m‖₂² ≥ Σ ‖A_m‖₂²
};

inline L2BoundCheck l2_bound_check(const KrausMap& nhat, const DensityState& pi_g_l, double s_out, double phi, int l) {
  L2BoundCheck r;
  CMatrix total = CMatrix::Zero(nhat.dim_out(), nhat.dim_out());
  for (const auto& k : nhat.kraus_ops()) {
    const CMatrix a = k * pi_g_l.matrix() * k.adjoint();
    r.sum_of_squares += a.squaredNorm();
    total += a;
  }
  r.lhs = total.squaredNorm();
  r.rhs = std::exp2(-l * (s_out - phi));
  r.holds = r.lhs <= r.rhs + 1e-12;
  r.superadditive = r.lhs + 1e-12 >= r.sum_of_squares;
  return r;
}

}  // namespace qcap
