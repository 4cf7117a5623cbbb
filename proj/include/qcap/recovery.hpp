// Recovery operations: the transpose channel and the projected-gradient
// maximisation of the entanglement fidelity over recovery Choi matrices.
#pragma once

#include "qcap/channels.hpp"

#include <cstdint>
#include <vector>

namespace qcap {

enum class StepRule { fixed, backtracking };

struct OptimizerConfig {
  int max_iters = 2000;
  double tolerance = 1e-7;
  int restarts = 4;
  StepRule step_rule = StepRule::fixed;
  std::uint64_t seed = 0;
  double softmin_temp = 0.1;  // bits

  void validate() const {
    if (!(tolerance > 0)) throw ValidationError("OptimizerConfig: tolerance must be positive");
    if (restarts < 1) throw ValidationError("OptimizerConfig: restarts must be at least 1");
    if (max_iters < 1) throw ValidationError("OptimizerConfig: max_iters must be at least 1");
  }
};

namespace detail {

/// Recovery problem restricted to supp(ρ) on the input and supp(𝒩(ρ)) on the
/// output; the optimum is unchanged by this restriction.
struct RecoveryProblem {
  CMatrix in_basis;               // din × r, support of ρ
  CMatrix out_basis;              // dout × s, support of 𝒩(ρ)
  CMatrix rho;                    // r × r
  std::vector<CMatrix> kraus;     // s × r
  CMatrix objective;              // (r·s) × (r·s), F_e = tr(C J)
  Eigen::Index r = 0;
  Eigen::Index s = 0;
};

inline RecoveryProblem make_recovery_problem(const DensityState& rho, const KrausMap& n) {
  if (rho.dim() != n.dim_in()) throw DimensionError("recovery: state and map input dimensions differ");
  RecoveryProblem p;
  p.in_basis = support_basis(rho.matrix());
  p.r = p.in_basis.cols();
  p.rho = p.in_basis.adjoint() * rho.matrix() * p.in_basis;
  CMatrix sigma = CMatrix::Zero(n.dim_out(), n.dim_out());
  std::vector<CMatrix> restricted_in;
  for (const auto& k : n.kraus_ops()) {
    restricted_in.push_back(k * p.in_basis);
    sigma += restricted_in.back() * p.rho * restricted_in.back().adjoint();
  }
  p.out_basis = support_basis(sigma, 1e-13);
  p.s = p.out_basis.cols();
  const Eigen::Index dim = p.r * p.s;
  p.objective = CMatrix::Zero(dim, dim);
  for (const auto& a : restricted_in) {
    CMatrix k = p.out_basis.adjoint() * a;
    // v = vec_rowmajor((K ρ)†), so tr(R K ρ) = v† vec(R) for R of shape r × s.
    const CMatrix m = (k * p.rho).adjoint();
    CVector v(dim);
    for (Eigen::Index x = 0; x < p.r; ++x)
      for (Eigen::Index y = 0; y < p.s; ++y) v(x * p.s + y) = m(x, y);
    p.objective.noalias() += v * v.adjoint();
    p.kraus.push_back(std::move(k));
  }
  return p;
}

inline CMatrix kraus_to_j(const std::vector<CMatrix>& ops, Eigen::Index r, Eigen::Index s) {
  CMatrix j = CMatrix::Zero(r * s, r * s);
  for (const auto& k : ops) {
    CVector v(r * s);
    for (Eigen::Index x = 0; x < r; ++x)
      for (Eigen::Index y = 0; y < s; ++y) v(x * s + y) = k(x, y);
    j.noalias() += v * v.adjoint();
  }
  return j;
}

inline std::vector<CMatrix> j_to_kraus(const CMatrix& j, Eigen::Index r, Eigen::Index s) {
  const Spectrum sp = eigh(j);
  std::vector<CMatrix> ops;
  for (Eigen::Index m = 0; m < sp.values.size(); ++m) {
    if (sp.values(m) <= kEigenCutoff) continue;
    const double w = std::sqrt(sp.values(m));
    CMatrix k(r, s);
    for (Eigen::Index x = 0; x < r; ++x)
      for (Eigen::Index y = 0; y < s; ++y) k(x, y) = w * sp.vectors(x * s + y, m);
    ops.push_back(std::move(k));
  }
  return ops;
}

/// Σ_x J_{xx}: the partial trace over the recovery output index.
inline CMatrix trace_out(const CMatrix& j, Eigen::Index r, Eigen::Index s) {
  CMatrix t = CMatrix::Zero(s, s);
  for (Eigen::Index x = 0; x < r; ++x) t += j.block(x * s, x * s, s, s);
  return t;
}

inline CMatrix project_psd(const CMatrix& m) {
  const Spectrum sp = eigh(m);
  RVector v = sp.values.cwiseMax(0.0);
  return sp.vectors * v.cast<Complex>().asDiagonal() * sp.vectors.adjoint();
}

inline CMatrix project_affine(const CMatrix& m, Eigen::Index r, Eigen::Index s) {
  const CMatrix excess = (trace_out(m, r, s) - CMatrix::Identity(s, s)) / static_cast<double>(r);
  CMatrix out = m;
  for (Eigen::Index x = 0; x < r; ++x) out.block(x * s, x * s, s, s) -= excess;
  return out;
}

/// Rescales the input index so tr_out J = I holds exactly.
inline CMatrix restore_trace_condition(const CMatrix& j, Eigen::Index r, Eigen::Index s) {
  const CMatrix t = trace_out(j, r, s);
  if (min_eigenvalue(t) <= kEigenCutoff) return project_affine(j, r, s);
  const CMatrix m = psd_inv_sqrt(t);
  CMatrix out = j;
  for (Eigen::Index x = 0; x < r; ++x)
    for (Eigen::Index y = 0; y < r; ++y) out.block(x * s, y * s, s, s) = m * j.block(x * s, y * s, s, s) * m;
  return symmetrize(out);
}

/// Projection onto {J ⪰ 0, tr_out J = I} by Dykstra's alternating scheme
/// (the correction term is only needed for the cone), finished by an exact
/// feasibility restoration.
inline CMatrix project_feasible(const CMatrix& y, Eigen::Index r, Eigen::Index s, int max_rounds = 500,
                                double tol = 1e-12) {
  CMatrix x = project_affine(y, r, s);
  CMatrix corr = CMatrix::Zero(y.rows(), y.cols());
  for (int k = 0; k < max_rounds; ++k) {
    const CMatrix cone = project_psd(x + corr);
    corr = x + corr - cone;
    const CMatrix next = project_affine(cone, r, s);
    const double moved = (next - x).norm();
    const double gap = (next - cone).norm();
    x = next;
    if (moved < tol && gap < tol) break;
  }
  return restore_trace_condition(project_psd(x), r, s);
}

inline double objective_value(const CMatrix& c, const CMatrix& j) { return (c * j).trace().real(); }

}  // namespace detail

/// ℛ(σ) = ρ^{1/2} 𝒩†(𝒩(ρ)^{−1/2} σ 𝒩(ρ)^{−1/2}) ρ^{1/2} on supp 𝒩(ρ); the
/// orthocomplement of the support is routed to a fixed state in supp ρ.
inline KrausMap transpose_recovery(const DensityState& rho, const KrausMap& n) {
  if (rho.dim() != n.dim_in()) throw DimensionError("transpose_recovery: dimension mismatch");
  const CMatrix sigma = apply(n, rho);
  const CMatrix rho_half = psd_sqrt(rho.matrix());
  const CMatrix sigma_inv_half = psd_inv_sqrt(sigma);
  std::vector<CMatrix> ops;
  for (const auto& k : n.kraus_ops()) ops.push_back(rho_half * k.adjoint() * sigma_inv_half);
  const CMatrix support = support_basis(sigma);
  const CMatrix kernel_proj = CMatrix::Identity(n.dim_out(), n.dim_out()) - support * support.adjoint();
  const CMatrix kernel = support_basis(kernel_proj, 0.5);
  const CVector target = support_basis(rho.matrix()).col(0);
  for (Eigen::Index c = 0; c < kernel.cols(); ++c) ops.push_back(target * kernel.col(c).adjoint());
  return KrausMap(std::move(ops), n.dim_out(), n.dim_in());
}

struct CodeFidelityResult {
  double value = 0.0;
  KrausMap recovery = identity_channel(1);
  bool converged = false;
  int iterations = 0;
  double initial_value = 0.0;     // transpose-recovery starting point
  std::vector<double> history;    // objective after each accepted step
};

namespace detail {

inline KrausMap lift_recovery(const RecoveryProblem& p, const std::vector<CMatrix>& restricted, Eigen::Index din,
                              Eigen::Index dout) {
  std::vector<CMatrix> ops;
  for (const auto& k : restricted) ops.push_back(p.in_basis * k * p.out_basis.adjoint());
  const CMatrix kernel_proj = CMatrix::Identity(dout, dout) - p.out_basis * p.out_basis.adjoint();
  const CMatrix kernel = support_basis(kernel_proj, 0.5);
  const CVector target = p.in_basis.col(0);
  for (Eigen::Index c = 0; c < kernel.cols(); ++c) ops.push_back(target * kernel.col(c).adjoint());
  return KrausMap(std::move(ops), dout, din);
}

}  // namespace detail

/// F_{c,e}(ρ, 𝒩) = max_ℛ F_e(ρ, ℛ∘𝒩) by projected gradient ascent on the
/// recovery's Choi matrix, started from the transpose recovery.  Accepted steps
/// never decrease the objective.
inline CodeFidelityResult optimal_code_fidelity(const DensityState& rho, const KrausMap& n,
                                                const OptimizerConfig& cfg = {}, bool record_history = false) {
  cfg.validate();
  const detail::RecoveryProblem p = detail::make_recovery_problem(rho, n);
  CodeFidelityResult res;
  if (p.s == 0) {
    res.recovery = detail::lift_recovery(p, {}, n.dim_in(), n.dim_out());
    res.converged = true;
    return res;
  }
  const Eigen::Index r = p.r, s = p.s;

  // Transpose recovery in restricted coordinates.
  const CMatrix rho_half = psd_sqrt(p.rho);
  CMatrix sigma = CMatrix::Zero(s, s);
  for (const auto& k : p.kraus) sigma += k * p.rho * k.adjoint();
  const CMatrix sigma_inv_half = psd_inv_sqrt(sigma);
  std::vector<CMatrix> start;
  for (const auto& k : p.kraus) start.push_back(rho_half * k.adjoint() * sigma_inv_half);
  CMatrix j = detail::restore_trace_condition(detail::kraus_to_j(start, r, s), r, s);

  double f = detail::objective_value(p.objective, j);
  res.initial_value = f;
  if (record_history) res.history.push_back(f);
  const double cnorm = p.objective.norm();
  double step = cnorm > 0 ? 0.5 / cnorm : 1.0;
  int it = 0;
  for (; it < cfg.max_iters && cnorm > 0; ++it) {
    const CMatrix next = detail::project_feasible(j + step * p.objective, r, s);
    const double fn = detail::objective_value(p.objective, next);
    if (fn < f - 1e-12) {
      // Inexact projection overshot; shrink and retry.
      step *= 0.5;
      if (step < 1e-12 / cnorm) break;
      continue;
    }
    const double gain = fn - f;
    j = next;
    f = std::max(f, fn);
    if (record_history) res.history.push_back(f);
    if (cfg.step_rule == StepRule::backtracking) step *= 2.0;
    if (gain < cfg.tolerance) {
      res.converged = true;
      ++it;
      break;
    }
  }
  if (cnorm == 0) res.converged = true;
  res.iterations = it;
  const auto ops = detail::j_to_kraus(j, r, s);
  res.recovery = detail::lift_recovery(p, ops, n.dim_in(), n.dim_out());
  res.value = entanglement_fidelity(rho, compose(res.recovery, n));
  return res;
}

}  // namespace qcap
