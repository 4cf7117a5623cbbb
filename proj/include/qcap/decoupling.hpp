// Decoupling states and bound, averaged-channel dilation, Haar random codes
// and the one-shot bound for averaged channels.
#pragma once

#include "qcap/parallel.hpp"
#include "qcap/recovery.hpp"

#include <array>
#include <cstdint>
#include <numeric>
#include <vector>

namespace qcap {

// ---------------------------------------------------------------------------
// Decoupling

struct DecouplingTriple {
  DensityState rho_ae;
  DensityState rho_a;
  DensityState rho_e;
  DensityState rho_out;        // ρ′ on the channel output
  DensityState rho_a_projected;  // reference marginal of ψ′; equals rho_a when 𝒩 is trace preserving
  double w = 0.0;              // tr 𝒩(ρ)
  Eigen::Index dim_a = 0;
  Eigen::Index dim_e = 0;
};

/// Reduced states of ψ′ = (1 ⊗ p_e)(1 ⊗ v)ψ / √w for the canonical
/// purification ψ of ρ; factor order is (reference, output, environment).
/// rho_a is the reference marginal of ψ itself: with the marginal of ψ′ in
/// its place the bound fails for trace-decreasing maps.
inline DecouplingTriple decoupling_states(const DensityState& rho, const StinespringDilation& dil) {
  if (rho.dim() != dil.dim_in) throw DimensionError("decoupling_states: state and dilation dimensions differ");
  const Eigen::Index da = rho.dim(), dk = dil.dim_out, de = dil.dim_env;
  const CMatrix pv = tensor(CMatrix::Identity(dk, dk), dil.env_projector.matrix()) * dil.isometry;
  const CVector psi0 = purify(rho).amplitudes();
  const CVector psi = tensor(CMatrix::Identity(da, da), pv) * psi0;
  const double w = psi.squaredNorm();
  if (!(w > kEigenCutoff)) throw DegenerateError("decoupling_states: tr N(rho) = " + std::to_string(w) + " is zero");
  const CVector phi = psi / std::sqrt(w);
  const CMatrix full = phi * phi.adjoint();
  const std::array<Eigen::Index, 3> dims{da, dk, de};
  const std::array<bool, 3> keep_ae{true, false, true}, keep_a{true, false, false}, keep_e{false, false, true},
      keep_k{false, true, false};
  const std::array<Eigen::Index, 2> dims0{da, da};
  const std::array<bool, 2> keep_ref{true, false};
  return {DensityState::from_matrix(reduce(full, dims, keep_ae)),
          DensityState::from_matrix(reduce(CMatrix(psi0 * psi0.adjoint()), dims0, keep_ref)),
          DensityState::from_matrix(reduce(full, dims, keep_e)),
          DensityState::from_matrix(reduce(full, dims, keep_k)),
          DensityState::from_matrix(reduce(full, dims, keep_a)),
          w,
          da,
          de};
}

inline DecouplingTriple decoupling_states(const DensityState& rho, const KrausMap& n) {
  return decoupling_states(rho, stinespring(n));
}

/// w − ‖w ρ′_ae − w ρ_a ⊗ ρ′_e‖₁; may be negative.
inline double decoupling_bound(const DecouplingTriple& t) {
  const CMatrix diff = t.w * (t.rho_ae.matrix() - tensor(t.rho_a.matrix(), t.rho_e.matrix()));
  return t.w - trace_norm(diff);
}

/// The same expression with the reference marginal taken from ψ′.
inline double decoupling_bound_projected(const DecouplingTriple& t) {
  const CMatrix diff = t.w * (t.rho_ae.matrix() - tensor(t.rho_a_projected.matrix(), t.rho_e.matrix()));
  return t.w - trace_norm(diff);
}

/// Dilation of (1/N) Σ 𝒩_j: φ ↦ Σ_j Σ_i N^{-1/2} (b_{j,i} φ) ⊗ e_i ⊗ f_j with
/// environment C^{n_max} ⊗ C^N.  Members are taken in order of increasing
/// Kraus count (stable).
inline StinespringDilation averaged_dilation(const CompoundSet& set) {
  const std::size_t n = set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return set[a].kraus_count() < set[b].kraus_count(); });
  const Eigen::Index nmax = static_cast<Eigen::Index>(set[order.back()].kraus_count());
  const Eigen::Index nn = static_cast<Eigen::Index>(n);
  const Eigen::Index de = nmax * nn, dk = set.dim_out();
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  CMatrix v = CMatrix::Zero(dk * de, set.dim_in());
  for (Eigen::Index j = 0; j < nn; ++j) {
    const auto& ops = set[order[j]].kraus_ops();
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(ops.size()); ++i)
      for (Eigen::Index a = 0; a < dk; ++a) v.row(a * de + i * nn + j) = s * ops[i].row(a);
  }
  return {std::move(v), set.dim_in(), dk, de, OrthogonalProjector::identity(de)};
}

// ---------------------------------------------------------------------------
// Haar sampling

/// Identical (seed, counter) pairs reproduce the identical unitary.
struct HaarSampler {
  Eigen::Index dim = 1;
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  HaarSampler at(std::uint64_t index) const { return {dim, seed, index}; }
};

inline CMatrix haar_unitary(const HaarSampler& s) {
  Rng rng(s.seed, s.counter);
  return haar_unitary(rng, s.dim);
}

/// Acts as u on span(G) and as the identity on its orthocomplement.
inline CMatrix embed_unitary(const CMatrix& u, const SubspaceBasis& g) {
  if (u.rows() != g.k() || u.cols() != g.k()) throw DimensionError("embed_unitary: unitary does not match subspace");
  const CMatrix& b = g.columns();
  return b * u * b.adjoint() + (CMatrix::Identity(g.ambient_dim(), g.ambient_dim()) - b * b.adjoint());
}

// ---------------------------------------------------------------------------
// One-shot bound for averaged channels

struct OneShotBoundReport {
  int k = 0;
  std::vector<int> n_j;
  std::vector<double> l2_norms;
  double total_weight = 0.0;
  double rhs = 0.0;
  double mc_mean = 0.0;
  double mc_stderr = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> values;  // per trial
  bool all_converged = true;

  /// mc_mean + 3 σ + 1e-6 ≥ rhs
  bool holds() const { return mc_mean + 3.0 * mc_stderr + 1e-6 >= rhs; }
};

/// tr 𝒩(π_G) − 2 Σ_j √(k n_j) ‖𝒩_j(π_G)‖₂ with n_j the minimal Kraus counts.
inline OneShotBoundReport theorem2_rhs(int k, std::span<const KrausMap> maps, const DensityState& pi_g) {
  if (k < 1) throw ValidationError("theorem2_rhs: k must be at least 1");
  if (maps.empty()) throw ValidationError("theorem2_rhs: empty channel list");
  OneShotBoundReport r;
  r.k = k;
  double weight = 0.0, penalty = 0.0;
  for (const auto& m : maps) {
    const int nj = static_cast<int>(minimal_kraus(m).kraus_count());
    const CMatrix out = apply(m, pi_g);
    const double l2 = hs_norm(out);
    r.n_j.push_back(nj);
    r.l2_norms.push_back(l2);
    weight += out.trace().real();
    penalty += std::sqrt(static_cast<double>(k) * nj) * l2;
  }
  r.total_weight = weight / static_cast<double>(maps.size());
  r.rhs = r.total_weight - 2.0 * penalty;
  return r;
}

/// 𝒩_u = (1/N) Σ 𝒩_j ∘ 𝒰
inline KrausMap averaged_with_encoder(std::span<const KrausMap> maps, const CMatrix& u) {
  std::vector<KrausMap> rotated;
  rotated.reserve(maps.size());
  for (const auto& m : maps) rotated.push_back(precompose_unitary(m, u));
  return average(rotated);
}

inline double sample_mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

/// Monte Carlo estimate of ∫ F_{c,e}(π_E, 𝒩_u) du with E the first k columns
/// of G.  Trial t uses the unitary of sampler.at(t).
inline OneShotBoundReport mc_code_fidelity(std::span<const KrausMap> maps, const SubspaceBasis& g, int k, int trials,
                                           const HaarSampler& sampler, const OptimizerConfig& cfg = {},
                                           std::size_t threads = 1) {
  if (k < 1 || k > g.k()) throw ValidationError("mc_code_fidelity: need 1 <= k <= dim G");
  if (trials < 1) throw ValidationError("mc_code_fidelity: trials must be positive");
  if (sampler.dim != g.k()) throw DimensionError("mc_code_fidelity: sampler dimension differs from dim G");
  OneShotBoundReport r = theorem2_rhs(k, maps, maximally_mixed(g));
  const DensityState pi_e = maximally_mixed(g.leading_subspace(k));
  std::vector<double> values(static_cast<std::size_t>(trials));
  std::vector<char> converged(static_cast<std::size_t>(trials), 1);
  parallel_for(values.size(), threads, [&](std::size_t t) {
    const CMatrix u = embed_unitary(haar_unitary(sampler.at(t)), g);
    const CodeFidelityResult res = optimal_code_fidelity(pi_e, averaged_with_encoder(maps, u), cfg);
    values[t] = res.value;
    converged[t] = res.converged ? 1 : 0;
  });
  r.values = values;
  r.trials = trials;
  r.seed = sampler.seed;
  r.mc_mean = sample_mean(values);
  r.mc_stderr = standard_error(values);
  r.all_converged = std::all_of(converged.begin(), converged.end(), [](char c) { return c != 0; });
  return r;
}

// ---------------------------------------------------------------------------
// Matrix inequality and Haar average facts

struct Lemma3Result {
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

/// Checks L_jl ≤ min(L_jj, L_ll) and D_jl ≤ max(D_jj, D_ll) entrywise.
inline bool lemma3_admissible(const RMatrix& l, const RMatrix& d, double tol = 1e-12) {
  if (l.rows() != l.cols() || d.rows() != d.cols() || l.rows() != d.rows()) return false;
  for (Eigen::Index j = 0; j < l.rows(); ++j)
    for (Eigen::Index m = 0; m < l.rows(); ++m) {
      if (l(j, m) < 0 || d(j, m) < 0) return false;
      if (l(j, m) > std::min(l(j, j), l(m, m)) + tol) return false;
      if (d(j, m) > std::max(d(j, j), d(m, m)) + tol) return false;
    }
  return true;
}

/// lhs = (1/N) Σ_{j,l} √(L_jl D_jl), rhs = 2 Σ_j √(L_jj D_jj).
inline Lemma3Result lemma3_check(const RMatrix& l, const RMatrix& d) {
  if (!lemma3_admissible(l, d)) throw ValidationError("lemma3_check: (L, D) violate the entrywise preconditions");
  const Eigen::Index n = l.rows();
  Lemma3Result r;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index m = 0; m < n; ++m) r.lhs += std::sqrt(l(j, m) * d(j, m));
    r.rhs += 2.0 * std::sqrt(l(j, j) * d(j, j));
  }
  r.lhs /= static_cast<double>(n);
  r.ok = r.lhs <= r.rhs + 1e-12;
  return r;
}

/// Random nonnegative (L, D) with off-diagonals clamped into the admissible envelope.
inline std::pair<RMatrix, RMatrix> admissible_pair(Rng& rng, Eigen::Index n) {
  RMatrix l(n, n), d(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    l(j, j) = rng.uniform(0.0, 10.0);
    d(j, j) = rng.uniform(0.0, 1.0);
  }
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index m = 0; m < n; ++m) {
      if (j == m) continue;
      l(j, m) = std::min(rng.uniform(0.0, 10.0), std::min(l(j, j), l(m, m)));
      d(j, m) = std::min(rng.uniform(0.0, 1.0), std::max(d(j, j), d(m, m)));
    }
  return {l, d};
}

/// b_P(x, y) = tr(P x† P y) − (1/k) tr(P x†) tr(P y)
inline Complex sesquilinear_b(const CMatrix& p, const CMatrix& x, const CMatrix& y, double k) {
  const CMatrix xa = x.adjoint();
  return (p * xa * p * y).trace() - (p * xa).trace() * (p * y).trace() / k;
}

struct Lemma4Result {
  Complex mc;
  Complex exact;
  double stderr_ = 0.0;
  int trials = 0;

  bool within(double sigmas) const { return std::abs(mc - exact) <= sigmas * stderr_ + 1e-12; }
};

/// E b_{UpU†}(x, y) by Monte Carlo over U ~ Haar(G) against
/// ((k²−1)/(d²−1)) tr(p_G x† p_G y) + ((1−k²)/(d(d²−1))) tr(p_G x†) tr(p_G y).
inline Lemma4Result lemma4_average(const CMatrix& x, const CMatrix& y, const OrthogonalProjector& p,
                                   const SubspaceBasis& g, int trials, const HaarSampler& sampler,
                                   std::size_t threads = 1) {
  const Eigen::Index dim = g.ambient_dim();
  if (x.rows() != dim || y.rows() != dim || p.dim() != dim) throw DimensionError("lemma4_average: dimension mismatch");
  const double k = static_cast<double>(p.rank());
  const double d = static_cast<double>(g.k());
  if (k < 1 || d < 2) throw ValidationError("lemma4_average: need k >= 1 and d >= 2");
  if (sampler.dim != g.k()) throw DimensionError("lemma4_average: sampler dimension differs from dim G");
  const CMatrix pg = g.projector();
  const CMatrix xa = x.adjoint();
  Lemma4Result r;
  r.exact = (k * k - 1) / (d * d - 1) * (pg * xa * pg * y).trace() +
            (1 - k * k) / (d * (d * d - 1)) * (pg * xa).trace() * (pg * y).trace();
  std::vector<Complex> samples(static_cast<std::size_t>(trials));
  parallel_for(samples.size(), threads, [&](std::size_t t) {
    const CMatrix u = embed_unitary(haar_unitary(sampler.at(t)), g);
    samples[t] = sesquilinear_b(u * p.matrix() * u.adjoint(), x, y, k);
  });
  std::vector<double> re(samples.size()), im(samples.size());
  for (std::size_t t = 0; t < samples.size(); ++t) {
    re[t] = samples[t].real();
    im[t] = samples[t].imag();
  }
  r.mc = {sample_mean(re), sample_mean(im)};
  const double sr = standard_error(re), si = standard_error(im);
  r.stderr_ = std::sqrt(sr * sr + si * si);
  r.trials = trials;
  return r;
}

struct DjlMatrices {
  RMatrix d;  // D_jl = ⟨𝒩_j(π_G), 𝒩_l(π_G)⟩_HS
  RMatrix l;  // L_jl = min(n_j, n_l)
};

inline DjlMatrices djl_matrix(std::span<const KrausMap> maps, const DensityState& pi_g) {
  const Eigen::Index n = static_cast<Eigen::Index>(maps.size());
  std::vector<CMatrix> outs;
  std::vector<double> counts;
  for (const auto& m : maps) {
    outs.push_back(apply(m, pi_g));
    counts.push_back(static_cast<double>(minimal_kraus(m).kraus_count()));
  }
  DjlMatrices r{RMatrix(n, n), RMatrix(n, n)};
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index m = 0; m < n; ++m) {
      r.d(j, m) = hs_inner(outs[j], outs[m]).real();
      r.l(j, m) = std::min(counts[j], counts[m]);
    }
  return r;
}

/// D_jl(u) = Σ_{i,r} [tr(p X† p X) − (1/k)|tr(p X)|²] with X = a_{j,i}† a_{l,r}
/// and a_{j,i} = b_{j,i} u.
inline RMatrix djl_of_unitary(std::span<const KrausMap> maps, const OrthogonalProjector& p, const CMatrix& u) {
  const Eigen::Index n = static_cast<Eigen::Index>(maps.size());
  const double k = static_cast<double>(p.rank());
  const CMatrix& pm = p.matrix();
  std::vector<std::vector<CMatrix>> a(maps.size());
  for (std::size_t j = 0; j < maps.size(); ++j)
    for (const auto& b : maps[j].kraus_ops()) a[j].push_back(b * u);
  RMatrix out = RMatrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index m = 0; m < n; ++m) {
      double s = 0.0;
      for (const auto& aj : a[j])
        for (const auto& am : a[m]) {
          const CMatrix x = aj.adjoint() * am;
          s += (pm * x.adjoint() * pm * x).trace().real() - std::norm((pm * x).trace()) / k;
        }
      out(j, m) = s;
    }
  return out;
}

}  // namespace qcap
