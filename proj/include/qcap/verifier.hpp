// Inequality checks for projection disturbance and Choi cross terms, and the
// seeded suite that aggregates every lemma check into one report.
#pragma once

#include "qcap/decoupling.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace qcap {

/// ok ⇔ lhs ≤ rhs + slack; margin = rhs − lhs.
struct LemmaCheckRecord {
  std::string lemma_id;
  std::uint64_t instance_seed = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  double slack = 1e-9;
  bool ok = false;
};

inline LemmaCheckRecord make_record(std::string id, std::uint64_t seed, double lhs, double rhs, double slack = 1e-9) {
  return {std::move(id), seed, lhs, rhs, rhs - lhs, slack, lhs <= rhs + slack};
}

/// f = F_e(ρ, D∘A) against 3 f_q − 2 with f_q = F_e(ρ, D∘𝒬∘A).
inline LemmaCheckRecord lemma5_check(const DensityState& rho, const KrausMap& a, const KrausMap& d,
                                     const OrthogonalProjector& q, std::uint64_t seed = 0) {
  if (a.dim_in() != rho.dim() || d.dim_out() != rho.dim() || a.dim_out() != d.dim_in() || q.dim() != a.dim_out())
    throw DimensionError("lemma5_check: dimension mismatch");
  const double fq = entanglement_fidelity(rho, compose(d, compose(projection_map(q), a)));
  const double f = entanglement_fidelity(rho, compose(d, a));
  return make_record("lemma5", seed, 3.0 * fq - 2.0, f);
}

/// |⟨z, D(|x1⟩⟨x2|) z⟩| against √(⟨z, D(P_{x1}) z⟩ ⟨z, D(P_{x2}) z⟩).
inline LemmaCheckRecord lemma6_check(const KrausMap& d, const PureVector& x1, const PureVector& x2,
                                     const PureVector& z, std::uint64_t seed = 0) {
  if (x1.dim() != d.dim_in() || x2.dim() != d.dim_in() || z.dim() != d.dim_out())
    throw DimensionError("lemma6_check: dimension mismatch");
  if (std::abs(x1.amplitudes().dot(x2.amplitudes())) > kStructTol)
    throw ValidationError("lemma6_check: x1 and x2 are not orthogonal");
  const CVector& zv = z.amplitudes();
  auto sandwich = [&](const CMatrix& m) { return Complex(zv.dot(apply(d, m) * zv)); };
  const double lhs = std::abs(sandwich(x1.amplitudes() * x2.amplitudes().adjoint()));
  const double p1 = std::abs(sandwich(x1.projector()));
  const double p2 = std::abs(sandwich(x2.projector()));
  return make_record("lemma6", seed, lhs, std::sqrt(p1 * p2));
}

/// F_{c,e}(ρ, 𝒩) from the optimiser against the decoupling bound; the
/// transpose-recovery fidelity must not exceed the optimiser's value either.
struct Lemma1Outcome {
  LemmaCheckRecord bound;      // decoupling bound ≤ F_{c,e}
  LemmaCheckRecord transpose;  // F_e(transpose recovery) ≤ F_{c,e}
  LemmaCheckRecord projected;  // bound with the reference marginal of ψ′; informational
  bool converged = true;
};

inline Lemma1Outcome lemma1_check(const DensityState& rho, const KrausMap& n, const OptimizerConfig& cfg,
                                  std::uint64_t seed = 0) {
  const DecouplingTriple t = decoupling_states(rho, n);
  const double bound = decoupling_bound(t);
  const CodeFidelityResult opt = optimal_code_fidelity(rho, n, cfg);
  const double tc = entanglement_fidelity(rho, compose(transpose_recovery(rho, n), n));
  return {make_record("lemma1", seed, bound, opt.value, 1e-6), make_record("lemma1_transpose", seed, tc, opt.value, 1e-6),
          make_record("lemma1_projected", seed, decoupling_bound_projected(t), opt.value, 1e-6), opt.converged};
}

struct Lemma4Config {
  int d = 2;
  int k = 1;
};

struct SuiteSizes {
  int lemma1 = 500;
  int lemma3 = 1000;
  int lemma4_trials = 100000;
  std::vector<Lemma4Config> lemma4 = {{2, 1}, {3, 1}, {3, 2}, {4, 2}, {3, 3}};
  int lemma5 = 500;
  int lemma6 = 1000;
  int theorem2_trials = 50;
  bool theorem2 = true;

  static SuiteSizes empty() {
    SuiteSizes s;
    s.lemma1 = s.lemma3 = s.lemma5 = s.lemma6 = 0;
    s.lemma4.clear();
    s.theorem2 = false;
    return s;
  }
};

struct SuiteReport {
  std::uint64_t master_seed = 0;
  SuiteSizes sizes;
  std::vector<LemmaCheckRecord> records;
  int passed = 0;
  int failed = 0;
  int lemma1_projected_violations = 0;  // not counted in passed/failed
  bool optimizer_converged = true;

  bool ok() const { return failed == 0; }

  /// The `count` smallest margins per lemma id, ascending.
  std::map<std::string, std::vector<LemmaCheckRecord>> smallest_margins(std::size_t count = 5) const {
    std::map<std::string, std::vector<LemmaCheckRecord>> by_id;
    for (const auto& r : records) by_id[r.lemma_id].push_back(r);
    for (auto& [id, v] : by_id) {
      std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.margin < b.margin; });
      if (v.size() > count) v.resize(count);
    }
    return by_id;
  }
};

/// Stream index for instance i of check family `family`.
inline std::uint64_t instance_seed(std::uint64_t master, std::uint64_t family, std::uint64_t i) {
  return derive_seed(derive_seed(master, family), i);
}

/// Channel configurations for the one-shot averaged-channel check.  The
/// two-qubit configurations use 𝒩^{⊗2} of qubit channels so that d_G = 4.
struct Theorem2Config {
  std::string name;
  std::vector<KrausMap> maps;
  SubspaceBasis g;
  int k;
};

inline std::vector<Theorem2Config> theorem2_configs(std::uint64_t master) {
  std::vector<Theorem2Config> out;
  out.push_back({"identity_d16_k2", {identity_channel(16)}, SubspaceBasis::full(16), 2});
  Rng rng(instance_seed(master, 40, 0));
  const KrausMap u1 = unitary_channel(haar_unitary(rng, 2));
  const KrausMap u2 = unitary_channel(haar_unitary(rng, 2));
  out.push_back({"unitary_pair_d4_k1", {tensor_power(u1, 2), tensor_power(u2, 2)}, SubspaceBasis::full(4), 1});
  out.push_back({"dephasing_pair_d4_k1",
                 {tensor_power(dephasing_qubit(0.1), 2), tensor_power(dephasing_qubit(0.1, PauliAxis::x), 2)},
                 SubspaceBasis::full(4),
                 1});
  return out;
}

inline SuiteReport run_suite(std::uint64_t master, const SuiteSizes& sizes, const OptimizerConfig& cfg = {},
                             std::size_t threads = 1) {
  SuiteReport rep;
  rep.master_seed = master;
  rep.sizes = sizes;
  auto& recs = rep.records;

  // Decoupling bound: random states and trace-decreasing maps with dims ≤ 3.
  {
    std::vector<Lemma1Outcome> out(static_cast<std::size_t>(std::max(sizes.lemma1, 0)));
    parallel_for(out.size(), threads, [&](std::size_t i) {
      const std::uint64_t s = instance_seed(master, 1, i);
      Rng rng(s);
      const Eigen::Index din = 2 + static_cast<Eigen::Index>(rng.next() % 2);
      const Eigen::Index dout = 2 + static_cast<Eigen::Index>(rng.next() % 2);
      const Eigen::Index env = 1 + static_cast<Eigen::Index>(rng.next() % 3);
      const KrausMap n = random_trace_decreasing(rng, din, dout, env);
      const DensityState rho = random_state(rng, din);
      out[i] = lemma1_check(rho, n, cfg, s);
    });
    for (auto& o : out) {
      recs.push_back(o.bound);
      recs.push_back(o.transpose);
      if (!o.projected.ok) ++rep.lemma1_projected_violations;
      rep.optimizer_converged = rep.optimizer_converged && o.converged;
    }
  }

  for (int i = 0; i < sizes.lemma3; ++i) {
    const std::uint64_t s = instance_seed(master, 3, static_cast<std::uint64_t>(i));
    Rng rng(s);
    const auto [l, d] = admissible_pair(rng, 1 + static_cast<Eigen::Index>(rng.next() % 6));
    const Lemma3Result r = lemma3_check(l, d);
    recs.push_back(make_record("lemma3", s, r.lhs, r.rhs, 1e-12));
  }

  for (std::size_t c = 0; c < sizes.lemma4.size(); ++c) {
    const auto [dg, k] = sizes.lemma4[c];
    const std::uint64_t s = instance_seed(master, 4, c);
    Rng rng(s);
    const Eigen::Index dim = dg + 1;  // G is a proper subspace of H
    const CMatrix x = ginibre(rng, dim, dim), y = ginibre(rng, dim, dim);
    const SubspaceBasis g = SubspaceBasis::leading(dim, dg);
    const OrthogonalProjector p = OrthogonalProjector::onto(g.leading_subspace(k));
    const Lemma4Result r = lemma4_average(x, y, p, g, sizes.lemma4_trials, HaarSampler{dg, rng.next(), 0}, threads);
    recs.push_back(make_record("lemma4_d" + std::to_string(dg) + "_k" + std::to_string(k), s, std::abs(r.mc - r.exact),
                               4.0 * r.stderr_));
  }

  for (int i = 0; i < sizes.lemma5; ++i) {
    const std::uint64_t s = instance_seed(master, 5, static_cast<std::uint64_t>(i));
    Rng rng(s);
    const DensityState rho = random_state(rng, 2);
    const KrausMap a = random_channel(rng, 2, 3, 1 + static_cast<Eigen::Index>(rng.next() % 3));
    const KrausMap d = random_channel(rng, 3, 2, 2 + static_cast<Eigen::Index>(rng.next() % 2));
    const Eigen::Index rank = 1 + static_cast<Eigen::Index>(rng.next() % 2);
    const OrthogonalProjector q = OrthogonalProjector::onto(SubspaceBasis::from_columns(haar_isometry(rng, 3, rank)));
    recs.push_back(lemma5_check(rho, a, d, q, s));
  }

  for (int i = 0; i < sizes.lemma6; ++i) {
    const std::uint64_t s = instance_seed(master, 6, static_cast<std::uint64_t>(i));
    Rng rng(s);
    const bool identity_case = i % 10 == 0;
    const KrausMap d = identity_case ? identity_channel(3) : random_channel(rng, 3, 2, 2 + static_cast<Eigen::Index>(rng.next() % 3));
    const CMatrix x = haar_isometry(rng, 3, 2);
    LemmaCheckRecord r = lemma6_check(d, PureVector::normalized(x.col(0)), PureVector::normalized(x.col(1)),
                                      random_pure(rng, d.dim_out()), s);
    if (identity_case) {
      r.lemma_id = "lemma6_identity";
      // Equality case: the gap itself must vanish.
      r.ok = r.ok && std::abs(r.margin) <= 1e-9;
    }
    recs.push_back(r);
  }

  if (sizes.theorem2) {
    const auto configs = theorem2_configs(master);
    for (std::size_t c = 0; c < configs.size(); ++c) {
      const auto& cf = configs[c];
      const std::uint64_t s = instance_seed(master, 20, c);
      const OneShotBoundReport r =
          mc_code_fidelity(cf.maps, cf.g, cf.k, sizes.theorem2_trials, HaarSampler{cf.g.k(), s, 0}, cfg, threads);
      recs.push_back(make_record("theorem2_" + cf.name, s, r.rhs, r.mc_mean + 3.0 * r.mc_stderr, 1e-6));
      rep.optimizer_converged = rep.optimizer_converged && r.all_converged;
    }
  }

  for (const auto& r : recs) (r.ok ? rep.passed : rep.failed) += 1;
  return rep;
}

}  // namespace qcap
