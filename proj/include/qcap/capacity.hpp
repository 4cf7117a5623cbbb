// Finite-l maximin coherent information, the typical-state sequence of the
// compound BSST construction, and the direct-part coding experiment.
#pragma once

#include "qcap/decoupling.hpp"
#include "qcap/power.hpp"
#include "qcap/typicality.hpp"

#include <functional>
#include <optional>

namespace qcap {

// ---------------------------------------------------------------------------
// Coherent information and its gradient

/// Euclidean gradient G of ρ ↦ I_c(ρ, 𝒩) over Hermitian ρ, so that
/// dI_c = tr(G Δ).  The identity terms of the two entropy derivatives cancel for
/// trace-preserving maps.  ρ is mixed with 1e-9 π before taking logarithms.
inline CMatrix ic_gradient(const DensityState& rho, const KrausMap& n) {
  if (rho.dim() != n.dim_in()) throw DimensionError("ic_gradient: state and map dimensions differ");
  if (!n.trace_preserving()) throw ValidationError("ic_gradient: map must be trace preserving");
  const double eps = 1e-9;
  const CMatrix reg = (1 - eps) * rho.matrix() + eps * CMatrix::Identity(rho.dim(), rho.dim()) / static_cast<double>(rho.dim());
  const KrausMap nc = complementary(n);
  const CMatrix out = apply(n, reg), env = apply(nc, reg);
  return symmetrize(adjoint_apply(nc, support_log2(env)) - adjoint_apply(n, support_log2(out)));
}

namespace detail {

/// 𝒩 and 𝒩^c for one compound member, prepared for repeated evaluation.
struct IcMember {
  KrausMap n;
  KrausMap nc;

  explicit IcMember(const KrausMap& channel) : n(channel), nc(complementary(channel)) {}

  double value(const CMatrix& rho) const { return operator_entropy(apply(n, rho)) - operator_entropy(apply(nc, rho)); }

  CMatrix gradient(const CMatrix& rho) const {
    const double eps = 1e-9;
    const CMatrix reg = (1 - eps) * rho + eps * CMatrix::Identity(rho.rows(), rho.rows()) / static_cast<double>(rho.rows());
    return symmetrize(adjoint_apply(nc, support_log2(apply(nc, reg))) - adjoint_apply(n, support_log2(apply(n, reg))));
  }
};

/// Closest density matrix in Frobenius norm.
inline CMatrix project_to_states(const CMatrix& h) {
  const Spectrum sp = eigh(h);
  const RVector p = project_to_simplex(sp.values);
  return sp.vectors * p.cast<Complex>().asDiagonal() * sp.vectors.adjoint();
}

inline CMatrix traceless(const CMatrix& g) {
  return g - g.trace() / static_cast<double>(g.rows()) * CMatrix::Identity(g.rows(), g.rows());
}

struct AscentResult {
  CMatrix rho;
  double value = -1e300;
  bool converged = false;
};

/// Softmin −τ log₂ Σ 2^{−f_j/τ} and its weights.
inline double softmin(const std::vector<double>& f, double tau, std::vector<double>& weights) {
  const double fmin = *std::min_element(f.begin(), f.end());
  double z = 0.0;
  weights.resize(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) {
    weights[j] = std::exp2(-(f[j] - fmin) / tau);
    z += weights[j];
  }
  for (auto& w : weights) w /= z;
  return fmin - tau * std::log2(z);
}

/// Minimum-norm point of the convex hull of the given (traceless) gradients,
/// by projected gradient on the weight simplex.
inline CMatrix min_norm_combination(const std::vector<CMatrix>& g) {
  const std::size_t m = g.size();
  if (m == 1) return g.front();
  RMatrix gram(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = hs_inner(g[a], g[b]).real();
  RVector w = RVector::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
  const double lip = std::max(gram.diagonal().maxCoeff() * static_cast<double>(m), 1e-300);
  for (int it = 0; it < 500; ++it) {
    const RVector next = project_to_simplex(w - (gram * w) / lip);
    if ((next - w).lpNorm<Eigen::Infinity>() < 1e-13) {
      w = next;
      break;
    }
    w = next;
  }
  CMatrix out = CMatrix::Zero(g.front().rows(), g.front().cols());
  for (std::size_t a = 0; a < m; ++a) out += w(static_cast<Eigen::Index>(a)) * g[a];
  return out;
}

/// Maximises min_j f_j from `start`: annealed softmin ascent followed by
/// min-norm subgradient polishing.  Every accepted step increases the target.
inline AscentResult maximin_ascent(const std::vector<IcMember>& members, CMatrix rho, const OptimizerConfig& cfg) {
  const std::size_t nm = members.size();
  std::vector<double> f(nm), w;
  auto eval = [&](const CMatrix& r) {
    for (std::size_t j = 0; j < nm; ++j) f[j] = members[j].value(r);
  };
  const int anneal_every = 200;
  double tau = cfg.softmin_temp;
  double step = 0.5;
  eval(rho);
  double obj = softmin(f, tau, w);
  int stalls = 0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (it > 0 && it % anneal_every == 0) {
      tau *= 0.5;
      eval(rho);
      obj = softmin(f, tau, w);
      stalls = 0;
    }
    CMatrix g = CMatrix::Zero(rho.rows(), rho.cols());
    for (std::size_t j = 0; j < nm; ++j)
      if (w[j] > 1e-14) g += w[j] * members[j].gradient(rho);
    g = traceless(g);
    bool accepted = false;
    for (int bt = 0; bt < 40 && !accepted; ++bt) {
      const CMatrix cand = project_to_states(rho + step * g);
      eval(cand);
      std::vector<double> wc;
      const double oc = softmin(f, tau, wc);
      if (oc >= obj) {
        const double gain = oc - obj;
        rho = cand;
        obj = oc;
        w = std::move(wc);
        accepted = true;
        step = std::min(step * 1.5, 10.0);
        stalls = gain < cfg.tolerance * 1e-2 ? stalls + 1 : 0;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted || stalls > 20) {
      // Nothing left at this temperature; jump to the next one.
      const int next = (it / anneal_every + 1) * anneal_every;
      if (next >= cfg.max_iters) break;
      it = next - 1;
      step = 0.5;
    }
  }

  // Exact-min polishing.
  eval(rho);
  double fmin = *std::min_element(f.begin(), f.end());
  step = 0.5;
  bool converged = false;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double band = std::max(1e-9, 1e-4 * std::exp2(-it / 50.0));
    std::vector<CMatrix> active;
    for (std::size_t j = 0; j < nm; ++j)
      if (f[j] <= fmin + band) active.push_back(traceless(members[j].gradient(rho)));
    const CMatrix dir = min_norm_combination(active);
    if (dir.norm() < 1e-12) {
      converged = true;
      break;
    }
    bool accepted = false;
    double gain = 0.0;
    for (int bt = 0; bt < 50 && !accepted; ++bt) {
      const CMatrix cand = project_to_states(rho + step * dir);
      std::vector<double> fc(nm);
      for (std::size_t j = 0; j < nm; ++j) fc[j] = members[j].value(cand);
      const double mc = *std::min_element(fc.begin(), fc.end());
      if (mc > fmin) {
        gain = mc - fmin;
        rho = cand;
        f = std::move(fc);
        fmin = mc;
        accepted = true;
        step = std::min(step * 1.5, 10.0);
      } else {
        step *= 0.5;
      }
    }
    if (!accepted || gain < cfg.tolerance * 1e-3) {
      converged = true;
      break;
    }
  }
  return {rho, fmin, converged};
}

}  // namespace detail

struct CapacityEstimate {
  int l = 1;
  double value = 0.0;  // min_j I_c / l
  DensityState argmax_state = DensityState::maximally_mixed(1);
  std::vector<double> per_channel_ic;  // I_c(ρ, 𝒩_j^{⊗l}), not divided by l
  bool converged = false;
  int restarts_used = 0;
};

/// (1/l) max_ρ min_j I_c(ρ, 𝒩_j^{⊗l}) by multi-start projected ascent.
/// Starts: π, `cfg.restarts − 1` random states from derived seeds and, for
/// l > 1, the l-fold power of the single-letter optimiser.
inline CapacityEstimate maximin_coherent_info(const CompoundSet& set, int l, const OptimizerConfig& cfg = {},
                                              std::size_t budget = kDefaultBudgetDim, std::size_t threads = 1) {
  cfg.validate();
  if (l < 1) throw ValidationError("maximin_coherent_info: l must be at least 1");
  std::vector<detail::IcMember> members;
  for (const auto& c : set.channels()) {
    if (!c.trace_preserving()) throw ValidationError("maximin_coherent_info: members must be trace preserving");
    members.emplace_back(tensor_power(minimal_kraus(c), static_cast<std::size_t>(l), budget));
    check_budget(static_cast<std::size_t>(members.back().nc.dim_out()), budget,
                 "environment of channel power " + std::to_string(l));
  }
  const Eigen::Index dim = members.front().n.dim_in();

  std::vector<CMatrix> starts;
  starts.push_back(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
  for (int r = 1; r < cfg.restarts; ++r) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(r));
    starts.push_back(random_state(rng, dim).matrix());
  }
  if (l > 1) {
    const CapacityEstimate single = maximin_coherent_info(set, 1, cfg, budget, threads);
    starts.push_back(tensor_power(single.argmax_state.matrix(), static_cast<std::size_t>(l)));
  }

  std::vector<detail::AscentResult> runs(starts.size());
  parallel_for(starts.size(), threads, [&](std::size_t i) { runs[i] = detail::maximin_ascent(members, starts[i], cfg); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].value > runs[best].value) best = i;

  CapacityEstimate est;
  est.l = l;
  est.argmax_state = DensityState::from_matrix(runs[best].rho, 1e-8);
  for (const auto& m : members) est.per_channel_ic.push_back(m.value(est.argmax_state.matrix()));
  est.value = *std::min_element(est.per_channel_ic.begin(), est.per_channel_ic.end()) / l;
  est.converged = runs[best].converged;
  est.restarts_used = static_cast<int>(starts.size());
  return est;
}

/// min_j (1/l) max_ρ I_c(ρ, 𝒩_j^{⊗l}); never smaller than the maximin value.
inline CapacityEstimate minmax_coherent_info(const CompoundSet& set, int l, const OptimizerConfig& cfg = {},
                                             std::size_t budget = kDefaultBudgetDim, std::size_t threads = 1) {
  std::optional<CapacityEstimate> best;
  for (std::size_t j = 0; j < set.size(); ++j) {
    const CompoundSet single(set.member_names()[j], {set[j]});
    CapacityEstimate e = maximin_coherent_info(single, l, cfg, budget, threads);
    if (!best || e.value < best->value) best = std::move(e);
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Typical-state sequence

struct BsstPoint {
  int l = 0;
  double delta = 0.0;
  Eigen::Index rank = 0;
  double value = 0.0;  // (1/l) min_j I_c(π_{δ,l}, 𝒩_j^{⊗l})
  std::vector<double> per_channel;
};

struct BsstSequence {
  double target = 0.0;  // min_j I_c(ρ, 𝒩_j)
  std::vector<BsstPoint> points;
};

inline double default_delta_rule(int l) { return std::pow(static_cast<double>(l), -1.0 / 3.0); }

inline BsstSequence bsst_sequence(const DensityState& rho, const CompoundSet& set, std::span<const int> l_list,
                                  const std::function<double(int)>& delta_rule = default_delta_rule,
                                  std::size_t budget = kDefaultBudgetDim) {
  if (rho.dim() != set.dim_in()) throw DimensionError("bsst_sequence: state and channel dimensions differ");
  BsstSequence out;
  out.target = 1e300;
  for (const auto& c : set.channels()) out.target = std::min(out.target, coherent_information(rho, c));
  for (int l : l_list) {
    const double delta = delta_rule(l);
    const TypicalProjector q = frequency_typical_projector(rho, delta, l, budget);
    const DensityState pi = typical_state(q);
    BsstPoint p{l, delta, q.rank, 1e300, {}};
    for (const auto& c : set.channels()) {
      const double v = power_coherent_information(pi, c, static_cast<std::size_t>(l), budget) / l;
      p.per_channel.push_back(v);
      p.value = std::min(p.value, v);
    }
    out.points.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Direct part

/// Default constant in the typicality exponent c δ².
inline const double kDefaultTypicalityConstant = 1.0 / (2.0 * std::log(2.0));

struct EpsilonL {
  double value = 0.0;
  bool vacuous = false;  // c δ² ≤ h(l): first term alone is at least 6
};

/// 3 (2 · 2^{−l(c δ² − h(l))} + 2N √(2^{−l ε / 2}))
inline EpsilonL epsilon_l(int l, double delta, double c, int n, double epsilon, const ExponentBook& book) {
  if (!(c > 0)) throw ValidationError("epsilon_l: c must be positive");
  const double expo = c * delta * delta - book.h_l;
  const double v = 3.0 * (2.0 * std::exp2(-l * expo) + 2.0 * n * std::sqrt(std::exp2(-l * epsilon / 2.0)));
  return {v, expo <= 0.0};
}

/// k_l = ⌊2^{l (I_min − ε)}⌋
inline long long code_dimension(int l, double i_min, double epsilon) {
  const double x = std::exp2(l * (i_min - epsilon));
  return static_cast<long long>(std::floor(x + 1e-9));
}

/// The first k sequences of (C^{dG})^{⊗l} ordered by the max-norm distance of
/// their type from the uniform type, ties lexicographic.
inline std::vector<std::size_t> balanced_sequences(Eigen::Index dg, int l, std::size_t k) {
  const std::size_t total = ipow(static_cast<std::size_t>(dg), static_cast<std::size_t>(l));
  std::vector<std::pair<double, std::size_t>> keyed;
  std::vector<int> counts(static_cast<std::size_t>(dg));
  for (std::size_t code = 0; code < total; ++code) {
    std::fill(counts.begin(), counts.end(), 0);
    std::size_t c = code;
    for (int t = 0; t < l; ++t) {
      ++counts[c % static_cast<std::size_t>(dg)];
      c /= static_cast<std::size_t>(dg);
    }
    double dev = 0.0;
    for (int x : counts) dev = std::max(dev, std::abs(static_cast<double>(x) / l - 1.0 / static_cast<double>(dg)));
    keyed.emplace_back(dev, code);
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (std::abs(a.first - b.first) > 1e-12) return a.first < b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, keyed.size()); ++i) out.push_back(keyed[i].second);
  return out;
}

struct DirectPartReport {
  int l = 0;
  double delta = 0.0;
  double epsilon = 0.0;
  long long k_l = 0;
  double rate = 0.0;
  double i_min = 0.0;  // min_j I_c(π_G, 𝒩_j)
  double min_fidelity_clipped = 0.0;
  double min_fidelity_true = 0.0;
  std::vector<double> fidelity_clipped;  // per member, chosen code
  std::vector<double> fidelity_true;
  double epsilon_l = 0.0;
  bool epsilon_l_vacuous = false;
  double typicality_constant = 0.0;
  std::vector<std::size_t> reduced_kraus_counts;
  std::vector<double> clipped_weights;  // tr n̂_j(π_G^{⊗l})
  double clipped_average_weight = 0.0;
  int chosen_candidate = 0;            // 0 = aligned code, t ≥ 1 = Haar trial t − 1
  double chosen_code_fidelity = 0.0;   // F_{c,e} against the averaged clipped channel
  double haar_mean_code_fidelity = 0.0;
  double haar_stderr_code_fidelity = 0.0;
  bool optimizer_converged = true;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  // per Haar trial

  bool linkage_holds() const { return min_fidelity_true >= 3.0 * min_fidelity_clipped - 2.0 - 1e-9; }
};

/// Codes are subspaces F_l ⊂ G^{⊗l} of dimension k_l rotated by an encoder w on
/// G^{⊗l}.  Candidates are the aligned encoder w = 1 and `trials` Haar
/// encoders; the candidate with the largest min_j clipped fidelity is reported.
inline DirectPartReport direct_part_experiment(const CompoundSet& set, const SubspaceBasis& g, int l, double delta,
                                               double epsilon, int trials, const OptimizerConfig& cfg = {},
                                               double c = kDefaultTypicalityConstant,
                                               std::size_t budget = kDefaultBudgetDim, std::size_t threads = 1) {
  if (g.ambient_dim() != set.dim_in()) throw DimensionError("direct_part_experiment: G is not a subspace of the input");
  if (trials < 0) throw ValidationError("direct_part_experiment: trials must be nonnegative");
  for (const auto& ch : set.channels())
    if (!ch.trace_preserving()) throw ValidationError("direct_part_experiment: members must be trace preserving");
  const std::size_t ls = static_cast<std::size_t>(l);
  check_budget(ipow(static_cast<std::size_t>(std::max(set.dim_in(), set.dim_out())), ls), budget,
               "direct part on (" + std::to_string(std::max(set.dim_in(), set.dim_out())) + ")^" + std::to_string(l));
  DirectPartReport rep;
  rep.l = l;
  rep.delta = delta;
  rep.epsilon = epsilon;
  rep.seed = cfg.seed;
  rep.typicality_constant = c;

  const DensityState pi_g = maximally_mixed(g);
  rep.i_min = 1e300;
  for (const auto& ch : set.channels()) rep.i_min = std::min(rep.i_min, coherent_information(pi_g, ch));
  rep.k_l = code_dimension(l, rep.i_min, epsilon);
  if (rep.k_l < 1)
    throw ValidationError("direct_part_experiment: rate too low, k_l = floor(2^(l(I_min - epsilon))) = " +
                          std::to_string(rep.k_l));
  rep.rate = std::log2(static_cast<double>(rep.k_l)) / l;

  // Clipped reduced operations n̂_j = Q_j ∘ 𝒩_{j,δ,l}.
  std::vector<KrausMap> clipped, powers;
  const DensityState pi_gl = tensor_power(pi_g, ls);
  for (const auto& ch : set.channels()) {
    const ReducedOperation red = reduced_operation(ch, pi_g, delta, l, budget);
    const DensityState out = DensityState::normalized(apply(ch, pi_g));
    const TypicalProjector q = frequency_typical_projector(out, delta, l, budget);
    clipped.push_back(clip_output(red.map, q));
    rep.reduced_kraus_counts.push_back(red.kraus_count);
    rep.clipped_weights.push_back(apply(clipped.back(), pi_gl).trace().real());
    powers.push_back(tensor_power(ch, ls, budget));
  }
  rep.clipped_average_weight = sample_mean(rep.clipped_weights);
  const KrausMap avg_clipped = average(clipped);

  // G^{⊗l} and the code space F_l inside it.
  CMatrix gl = g.columns();
  for (int t = 1; t < l; ++t) gl = tensor(gl, g.columns());
  const SubspaceBasis g_l = SubspaceBasis::from_columns(gl);
  const auto seqs = balanced_sequences(g.k(), l, static_cast<std::size_t>(rep.k_l));
  CMatrix f_cols(gl.rows(), static_cast<Eigen::Index>(seqs.size()));
  for (std::size_t i = 0; i < seqs.size(); ++i) f_cols.col(static_cast<Eigen::Index>(i)) = gl.col(static_cast<Eigen::Index>(seqs[i]));
  const DensityState pi_f = maximally_mixed(SubspaceBasis::from_columns(f_cols));

  const HaarSampler sampler{g_l.k(), cfg.seed, 0};
  const std::size_t ncand = static_cast<std::size_t>(trials) + 1;
  struct Candidate {
    double code_fidelity = 0.0;
    double min_clipped = 0.0;
    bool converged = true;
  };
  std::vector<Candidate> cands(ncand);
  auto encoder = [&](std::size_t i) -> CMatrix {
    if (i == 0) return CMatrix::Identity(gl.rows(), gl.rows());
    return embed_unitary(haar_unitary(sampler.at(i - 1)), g_l);
  };
  auto evaluate = [&](const CMatrix& w, const KrausMap& recovery, const KrausMap& m) {
    return entanglement_fidelity(pi_f, compose(recovery, precompose_unitary(m, w)));
  };
  parallel_for(ncand, threads, [&](std::size_t i) {
    const CMatrix w = encoder(i);
    const CodeFidelityResult res = optimal_code_fidelity(pi_f, precompose_unitary(avg_clipped, w), cfg);
    double mc = 1e300;
    for (const auto& m : clipped) mc = std::min(mc, evaluate(w, res.recovery, m));
    cands[i] = {res.value, mc, res.converged};
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < ncand; ++i)
    if (cands[i].min_clipped > cands[best].min_clipped) best = i;

  std::vector<double> haar;
  for (std::size_t i = 1; i < ncand; ++i) {
    haar.push_back(cands[i].code_fidelity);
    rep.seeds.push_back(derive_seed(sampler.seed, i - 1));
  }
  if (!haar.empty()) {
    rep.haar_mean_code_fidelity = sample_mean(haar);
    rep.haar_stderr_code_fidelity = standard_error(haar);
  }
  rep.optimizer_converged = std::all_of(cands.begin(), cands.end(), [](const Candidate& x) { return x.converged; });
  rep.chosen_candidate = static_cast<int>(best);
  rep.chosen_code_fidelity = cands[best].code_fidelity;

  const CMatrix w = encoder(best);
  const CodeFidelityResult res = optimal_code_fidelity(pi_f, precompose_unitary(avg_clipped, w), cfg);
  rep.min_fidelity_clipped = rep.min_fidelity_true = 1e300;
  for (std::size_t j = 0; j < set.size(); ++j) {
    rep.fidelity_clipped.push_back(evaluate(w, res.recovery, clipped[j]));
    rep.fidelity_true.push_back(evaluate(w, res.recovery, powers[j]));
    rep.min_fidelity_clipped = std::min(rep.min_fidelity_clipped, rep.fidelity_clipped.back());
    rep.min_fidelity_true = std::min(rep.min_fidelity_true, rep.fidelity_true.back());
  }

  if (delta > 0 && delta < 0.5) {
    const ExponentBook book = exponents(static_cast<int>(set.dim_in()), static_cast<int>(set.dim_out()), l, delta);
    const EpsilonL e = epsilon_l(l, delta, c, static_cast<int>(set.size()), epsilon, book);
    rep.epsilon_l = e.value;
    rep.epsilon_l_vacuous = e.vacuous;
  }
  return rep;
}

}  // namespace qcap
