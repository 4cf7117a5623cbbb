// Quantum channels in Kraus form, their dilations and the entropic /
// fidelity quantities built on them.
#pragma once

#include "qcap/random.hpp"
#include "qcap/state.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qcap {

enum class MapKind { trace_preserving, trace_decreasing, invalid };

inline const char* to_string(MapKind k) {
  switch (k) {
    case MapKind::trace_preserving: return "trace_preserving";
    case MapKind::trace_decreasing: return "trace_decreasing";
    case MapKind::invalid: return "invalid";
  }
  return "invalid";
}

struct KindReport {
  MapKind kind;
  double tp_residual;     // ‖Σ K†K − I‖_∞
  double max_eigenvalue;  // λ_max(Σ K†K)
};

/// Classifies a Kraus family by Σ K†K.
inline KindReport verify_kind(std::span<const CMatrix> ops, Eigen::Index dim_in, double tol = kStructTol) {
  CMatrix sum = CMatrix::Zero(dim_in, dim_in);
  for (const auto& k : ops) {
    if (k.cols() != dim_in) throw DimensionError("verify_kind: Kraus operator has wrong input dimension");
    sum += k.adjoint() * k;
  }
  const double tp = max_abs(sum - CMatrix::Identity(dim_in, dim_in));
  const double lmax = max_eigenvalue(sum);
  if (tp <= tol) return {MapKind::trace_preserving, tp, lmax};
  if (lmax <= 1.0 + tol) return {MapKind::trace_decreasing, tp, lmax};
  return {MapKind::invalid, tp, lmax};
}

/// Completely positive map a ↦ Σ K a K† with Σ K†K ≤ I.
class KrausMap {
 public:
  KrausMap(std::vector<CMatrix> ops, Eigen::Index dim_in, Eigen::Index dim_out, double tol = kStructTol)
      : dim_in_(dim_in), dim_out_(dim_out), ops_(std::move(ops)) {
    if (dim_in < 1 || dim_out < 1) throw DimensionError("KrausMap: dimensions must be positive");
    if (ops_.empty()) ops_.push_back(CMatrix::Zero(dim_out, dim_in));
    for (const auto& k : ops_) {
      if (k.rows() != dim_out || k.cols() != dim_in)
        throw DimensionError("KrausMap: Kraus operator is " + std::to_string(k.rows()) + "x" +
                             std::to_string(k.cols()) + ", expected " + std::to_string(dim_out) + "x" +
                             std::to_string(dim_in));
    }
    const KindReport r = verify_kind(ops_, dim_in, tol);
    if (r.kind == MapKind::invalid)
      throw ValidationError("KrausMap: sum of K^dagger K exceeds identity (max eigenvalue " +
                            std::to_string(r.max_eigenvalue) + ")");
    kind_ = r.kind;
  }

  /// Infers dimensions from the first operator.
  static KrausMap from_ops(std::vector<CMatrix> ops) {
    if (ops.empty()) throw DimensionError("KrausMap: empty Kraus list");
    const auto din = ops.front().cols();
    const auto dout = ops.front().rows();
    return KrausMap(std::move(ops), din, dout);
  }

  Eigen::Index dim_in() const { return dim_in_; }
  Eigen::Index dim_out() const { return dim_out_; }
  const std::vector<CMatrix>& kraus_ops() const { return ops_; }
  std::size_t kraus_count() const { return ops_.size(); }
  MapKind kind() const { return kind_; }
  bool trace_preserving() const { return kind_ == MapKind::trace_preserving; }

 private:
  Eigen::Index dim_in_;
  Eigen::Index dim_out_;
  std::vector<CMatrix> ops_;
  MapKind kind_ = MapKind::trace_preserving;
};

inline KindReport verify_kind(const KrausMap& n) { return verify_kind(n.kraus_ops(), n.dim_in()); }

inline CMatrix apply(const KrausMap& n, const CMatrix& a) {
  if (a.rows() != n.dim_in() || a.cols() != n.dim_in())
    throw DimensionError("apply: operator dimension " + std::to_string(a.rows()) + " does not match map input " +
                         std::to_string(n.dim_in()));
  CMatrix out = CMatrix::Zero(n.dim_out(), n.dim_out());
  for (const auto& k : n.kraus_ops()) out.noalias() += k * a * k.adjoint();
  return out;
}

inline CMatrix apply(const KrausMap& n, const DensityState& rho) { return apply(n, rho.matrix()); }

/// Heisenberg-picture map b ↦ Σ K† b K.
inline CMatrix adjoint_apply(const KrausMap& n, const CMatrix& b) {
  if (b.rows() != n.dim_out() || b.cols() != n.dim_out()) throw DimensionError("adjoint_apply: dimension mismatch");
  CMatrix out = CMatrix::Zero(n.dim_in(), n.dim_in());
  for (const auto& k : n.kraus_ops()) out.noalias() += k.adjoint() * b * k;
  return out;
}

/// a ∘ b (b acts first); Kraus set {a_i b_j}.
inline KrausMap compose(const KrausMap& a, const KrausMap& b) {
  if (b.dim_out() != a.dim_in()) throw DimensionError("compose: output of first map does not match input of second");
  std::vector<CMatrix> ops;
  ops.reserve(a.kraus_count() * b.kraus_count());
  for (const auto& ka : a.kraus_ops())
    for (const auto& kb : b.kraus_ops()) ops.push_back(ka * kb);
  return KrausMap(std::move(ops), b.dim_in(), a.dim_out());
}

/// a ⊗ b
inline KrausMap tensor(const KrausMap& a, const KrausMap& b) {
  std::vector<CMatrix> ops;
  ops.reserve(a.kraus_count() * b.kraus_count());
  for (const auto& ka : a.kraus_ops())
    for (const auto& kb : b.kraus_ops()) ops.push_back(tensor(ka, kb));
  return KrausMap(std::move(ops), a.dim_in() * b.dim_in(), a.dim_out() * b.dim_out());
}

/// n^{⊗l}; Kraus operators are all words of length l.
inline KrausMap tensor_power(const KrausMap& n, std::size_t l, std::size_t budget = kDefaultBudgetDim) {
  if (l == 0) throw DimensionError("tensor_power: l must be positive");
  check_budget(ipow(static_cast<std::size_t>(std::max(n.dim_in(), n.dim_out())), l), budget,
               "tensor power of channel (" + std::to_string(n.dim_in()) + "->" + std::to_string(n.dim_out()) +
                   ")^" + std::to_string(l));
  KrausMap out = n;
  for (std::size_t i = 1; i < l; ++i) out = tensor(out, n);
  return out;
}

/// Collection of channels sharing input and output dimensions.
class CompoundSet {
 public:
  CompoundSet(std::string name, std::vector<KrausMap> channels, std::vector<std::string> member_names = {})
      : name_(std::move(name)), channels_(std::move(channels)), member_names_(std::move(member_names)) {
    if (channels_.empty()) throw ValidationError("CompoundSet: needs at least one channel");
    for (const auto& c : channels_) {
      if (c.dim_in() != channels_.front().dim_in() || c.dim_out() != channels_.front().dim_out())
        throw DimensionError("CompoundSet: members have different dimensions");
    }
    if (member_names_.empty())
      for (std::size_t i = 0; i < channels_.size(); ++i) member_names_.push_back("channel" + std::to_string(i));
    if (member_names_.size() != channels_.size()) throw ValidationError("CompoundSet: names/channels length mismatch");
  }

  const std::string& name() const { return name_; }
  std::size_t size() const { return channels_.size(); }
  const std::vector<KrausMap>& channels() const { return channels_; }
  const KrausMap& operator[](std::size_t i) const { return channels_[i]; }
  const std::vector<std::string>& member_names() const { return member_names_; }
  Eigen::Index dim_in() const { return channels_.front().dim_in(); }
  Eigen::Index dim_out() const { return channels_.front().dim_out(); }

 private:
  std::string name_;
  std::vector<KrausMap> channels_;
  std::vector<std::string> member_names_;
};

/// Uniform mixture (1/N) Σ 𝒩_j with Kraus set {K_{j,i}/√N}.
inline KrausMap average(std::span<const KrausMap> maps) {
  if (maps.empty()) throw ValidationError("average: empty set");
  const double s = 1.0 / std::sqrt(static_cast<double>(maps.size()));
  std::vector<CMatrix> ops;
  for (const auto& m : maps) {
    if (m.dim_in() != maps.front().dim_in() || m.dim_out() != maps.front().dim_out())
      throw DimensionError("average: members have different dimensions");
    for (const auto& k : m.kraus_ops()) ops.push_back(s * k);
  }
  return KrausMap(std::move(ops), maps.front().dim_in(), maps.front().dim_out());
}

inline KrausMap average(const CompoundSet& set) { return average(set.channels()); }

/// v: C^{dim_in} → C^{dim_out} ⊗ C^{dim_env} together with a projection on the
/// environment; the channel is tr_env((1 ⊗ p_e) v a v† (1 ⊗ p_e)).
struct StinespringDilation {
  CMatrix isometry;
  Eigen::Index dim_in = 0;
  Eigen::Index dim_out = 0;
  Eigen::Index dim_env = 0;
  OrthogonalProjector env_projector = OrthogonalProjector::identity(1);
};

/// V φ = Σ_i (K_i φ) ⊗ e_i with p_e = 1.  V is an isometry iff the map is
/// trace preserving.
inline StinespringDilation stinespring(const KrausMap& n) {
  const Eigen::Index m = static_cast<Eigen::Index>(n.kraus_count());
  CMatrix v = CMatrix::Zero(n.dim_out() * m, n.dim_in());
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index a = 0; a < n.dim_out(); ++a) v.row(a * m + i) = n.kraus_ops()[i].row(a);
  return {std::move(v), n.dim_in(), n.dim_out(), m, OrthogonalProjector::identity(m)};
}

/// Dilation with a genuine isometry: the rows of the defect √(1 − Σ K†K) are
/// spread over extra environment levels which p_e projects away.
inline StinespringDilation isometric_dilation(const KrausMap& n) {
  if (n.trace_preserving()) return stinespring(n);
  CMatrix sum = CMatrix::Zero(n.dim_in(), n.dim_in());
  for (const auto& k : n.kraus_ops()) sum += k.adjoint() * k;
  const CMatrix defect = psd_sqrt(CMatrix::Identity(n.dim_in(), n.dim_in()) - sum);
  const Eigen::Index m = static_cast<Eigen::Index>(n.kraus_count());
  const Eigen::Index extra = (n.dim_in() + n.dim_out() - 1) / n.dim_out();
  const Eigen::Index env = m + extra;
  CMatrix v = CMatrix::Zero(n.dim_out() * env, n.dim_in());
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index a = 0; a < n.dim_out(); ++a) v.row(a * env + i) = n.kraus_ops()[i].row(a);
  for (Eigen::Index r = 0; r < n.dim_in(); ++r) {
    const Eigen::Index a = r % n.dim_out();
    const Eigen::Index level = m + r / n.dim_out();
    v.row(a * env + level) = defect.row(r);
  }
  CMatrix pe = CMatrix::Zero(env, env);
  for (Eigen::Index i = 0; i < m; ++i) pe(i, i) = 1.0;
  return {std::move(v), n.dim_in(), n.dim_out(), env, OrthogonalProjector::from_matrix(pe)};
}

/// tr_env((1 ⊗ p_e) V a V† (1 ⊗ p_e)).
inline CMatrix dilation_apply(const StinespringDilation& d, const CMatrix& a) {
  const CMatrix proj = tensor(CMatrix::Identity(d.dim_out, d.dim_out), d.env_projector.matrix());
  const CMatrix big = proj * d.isometry * a * d.isometry.adjoint() * proj;
  return partial_trace(big, d.dim_out, d.dim_env, Subsystem::B);
}

/// Complementary map a ↦ tr_out(V a V†) into the environment; Kraus operators
/// E_a with (E_a)_{i,b} = (K_i)_{a,b}.
inline KrausMap complementary(const KrausMap& n) {
  const Eigen::Index m = static_cast<Eigen::Index>(n.kraus_count());
  std::vector<CMatrix> ops;
  ops.reserve(n.dim_out());
  for (Eigen::Index a = 0; a < n.dim_out(); ++a) {
    CMatrix e(m, n.dim_in());
    for (Eigen::Index i = 0; i < m; ++i) e.row(i) = n.kraus_ops()[i].row(a);
    ops.push_back(std::move(e));
  }
  return KrausMap(std::move(ops), n.dim_in(), m);
}

/// (id ⊗ 𝒩)(|ψ⟩⟨ψ|) for a purification ψ ∈ H_a ⊗ H (reference first).
inline CMatrix extend_on_purification(const KrausMap& n, const PureVector& psi, Eigen::Index dim_ref) {
  if (psi.dim() != dim_ref * n.dim_in()) throw DimensionError("extend_on_purification: purification size mismatch");
  const CMatrix id = CMatrix::Identity(dim_ref, dim_ref);
  const CVector& v = psi.amplitudes();
  CMatrix out = CMatrix::Zero(dim_ref * n.dim_out(), dim_ref * n.dim_out());
  for (const auto& k : n.kraus_ops()) {
    const CVector w = tensor(id, k) * v;
    out.noalias() += w * w.adjoint();
  }
  return out;
}

/// S_e(ρ, 𝒩) = S((id ⊗ 𝒩)(|ψ⟩⟨ψ|)).  For trace-decreasing maps the output is
/// not renormalised.
inline double entropy_exchange(const DensityState& rho, const KrausMap& n) {
  if (rho.dim() != n.dim_in()) throw DimensionError("entropy_exchange: state and map dimensions differ");
  return operator_entropy(extend_on_purification(n, purify(rho), rho.dim()));
}

/// I_c(ρ, 𝒩) = S(𝒩(ρ)) − S_e(ρ, 𝒩).
inline double coherent_information(const DensityState& rho, const KrausMap& n) {
  if (rho.dim() != n.dim_in()) throw DimensionError("coherent_information: state and map dimensions differ");
  return operator_entropy(apply(n, rho)) - entropy_exchange(rho, n);
}

/// F_e(ρ, 𝒩) = Σ_i |tr(ρ K_i)|²; requires dim_in == dim_out.
inline double entanglement_fidelity(const DensityState& rho, const KrausMap& n) {
  if (rho.dim() != n.dim_in() || n.dim_in() != n.dim_out())
    throw DimensionError("entanglement_fidelity: map must act on the state's space");
  double f = 0.0;
  for (const auto& k : n.kraus_ops()) f += std::norm((rho.matrix() * k).trace());
  return f;
}

/// ⟨ψ, (id ⊗ 𝒩)(|ψ⟩⟨ψ|) ψ⟩ for an explicit purification.
inline double entanglement_fidelity(const PureVector& psi, const KrausMap& n) {
  if (n.dim_in() != n.dim_out() || psi.dim() % n.dim_in() != 0)
    throw DimensionError("entanglement_fidelity: purification does not match map");
  const Eigen::Index dref = psi.dim() / n.dim_in();
  const CMatrix out = extend_on_purification(n, psi, dref);
  return (psi.amplitudes().adjoint() * out * psi.amplitudes())(0, 0).real();
}

/// J = Σ_{ij} |i⟩⟨j| ⊗ 𝒩(|i⟩⟨j|) on input ⊗ output.
inline CMatrix choi(const KrausMap& n) {
  const Eigen::Index din = n.dim_in(), dout = n.dim_out();
  CMatrix j = CMatrix::Zero(din * dout, din * dout);
  for (const auto& k : n.kraus_ops()) {
    // vec with input index major: v[i*dout + a] = K(a, i)
    CVector v(din * dout);
    for (Eigen::Index i = 0; i < din; ++i)
      for (Eigen::Index a = 0; a < dout; ++a) v(i * dout + a) = k(a, i);
    j.noalias() += v * v.adjoint();
  }
  return j;
}

/// Minimal Kraus family from a PSD Choi matrix (eigenvalues below `cutoff`
/// dropped).  Throws ValidationError on a non-PSD input.
inline std::vector<CMatrix> choi_kraus_ops(const CMatrix& j, Eigen::Index din, Eigen::Index dout,
                                           double cutoff = kEigenCutoff) {
  if (j.rows() != din * dout || j.cols() != din * dout) throw DimensionError("choi_to_kraus: Choi size mismatch");
  const double herm = hermiticity_residual(j);
  if (herm > kStructTol) throw ValidationError("choi_to_kraus: Choi matrix not Hermitian");
  const Spectrum s = eigh(j);
  if (s.values.size() > 0 && s.values.minCoeff() < -kStructTol)
    throw ValidationError("choi_to_kraus: Choi matrix not PSD (min eigenvalue " +
                          std::to_string(s.values.minCoeff()) + ")");
  std::vector<CMatrix> ops;
  for (Eigen::Index m = 0; m < s.values.size(); ++m) {
    if (s.values(m) <= cutoff) continue;
    const double w = std::sqrt(s.values(m));
    CMatrix k(dout, din);
    for (Eigen::Index i = 0; i < din; ++i)
      for (Eigen::Index a = 0; a < dout; ++a) k(a, i) = w * s.vectors(i * dout + a, m);
    ops.push_back(std::move(k));
  }
  if (ops.empty()) ops.push_back(CMatrix::Zero(dout, din));
  return ops;
}

inline KrausMap choi_to_kraus(const CMatrix& j, Eigen::Index din, Eigen::Index dout) {
  return KrausMap(choi_kraus_ops(j, din, dout), din, dout);
}

/// Same map with the minimal number of Kraus operators.
inline KrausMap minimal_kraus(const KrausMap& n) { return choi_to_kraus(choi(n), n.dim_in(), n.dim_out()); }

// ---------------------------------------------------------------------------
// Named channels

inline CMatrix pauli(int i) {
  CMatrix p = CMatrix::Zero(2, 2);
  switch (i) {
    case 0: p << 1, 0, 0, 1; break;
    case 1: p << 0, 1, 1, 0; break;
    case 2: p << 0, Complex(0, -1), Complex(0, 1), 0; break;
    case 3: p << 1, 0, 0, -1; break;
    default: throw std::out_of_range("pauli index");
  }
  return p;
}

inline KrausMap identity_channel(Eigen::Index d) { return KrausMap({CMatrix::Identity(d, d)}, d, d); }

inline KrausMap unitary_channel(const CMatrix& u) {
  if (!is_unitary(u, kStructTol)) throw ValidationError("unitary_channel: matrix is not unitary");
  return KrausMap({u}, u.cols(), u.rows());
}

/// Fully depolarizing qubit channel, Kraus {σ_i / 2}.
inline KrausMap fully_depolarizing_qubit() {
  std::vector<CMatrix> ops;
  for (int i = 0; i < 4; ++i) ops.push_back(pauli(i) / 2.0);
  return KrausMap(std::move(ops), 2, 2);
}

enum class PauliAxis { x = 1, y = 2, z = 3 };

/// {√(1−p) I, √p σ_axis}
inline KrausMap dephasing_qubit(double p, PauliAxis axis = PauliAxis::z) {
  if (p < 0 || p > 1) throw ValidationError("dephasing_qubit: p outside [0,1]");
  std::vector<CMatrix> ops{std::sqrt(1 - p) * pauli(0), std::sqrt(p) * pauli(static_cast<int>(axis))};
  return KrausMap(std::move(ops), 2, 2);
}

/// Qubit erasure channel into C^3; level 2 is the erasure flag.
inline KrausMap erasure_qubit(double p) {
  if (p < 0 || p > 1) throw ValidationError("erasure_qubit: p outside [0,1]");
  CMatrix k0 = CMatrix::Zero(3, 2), k1 = CMatrix::Zero(3, 2), k2 = CMatrix::Zero(3, 2);
  k0(0, 0) = k0(1, 1) = std::sqrt(1 - p);
  k1(2, 0) = std::sqrt(p);
  k2(2, 1) = std::sqrt(p);
  return KrausMap({k0, k1, k2}, 2, 3);
}

inline KrausMap amplitude_damping_qubit(double gamma) {
  CMatrix k0 = CMatrix::Zero(2, 2), k1 = CMatrix::Zero(2, 2);
  k0(0, 0) = 1;
  k0(1, 1) = std::sqrt(1 - gamma);
  k1(0, 1) = std::sqrt(gamma);
  return KrausMap({k0, k1}, 2, 2);
}

/// 𝒬(a) = q a q
inline KrausMap projection_map(const OrthogonalProjector& q) { return KrausMap({q.matrix()}, q.dim(), q.dim()); }

/// Random CPTP map: Haar isometry C^{din} → C^{dout} ⊗ C^{env}, environment traced out.
inline KrausMap random_channel(Rng& rng, Eigen::Index din, Eigen::Index dout, Eigen::Index env) {
  if (dout * env < din) throw DimensionError("random_channel: dout*env must be at least din");
  const CMatrix v = haar_isometry(rng, dout * env, din);
  std::vector<CMatrix> ops;
  for (Eigen::Index i = 0; i < env; ++i) {
    CMatrix k(dout, din);
    for (Eigen::Index a = 0; a < dout; ++a) k.row(a) = v.row(a * env + i);
    ops.push_back(std::move(k));
  }
  return KrausMap(std::move(ops), din, dout);
}

/// Random trace-decreasing map: a random channel into dout + 1 levels with the
/// last level discarded.
inline KrausMap random_trace_decreasing(Rng& rng, Eigen::Index din, Eigen::Index dout, Eigen::Index env) {
  const KrausMap full = random_channel(rng, din, dout + 1, env);
  std::vector<CMatrix> ops;
  for (const auto& k : full.kraus_ops()) ops.push_back(k.topRows(dout));
  return KrausMap(std::move(ops), din, dout);
}

/// 𝒩 ∘ 𝒰 for a (possibly rectangular) isometry u.
inline KrausMap precompose_unitary(const KrausMap& n, const CMatrix& u) {
  std::vector<CMatrix> ops;
  for (const auto& k : n.kraus_ops()) ops.push_back(k * u);
  return KrausMap(std::move(ops), u.cols(), n.dim_out());
}

/// w · 𝒩(·) · w†
inline KrausMap postcompose(const CMatrix& w, const KrausMap& n) {
  std::vector<CMatrix> ops;
  for (const auto& k : n.kraus_ops()) ops.push_back(w * k);
  return KrausMap(std::move(ops), n.dim_in(), w.rows());
}

}  // namespace qcap
