// Tensor powers of channels evaluated site by site, never forming the m^l
// Kraus words.  Channels whose Kraus operators map into a direct sum of output
// blocks are evaluated block pattern by block pattern, which keeps the dense
// objects at the size of the largest block product.
#pragma once

#include "qcap/channels.hpp"

#include <numeric>

namespace qcap {

/// (I_L ⊗ K ⊗ I_R) x for x with row index (l, i, r) of shape (L, din, R).
inline CMatrix left_apply_site(const CMatrix& k, const CMatrix& x, Eigen::Index left, Eigen::Index right) {
  const Eigen::Index din = k.cols(), dout = k.rows();
  if (x.rows() != left * din * right) throw DimensionError("left_apply_site: operator size mismatch");
  CMatrix out = CMatrix::Zero(left * dout * right, x.cols());
  for (Eigen::Index l = 0; l < left; ++l)
    for (Eigen::Index a = 0; a < dout; ++a)
      for (Eigen::Index i = 0; i < din; ++i) {
        const Complex c = k(a, i);
        if (c == Complex(0.0)) continue;
        out.middleRows((l * dout + a) * right, right) += c * x.middleRows((l * din + i) * right, right);
      }
  return out;
}

/// Σ_K (I ⊗ K ⊗ I) x (I ⊗ K ⊗ I)† on site `site` of an operator on ⊗_t C^{dims[t]};
/// `dims[site]` is updated to the output dimension.
inline CMatrix apply_on_site(const std::vector<CMatrix>& kraus, const CMatrix& x, std::vector<Eigen::Index>& dims,
                             std::size_t site) {
  Eigen::Index left = 1, right = 1;
  for (std::size_t t = 0; t < site; ++t) left *= dims[t];
  for (std::size_t t = site + 1; t < dims.size(); ++t) right *= dims[t];
  const Eigen::Index dout = kraus.front().rows();
  CMatrix out = CMatrix::Zero(left * dout * right, left * dout * right);
  for (const auto& k : kraus) {
    const CMatrix y = left_apply_site(k, x, left, right);
    out += left_apply_site(k, y.adjoint(), left, right).adjoint();
  }
  dims[site] = dout;
  return out;
}

/// 𝒩^{⊗l}(x) evaluated site by site.
inline CMatrix apply_power(const KrausMap& n, const CMatrix& x, std::size_t l, std::size_t budget = kDefaultBudgetDim) {
  check_budget(ipow(static_cast<std::size_t>(std::max(n.dim_in(), n.dim_out())), l), budget,
               "tensor power output of channel (" + std::to_string(n.dim_in()) + "->" +
                   std::to_string(n.dim_out()) + ")^" + std::to_string(l));
  std::vector<Eigen::Index> dims(l, n.dim_in());
  CMatrix y = x;
  for (std::size_t t = 0; t < l; ++t) y = apply_on_site(n.kraus_ops(), y, dims, t);
  return y;
}

/// Output direct-sum structure: each Kraus operator's rows lie in exactly one block.
struct BlockStructure {
  std::vector<std::vector<Eigen::Index>> blocks;    // output indices per block
  std::vector<std::vector<CMatrix>> block_kraus;    // Kraus operators restricted to each block
};

inline BlockStructure output_blocks(const KrausMap& n, double tol = 1e-14) {
  const Eigen::Index dout = n.dim_out();
  std::vector<Eigen::Index> parent(dout);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](Eigen::Index a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  std::vector<Eigen::Index> owner_row(n.kraus_count(), -1);
  for (std::size_t m = 0; m < n.kraus_count(); ++m) {
    const CMatrix& k = n.kraus_ops()[m];
    Eigen::Index first = -1;
    for (Eigen::Index a = 0; a < dout; ++a) {
      if (k.row(a).cwiseAbs().maxCoeff() <= tol) continue;
      if (first < 0) first = a;
      else parent[find(a)] = find(first);
    }
    owner_row[m] = first;
  }
  BlockStructure bs;
  std::vector<Eigen::Index> block_of(dout, -1);
  for (Eigen::Index a = 0; a < dout; ++a) {
    const Eigen::Index root = find(a);
    if (block_of[root] < 0) {
      block_of[root] = static_cast<Eigen::Index>(bs.blocks.size());
      bs.blocks.emplace_back();
    }
    bs.blocks[block_of[root]].push_back(a);
  }
  bs.block_kraus.resize(bs.blocks.size());
  for (std::size_t m = 0; m < n.kraus_count(); ++m) {
    if (owner_row[m] < 0) continue;
    const Eigen::Index b = block_of[find(owner_row[m])];
    const auto& rows = bs.blocks[b];
    CMatrix k(static_cast<Eigen::Index>(rows.size()), n.dim_in());
    for (std::size_t r = 0; r < rows.size(); ++r) k.row(static_cast<Eigen::Index>(r)) = n.kraus_ops()[m].row(rows[r]);
    bs.block_kraus[b].push_back(std::move(k));
  }
  // Blocks no Kraus operator reaches carry zero output.
  std::vector<std::vector<Eigen::Index>> blocks;
  std::vector<std::vector<CMatrix>> kraus;
  for (std::size_t b = 0; b < bs.blocks.size(); ++b) {
    if (bs.block_kraus[b].empty()) continue;
    blocks.push_back(std::move(bs.blocks[b]));
    kraus.push_back(std::move(bs.block_kraus[b]));
  }
  return {std::move(blocks), std::move(kraus)};
}

/// S(𝒩^{⊗l}(x)) in bits for PSD x on (C^{din})^{⊗l}, summed over block
/// patterns.  The budget applies to the largest dense operator formed.
inline double power_output_entropy(const KrausMap& n, const CMatrix& x, std::size_t l,
                                   std::size_t budget = kDefaultBudgetDim) {
  const std::size_t din = static_cast<std::size_t>(n.dim_in());
  check_budget(ipow(din, l), budget, "tensor power input (" + std::to_string(din) + ")^" + std::to_string(l));
  const BlockStructure bs = output_blocks(n);
  const std::size_t nb = bs.blocks.size();
  std::size_t largest = 0;
  for (const auto& b : bs.blocks) largest = std::max(largest, b.size());
  check_budget(ipow(std::max(largest, din), l), budget,
               "largest output block (" + std::to_string(largest) + ")^" + std::to_string(l));

  double entropy = 0.0;
  std::vector<std::size_t> pattern(l, 0);
  const std::size_t total = ipow(nb, l);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t t = l; t-- > 0;) {
      pattern[t] = c % nb;
      c /= nb;
    }
    std::vector<Eigen::Index> dims(l, n.dim_in());
    CMatrix y = x;
    for (std::size_t t = 0; t < l; ++t) {
      y = apply_on_site(bs.block_kraus[pattern[t]], y, dims, t);
      if (y.cwiseAbs().maxCoeff() == 0.0) break;
    }
    entropy += operator_entropy(y);
  }
  return entropy;
}

/// I_c(ρ, 𝒩^{⊗l}) = S(𝒩^{⊗l}(ρ)) − S(𝒩^{c⊗l}(ρ)) for ρ on (C^{din})^{⊗l}.
inline double power_coherent_information(const DensityState& rho, const KrausMap& n, std::size_t l,
                                         std::size_t budget = kDefaultBudgetDim) {
  if (static_cast<std::size_t>(rho.dim()) != ipow(static_cast<std::size_t>(n.dim_in()), l))
    throw DimensionError("power_coherent_information: state is not on the l-fold input space");
  return power_output_entropy(n, rho.matrix(), l, budget) -
         power_output_entropy(complementary(n), rho.matrix(), l, budget);
}

}  // namespace qcap
