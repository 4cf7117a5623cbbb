// Decoupling bounds, random coding, typicality, capacity estimates and the
// lemma verifier.
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace qcap;

namespace {

double trace_norm_dense(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

// 1 − ‖ρ_AE − ρ_A ⊗ ρ_E‖₁ for a channel, from index loops over ψ_{AKE}.
double dense_decoupling_bound(const CMatrix& rho, const KrausMap& n) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
  const Eigen::Index d = rho.rows(), dk = n.dim_out();
  const Eigen::Index de = static_cast<Eigen::Index>(n.kraus_count());
  CMatrix psi = CMatrix::Zero(d, d);  // psi(a, x)
  for (Eigen::Index t = 0; t < d; ++t) {
    const double lam = std::max(es.eigenvalues()(t), 0.0);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index x = 0; x < d; ++x)
        psi(a, x) += std::sqrt(lam) * std::conj(es.eigenvectors()(a, t)) * es.eigenvectors()(x, t);
  }
  std::vector<CMatrix> amp;  // amp[e](a, k)
  for (Eigen::Index e = 0; e < de; ++e) amp.push_back(psi * n.kraus_ops()[e].transpose());
  CMatrix ae = CMatrix::Zero(d * de, d * de);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index e = 0; e < de; ++e)
      for (Eigen::Index b = 0; b < d; ++b)
        for (Eigen::Index f = 0; f < de; ++f)
          for (Eigen::Index k = 0; k < dk; ++k) ae(a * de + e, b * de + f) += amp[e](a, k) * std::conj(amp[f](b, k));
  CMatrix ra = CMatrix::Zero(d, d), re = CMatrix::Zero(de, de);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      for (Eigen::Index e = 0; e < de; ++e) ra(a, b) += ae(a * de + e, b * de + e);
  for (Eigen::Index e = 0; e < de; ++e)
    for (Eigen::Index f = 0; f < de; ++f)
      for (Eigen::Index a = 0; a < d; ++a) re(e, f) += ae(a * de + e, a * de + f);
  CMatrix prod(d * de, d * de);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      for (Eigen::Index e = 0; e < de; ++e)
        for (Eigen::Index f = 0; f < de; ++f) prod(a * de + e, b * de + f) = ra(a, b) * re(e, f);
  return 1.0 - trace_norm_dense(ae - prod);
}

KrausMap depolarizing_qubit(double p) {
  std::vector<CMatrix> ops{std::sqrt(1 - 3 * p / 4) * pauli(0)};
  for (int i = 1; i <= 3; ++i) ops.push_back(std::sqrt(p / 4) * pauli(i));
  return KrausMap(std::move(ops), 2, 2);
}

CMatrix diag2(double a, double b) {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// decoupling-coding

TEST(DecouplingStates, ProjectionMapHalvesWeight) {
  const auto q = OrthogonalProjector::from_matrix(diag2(1, 0));
  const DecouplingTriple t = decoupling_states(DensityState::maximally_mixed(2), projection_map(q));
  EXPECT_NEAR(t.w, 0.5, 1e-12);
  EXPECT_LT(max_abs(t.rho_out.matrix() - diag2(1, 0)), 1e-12);
  EXPECT_LT(max_abs(t.rho_a.matrix() - diag2(0.5, 0.5)), 1e-12);
}

TEST(DecouplingStates, MarginalsAgreeWithDirectComputation) {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const DensityState rho = random_state(rng, 3);
    const KrausMap n = random_trace_decreasing(rng, 3, 2, 2);
    const DecouplingTriple t = decoupling_states(rho, n);
    const CMatrix out = oracle::channel_output(n, rho.matrix());
    EXPECT_NEAR(t.w, out.trace().real(), 1e-12);
    EXPECT_LT(max_abs(t.rho_out.matrix() - out / out.trace().real()), 1e-10);
    // The reference marginal of the standard purification is ρᵀ.
    EXPECT_LT(max_abs(t.rho_a.matrix() - rho.matrix().transpose()), 1e-10);
    const Eigen::Index da = t.dim_a, de = t.dim_e;
    CMatrix re = CMatrix::Zero(de, de);
    for (Eigen::Index e = 0; e < de; ++e)
      for (Eigen::Index f = 0; f < de; ++f)
        for (Eigen::Index a = 0; a < da; ++a) re(e, f) += t.rho_ae.matrix()(a * de + e, a * de + f);
    EXPECT_LT(max_abs(re - t.rho_e.matrix()), 1e-10);
  }
}

TEST(DecouplingBound, IdentityChannelGivesOne) {
  Rng rng(22);
  for (int rep = 0; rep < 5; ++rep) {
    const DensityState rho = random_state(rng, 3);
    EXPECT_NEAR(decoupling_bound(decoupling_states(rho, identity_channel(3))), 1.0, 1e-9);
  }
}

TEST(DecouplingBound, DepolarizingMatchesDenseComputation) {
  Rng rng(23);
  for (double p : {0.0, 0.25, 0.5, 1.0}) {
    const KrausMap n = depolarizing_qubit(p);
    for (int rep = 0; rep < 3; ++rep) {
      const DensityState rho = rep == 0 ? DensityState::maximally_mixed(2) : random_state(rng, 2);
      EXPECT_NEAR(decoupling_bound(decoupling_states(rho, n)), dense_decoupling_bound(rho.matrix(), n), 1e-9) << p;
    }
  }
}

TEST(AveragedDilation, ReproducesAverageChannel) {
  Rng rng(24);
  const CompoundSet set("mix", {dephasing_qubit(0.3), random_channel(rng, 2, 2, 3), identity_channel(2)});
  const StinespringDilation v = averaged_dilation(set);
  EXPECT_LT(isometry_residual(v.isometry), 1e-10);
  for (int rep = 0; rep < 5; ++rep) {
    const DensityState rho = random_state(rng, 2);
    CMatrix avg = CMatrix::Zero(2, 2);
    for (const auto& c : set.channels()) avg += oracle::channel_output(c, rho.matrix()) / 3.0;
    EXPECT_LT(max_abs(dilation_apply(v, rho.matrix()) - avg), 1e-10);
  }
}

TEST(HaarSampler, DeterministicAndUnbiased) {
  const HaarSampler s{3, 99, 0};
  EXPECT_EQ(haar_unitary(s.at(5)), haar_unitary(s.at(5)));
  EXPECT_GT(max_abs(haar_unitary(s.at(5)) - haar_unitary(s.at(6))), 1e-3);
  Rng rng(25);
  const CMatrix x = random_hermitian(rng, 3);
  CMatrix mean = CMatrix::Zero(3, 3);
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    const CMatrix u = haar_unitary(s.at(static_cast<std::uint64_t>(t)));
    EXPECT_TRUE(is_unitary(u));
    mean += u * x * u.adjoint() / static_cast<double>(trials);
  }
  const CMatrix expect = x.trace() / 3.0 * CMatrix::Identity(3, 3);
  EXPECT_LT(max_abs(mean - expect), 0.1 * std::max(1.0, max_abs(x)));
}

TEST(EmbedUnitary, ActsOnSubspaceOnly) {
  Rng rng(26);
  const SubspaceBasis g = SubspaceBasis::leading(4, 2);
  const CMatrix u = haar_unitary(rng, 2);
  const CMatrix w = embed_unitary(u, g);
  EXPECT_TRUE(is_unitary(w));
  EXPECT_LT(max_abs(w.topLeftCorner(2, 2) - u), 1e-14);
  EXPECT_LT(max_abs(w.bottomRightCorner(2, 2) - CMatrix::Identity(2, 2)), 1e-14);
  EXPECT_LT(max_abs(w.topRightCorner(2, 2)), 1e-14);
}

TEST(Theorem2Rhs, IdentityValues) {
  const std::vector<KrausMap> id16{identity_channel(16)};
  EXPECT_NEAR(theorem2_rhs(2, id16, DensityState::maximally_mixed(16)).rhs, 1.0 - 2.0 * std::sqrt(2.0) / 4.0, 1e-12);
  EXPECT_NEAR(theorem2_rhs(2, id16, DensityState::maximally_mixed(16)).rhs, 0.29289, 1e-5);
  const std::vector<KrausMap> id4{identity_channel(4)};
  EXPECT_NEAR(theorem2_rhs(1, id4, DensityState::maximally_mixed(4)).rhs, 0.0, 1e-12);
  EXPECT_THROW(theorem2_rhs(0, id4, DensityState::maximally_mixed(4)), ValidationError);
}

TEST(Theorem2Rhs, DecreasesInK) {
  Rng rng(27);
  const std::vector<KrausMap> maps{random_channel(rng, 4, 4, 2), random_channel(rng, 4, 4, 3)};
  double prev = 1e300;
  for (int k = 1; k <= 4; ++k) {
    const double r = theorem2_rhs(k, maps, DensityState::maximally_mixed(4)).rhs;
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(Theorem2Rhs, MonteCarloMeanIdentityIsOne) {
  const std::vector<KrausMap> maps{identity_channel(4)};
  const OneShotBoundReport r = mc_code_fidelity(maps, SubspaceBasis::full(4), 2, 4, HaarSampler{4, 3, 0});
  EXPECT_NEAR(r.mc_mean, 1.0, 1e-6);
  EXPECT_GE(r.mc_mean + 3 * r.mc_stderr + 1e-6, r.rhs);
}

TEST(Lemma3, AdmissibleRandomPairsSatisfyInequality) {
  Rng rng(28);
  for (int rep = 0; rep < 300; ++rep) {
    const auto [l, d] = admissible_pair(rng, 1 + static_cast<Eigen::Index>(rep % 6));
    ASSERT_TRUE(lemma3_admissible(l, d));
    const Lemma3Result r = lemma3_check(l, d);
    EXPECT_TRUE(r.ok) << r.lhs << " > " << r.rhs;
  }
}

TEST(Lemma3, ConstantMatrices) {
  const RMatrix ones = RMatrix::Ones(3, 3);
  const Lemma3Result r = lemma3_check(ones, ones);
  EXPECT_NEAR(r.lhs, 3.0, 1e-12);
  EXPECT_NEAR(r.rhs, 6.0, 1e-12);
  RMatrix bad = ones;
  bad(0, 1) = 2.0;  // off-diagonal L above its diagonal entries
  EXPECT_FALSE(lemma3_admissible(bad, ones));
  EXPECT_THROW(lemma3_check(bad, ones), ValidationError);
}

TEST(Lemma4, FullRankProjectorIsExactPerSample) {
  Rng rng(29);
  const CMatrix x = ginibre(rng, 3, 3), y = ginibre(rng, 3, 3);
  const SubspaceBasis g = SubspaceBasis::full(3);
  const Lemma4Result r = lemma4_average(x, y, OrthogonalProjector::identity(3), g, 50, HaarSampler{3, 1, 0});
  EXPECT_LT(std::abs(r.mc - r.exact), 1e-9);
  const Complex direct = (x.adjoint() * y).trace() - x.adjoint().trace() * y.trace() / 3.0;
  EXPECT_LT(std::abs(r.exact - direct), 1e-9);
}

TEST(Lemma4, ZeroOperatorsGiveZero) {
  const CMatrix z = CMatrix::Zero(2, 2);
  const Lemma4Result r =
      lemma4_average(z, z, OrthogonalProjector::from_matrix(diag2(1, 0)), SubspaceBasis::full(2), 10, HaarSampler{2, 1, 0});
  EXPECT_EQ(r.mc, Complex(0, 0));
  EXPECT_EQ(r.exact, Complex(0, 0));
}

TEST(Lemma4, MonteCarloWithinFourSigma) {
  Rng rng(30);
  const CMatrix x = ginibre(rng, 2, 2), y = ginibre(rng, 2, 2);
  const Lemma4Result r = lemma4_average(x, y, OrthogonalProjector::from_matrix(diag2(1, 0)), SubspaceBasis::full(2),
                                        20000, HaarSampler{2, 5, 0});
  EXPECT_TRUE(r.within(4.0)) << r.mc << " vs " << r.exact << " se " << r.stderr_;
}

TEST(Djl, IdentityAndDepolarizing) {
  const std::vector<KrausMap> maps{identity_channel(2), fully_depolarizing_qubit()};
  const DjlMatrices m = djl_matrix(maps, DensityState::maximally_mixed(2));
  EXPECT_LT((m.d - RMatrix::Constant(2, 2, 0.5)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(m.l(0, 0), 1);
  EXPECT_EQ(m.l(0, 1), 1);
  EXPECT_EQ(m.l(1, 1), 4);
}

TEST(Djl, GramMatrixIsPositive) {
  Rng rng(31);
  const std::vector<KrausMap> maps{random_channel(rng, 3, 3, 2), random_channel(rng, 3, 3, 3), identity_channel(3)};
  const DjlMatrices m = djl_matrix(maps, DensityState::maximally_mixed(3));
  Eigen::SelfAdjointEigenSolver<RMatrix> es(m.d);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
}

TEST(Djl, HaarAverageBoundedByScaledDjl) {
  Rng rng(32);
  const std::vector<KrausMap> maps{random_channel(rng, 3, 3, 2), random_channel(rng, 3, 3, 2)};
  const SubspaceBasis g = SubspaceBasis::full(3);
  const DjlMatrices base = djl_matrix(maps, maximally_mixed(g));
  CMatrix pm = CMatrix::Zero(3, 3);
  pm(0, 0) = pm(1, 1) = 1;
  const OrthogonalProjector p = OrthogonalProjector::from_matrix(pm);
  const double k = 2.0;
  const HaarSampler s{3, 7, 0};
  const int trials = 600;
  std::vector<RMatrix> samples;
  for (int t = 0; t < trials; ++t) samples.push_back(djl_of_unitary(maps, p, haar_unitary(s.at(static_cast<std::uint64_t>(t)))));
  for (Eigen::Index j = 0; j < 2; ++j)
    for (Eigen::Index m = 0; m < 2; ++m) {
      std::vector<double> v;
      for (const auto& x : samples) v.push_back(x(j, m));
      EXPECT_LE(sample_mean(v), k * k * base.d(j, m) + 4 * standard_error(v)) << j << "," << m;
    }
}

// ---------------------------------------------------------------------------
// typicality

TEST(Exponents, KnownValues) {
  EXPECT_NEAR(exponents(2, 2, 3, 0.1).h_l, 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(exponents(2, 2, 3, 0.1).phi_delta, 0.53219, 1e-5);
  EXPECT_NEAR(exponents(2, 2, 2, 0.1).h_l, 2.0 * std::log2(3.0), 1e-12);
  for (double bad : {0.0, 0.5, 0.7, -0.1}) EXPECT_THROW(exponents(2, 2, 2, bad), ValidationError);
  EXPECT_THROW(exponents(2, 2, 0, 0.1), ValidationError);
}

TEST(Exponents, HDecreasesFromThree) {
  for (int l = 3; l < 64; ++l) EXPECT_LT(h_of_l(2, 2, l + 1), h_of_l(2, 2, l)) << l;
}

TEST(TypicalProjector, MaximallyMixedQubit) {
  const TypicalProjector q = frequency_typical_projector(DensityState::maximally_mixed(2), 0.1, 2);
  EXPECT_EQ(q.rank, 2);
  EXPECT_EQ(q.weight(), 0.5);
  EXPECT_NEAR((tensor_power(DensityState::maximally_mixed(2).matrix(), 2) * q.projector.matrix()).trace().real(), 0.5, 1e-14);
}

TEST(TypicalProjector, PureStateHasRankOne) {
  Rng rng(33);
  const PureVector v = random_pure(rng, 2);
  const DensityState rho = DensityState::pure(v.amplitudes());
  for (int l = 1; l <= 5; ++l) {
    const TypicalProjector q = frequency_typical_projector(rho, 0.1, l);
    EXPECT_EQ(q.rank, 1);
    EXPECT_NEAR(q.weight(), 1.0, 1e-9);
    const DensityState pi = typical_state(q);
    EXPECT_LT(max_abs(pi.matrix() - tensor_power(rho.matrix(), static_cast<std::size_t>(l))), 1e-9);
  }
}

TEST(TypicalProjector, WeightMatchesBinomialSum) {
  const double w = oracle::binomial(10, 8) * std::pow(0.9, 8) * 0.01 + 10 * std::pow(0.9, 9) * 0.1 + std::pow(0.9, 10);
  const DensityState rho = DensityState::from_matrix(diag2(0.9, 0.1));
  EXPECT_NEAR(typical_weight(rho, 0.15, 10), w, 1e-12);
  const TypicalProjector q = frequency_typical_projector(rho, 0.15, 10);
  EXPECT_EQ(q.rank, 45 + 10 + 1);
  EXPECT_NEAR((tensor_power(rho.matrix(), 10) * q.projector.matrix()).trace().real(), w, 1e-10);
}

TEST(TypicalProjector, CommutesWithPowerState) {
  Rng rng(34);
  for (int rep = 0; rep < 5; ++rep) {
    const DensityState rho = random_state(rng, 2);
    const TypicalProjector q = frequency_typical_projector(rho, 0.2, 3);
    const CMatrix r3 = tensor_power(rho.matrix(), 3);
    EXPECT_LT(max_abs(r3 * q.projector.matrix() - q.projector.matrix() * r3), 1e-12);
    EXPECT_NEAR(q.weight(), (r3 * q.projector.matrix()).trace().real(), 1e-10);
  }
}

TEST(TypicalProjector, EigenvalueCapOnRandomStates) {
  Rng rng(35);
  for (int rep = 0; rep < 20; ++rep) {
    const DensityState rho = random_state(rng, 2);
    const double s = von_neumann_entropy(rho);
    for (int l : {2, 3, 4}) {
      const double delta = 0.2;
      const TypicalProjector q = frequency_typical_projector(rho, delta, l);
      EXPECT_LE(q.max_probability(), std::exp2(-l * (s - phi_of_delta(2, 2, delta))));
      // Every eigenvalue of ρ^{⊗l} q is one of the type-class probabilities.
      const RVector ev = eigenvalues(tensor_power(rho.matrix(), static_cast<std::size_t>(l)) * q.projector.matrix());
      EXPECT_LE(ev.maxCoeff(), q.max_probability() + 1e-12);
    }
  }
}

TEST(TypicalWeight, QubitValuesMatchBinomialOracle) {
  Rng rng(36);
  for (int rep = 0; rep < 20; ++rep) {
    const double p = rng.uniform(0.5, 1.0);
    const DensityState rho = DensityState::from_matrix(diag2(p, 1 - p));
    for (int l : {2, 4, 8, 16}) EXPECT_NEAR(typical_weight(rho, 0.1, l), oracle::qubit_typical_weight(p, 0.1, l), 1e-12);
  }
}

// Stated trend form of the typical-weight property.  Lattice effects of the
// frequency grid at these lengths make it fail on many spectra; see README.
TEST(TypicalWeight, NondecreasingOverDoublingLengths) {
  Rng rng(37);
  int violations = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const DensityState rho = random_state(rng, 2);
    double prev = -1;
    for (int l : {2, 4, 8, 16}) {
      const double w = typical_weight(rho, 0.1, l);
      if (w < prev - 1e-12) ++violations;
      prev = w;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(TypicalState, MaximallyMixedOnTypicalSubspace) {
  const DensityState pi = typical_state(DensityState::maximally_mixed(2), 0.1, 2);
  EXPECT_NEAR(pi.matrix().trace().real(), 1.0, 1e-14);
  CMatrix expect = CMatrix::Zero(4, 4);
  expect(1, 1) = expect(2, 2) = 0.5;
  EXPECT_LT(max_abs(pi.matrix() - expect), 1e-12);
  EXPECT_THROW(typical_state(DensityState::maximally_mixed(2), 0.1, 3), DegenerateError);
}

TEST(ReducedOperation, UnitaryChannelIsUnchanged) {
  Rng rng(38);
  const KrausMap u = unitary_channel(haar_unitary(rng, 2));
  const ReducedOperation r = reduced_operation(u, DensityState::maximally_mixed(2), 0.1, 2);
  EXPECT_EQ(r.kraus_count, 1u);
  const DensityState rho = random_state(rng, 4);
  EXPECT_LT(max_abs(qcap::apply(r.map, rho) - qcap::apply(tensor_power(u, 2), rho)), 1e-10);
}

TEST(ReducedOperation, DephasingCountByEnumeration) {
  const ReducedOperation r = reduced_operation(dephasing_qubit(0.5), DensityState::maximally_mixed(2), 0.1, 2);
  EXPECT_NEAR(r.env_entropy, 1.0, 1e-12);
  // σ_e = π₂, so only the two words of type (1, 1) are typical.
  EXPECT_EQ(r.kraus_count, 2u);
  const double bound = std::exp2(2 * (1.0 + 0.53219 + h_of_l(2, 2, 2)));
  EXPECT_LE(static_cast<double>(r.kraus_count), bound);
}

TEST(ReducedOperation, KrausCountBoundOnRandomChannels) {
  Rng rng(39);
  for (int rep = 0; rep < 10; ++rep) {
    const KrausMap n = rep % 2 ? dephasing_qubit(rng.uniform(0.05, 0.5)) : random_channel(rng, 2, 2, 2);
    for (int l : {2, 3}) {
      const double delta = 0.2;
      const ReducedOperation r = reduced_operation(n, DensityState::maximally_mixed(2), delta, l);
      const ExponentBook b = exponents(2, 2, l, delta);
      EXPECT_EQ(static_cast<Eigen::Index>(r.kraus_count), r.env_projector.rank);
      EXPECT_LE(static_cast<double>(r.kraus_count), std::exp2(l * (r.env_entropy + b.phi_delta + b.h_l)));
    }
  }
}

TEST(ReducedOperation, DifferenceIsCompletelyPositive) {
  Rng rng(40);
  for (int rep = 0; rep < 5; ++rep) {
    const KrausMap n = random_channel(rng, 2, 2, 2);
    const ReducedOperation r = reduced_operation(n, DensityState::maximally_mixed(2), 0.2, 2);
    EXPECT_GE(min_eigenvalue(choi(tensor_power(n, 2)) - choi(r.map)), -1e-9);
  }
}

TEST(ReducedOperation, FidelityMonotoneUnderProcessing) {
  Rng rng(41);
  for (int rep = 0; rep < 200; ++rep) {
    const KrausMap n = random_channel(rng, 2, 2, 2);
    const ReducedOperation r = reduced_operation(n, random_state(rng, 2), 0.2, 2);
    const DensityState rho = random_state(rng, 3);
    const KrausMap enc = random_channel(rng, 3, 4, 2), dec = random_channel(rng, 4, 3, 2);
    const double clipped = entanglement_fidelity(rho, compose(dec, compose(r.map, enc)));
    const double full = entanglement_fidelity(rho, compose(dec, compose(tensor_power(n, 2), enc)));
    EXPECT_LE(clipped, full + 1e-12);
  }
}

TEST(ClipOutput, IdentityZeroAndTrace) {
  Rng rng(42);
  const KrausMap n = random_channel(rng, 2, 3, 2);
  const DensityState rho = random_state(rng, 2);
  EXPECT_LT(max_abs(qcap::apply(clip_output(n, OrthogonalProjector::identity(3)), rho) - qcap::apply(n, rho)), 1e-14);
  EXPECT_EQ(qcap::apply(clip_output(n, OrthogonalProjector::zero(3)), rho).trace().real(), 0.0);
  CMatrix qm = CMatrix::Zero(3, 3);
  qm(0, 0) = qm(2, 2) = 1;
  const CMatrix out = oracle::channel_output(n, rho.matrix());
  EXPECT_NEAR(qcap::apply(clip_output(n, OrthogonalProjector::from_matrix(qm)), rho).trace().real(),
              (qm * out * qm).trace().real(), 1e-12);
  EXPECT_THROW(clip_output(n, OrthogonalProjector::identity(2)), DimensionError);
}

TEST(L2Bound, UnitaryPureOutputIsTight) {
  Rng rng(43);
  const CMatrix u = haar_unitary(rng, 2);
  const DensityState pure = DensityState::pure(random_pure(rng, 2).amplitudes());
  const KrausMap n = unitary_channel(u);
  const TypicalProjector q = frequency_typical_projector(DensityState::normalized(qcap::apply(n, pure)), 0.1, 2);
  const L2BoundCheck c = l2_bound_check(clip_output(tensor_power(n, 2), q), tensor_power(pure, 2), 0.0, 0.0, 2);
  EXPECT_NEAR(c.lhs, 1.0, 1e-10);
  EXPECT_NEAR(c.rhs, 1.0, 1e-15);
  EXPECT_TRUE(c.holds);
}

TEST(L2Bound, ClippedReducedOperations) {
  Rng rng(44);
  for (int rep = 0; rep < 6; ++rep) {
    const KrausMap n = rep == 0 ? dephasing_qubit(0.5) : random_channel(rng, 2, 2, 2);
    const double delta = 0.2;
    const DensityState pi = DensityState::maximally_mixed(2);
    const ReducedOperation r = reduced_operation(n, pi, delta, 2);
    const DensityState out = DensityState::normalized(qcap::apply(n, pi));
    const KrausMap nhat = clip_output(r.map, frequency_typical_projector(out, delta, 2));
    const L2BoundCheck c = l2_bound_check(nhat, tensor_power(pi, 2), von_neumann_entropy(out), phi_of_delta(2, 2, delta), 2);
    EXPECT_TRUE(c.holds) << c.lhs << " > " << c.rhs;
    EXPECT_TRUE(c.superadditive);
    EXPECT_NEAR(c.lhs, qcap::apply(nhat, tensor_power(pi, 2)).squaredNorm(), 1e-12);
  }
}

// ---------------------------------------------------------------------------
// capacity

TEST(IcGradient, MatchesFiniteDifferences) {
  Rng rng(45);
  const double h = 1e-5;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rep % 2);
    const KrausMap n = rep % 10 == 0 ? fully_depolarizing_qubit() : random_channel(rng, d, 2 + rep % 3, 2);
    const Eigen::Index din = n.dim_in();
    const DensityState rho = random_state(rng, din);
    CMatrix dir = random_hermitian(rng, din);
    dir -= dir.trace() / static_cast<double>(din) * CMatrix::Identity(din, din);
    dir /= dir.norm();
    const double fd = (oracle::coherent_info(n, rho.matrix() + h * dir) - oracle::coherent_info(n, rho.matrix() - h * dir)) / (2 * h);
    const double an = hs_inner(ic_gradient(rho, n), dir).real();
    EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(1.0, std::abs(an))) << rep;
  }
}

TEST(IcGradient, IdentityIsEntropyGradientUpToIdentity) {
  Rng rng(46);
  const DensityState rho = random_state(rng, 3);
  const CMatrix expected = -hermitian_function(rho.matrix(), [](double x) { return std::log2(x); }) -
                           CMatrix::Identity(3, 3) / std::log(2.0);
  const CMatrix diff = ic_gradient(rho, identity_channel(3)) - expected;
  const Complex c = diff(0, 0);
  EXPECT_LT(max_abs(diff - c * CMatrix::Identity(3, 3)), 1e-6);
}

TEST(Maximin, ErasureValues) {
  EXPECT_NEAR(maximin_coherent_info(CompoundSet("e", {erasure_qubit(0.25)}), 1).value, 0.5, 1e-3);
  const CompoundSet pair("pair", {erasure_qubit(0.1), erasure_qubit(0.2)});
  const CapacityEstimate e = maximin_coherent_info(pair, 1);
  EXPECT_NEAR(e.value, 0.6, 1e-3);
  EXPECT_TRUE(e.converged);
  EXPECT_GE(minmax_coherent_info(pair, 1).value, e.value - 1e-9);
}

TEST(Maximin, MatchesGridSearch) {
  Rng rng(47);
  for (int rep = 0; rep < 2; ++rep) {
    const std::vector<KrausMap> maps{oracle::rotated_damping_qubit(rng, rng.uniform(0.05, 0.3)),
                                     oracle::rotated_damping_qubit(rng, rng.uniform(0.05, 0.3))};
    const double grid = oracle::grid_maximin(maps, 0.05);
    const double opt = maximin_coherent_info(CompoundSet("r", maps), 1).value;
    EXPECT_GE(opt, grid - 1e-9);
    EXPECT_LE(opt - grid, 5e-3);
  }
}

TEST(Maximin, InvariantUnderInputRotation) {
  Rng rng(48);
  const std::vector<KrausMap> maps{oracle::rotated_damping_qubit(rng, 0.2), oracle::rotated_damping_qubit(rng, 0.1)};
  const CMatrix u = haar_unitary(rng, 2);
  std::vector<KrausMap> rotated;
  for (const auto& m : maps) rotated.push_back(precompose_unitary(m, u.adjoint()));
  const double a = maximin_coherent_info(CompoundSet("a", maps), 1).value;
  const double b = maximin_coherent_info(CompoundSet("b", rotated), 1).value;
  EXPECT_NEAR(a, b, 1e-6);
}

TEST(Maximin, TwoLetterNotBelowSingleLetter) {
  const CompoundSet set("e", {erasure_qubit(0.25)});
  EXPECT_GE(maximin_coherent_info(set, 2).value, maximin_coherent_info(set, 1).value - 1e-6);
}

TEST(Bsst, IdentityOnMaximallyMixed) {
  const std::vector<int> ls{2, 4};
  const BsstSequence s = bsst_sequence(DensityState::maximally_mixed(2), CompoundSet("id", {identity_channel(2)}), ls,
                                       [](int) { return 0.1; });
  EXPECT_NEAR(s.target, 1.0, 1e-12);
  ASSERT_EQ(s.points.size(), 2u);
  EXPECT_EQ(s.points[0].rank, 2);
  EXPECT_NEAR(s.points[0].value, 0.5, 1e-9);
  // l = 4: the balanced type (2, 2) has C(4, 2) = 6 sequences.
  EXPECT_EQ(s.points[1].rank, 6);
  EXPECT_NEAR(s.points[1].value, std::log2(6.0) / 4, 1e-9);
}

TEST(EpsilonL, VacuityFlag) {
  const ExponentBook b = exponents(2, 2, 2, 0.1);
  const EpsilonL e = epsilon_l(2, 0.1, kDefaultTypicalityConstant, 1, 0.5, b);
  EXPECT_TRUE(e.vacuous);
  EXPECT_GE(e.value, 6.0);
  const double expect = 3 * (2 * std::exp2(-2 * (kDefaultTypicalityConstant * 0.01 - b.h_l)) + 2 * std::sqrt(std::exp2(-0.5)));
  EXPECT_NEAR(e.value, expect, 1e-9 * expect);
  EXPECT_THROW(epsilon_l(2, 0.1, 0.0, 1, 0.5, b), ValidationError);
}

TEST(CodeDimension, SmallCases) {
  EXPECT_EQ(code_dimension(2, 1.0, 0.5), 2);
  EXPECT_EQ(code_dimension(4, 1.0, 0.5), 4);
  EXPECT_EQ(code_dimension(2, 0.1, 0.5), 0);
  EXPECT_EQ(balanced_sequences(2, 2, 2), (std::vector<std::size_t>{1, 2}));
}

TEST(DirectPart, IdentityQubitIsPerfect) {
  const DirectPartReport r =
      direct_part_experiment(CompoundSet("id", {identity_channel(2)}), SubspaceBasis::full(2), 2, 0.1, 0.5, 2);
  EXPECT_EQ(r.k_l, 2);
  EXPECT_NEAR(r.min_fidelity_clipped, 1.0, 1e-6);
  EXPECT_NEAR(r.min_fidelity_true, 1.0, 1e-6);
  EXPECT_TRUE(r.linkage_holds());
}

TEST(DirectPart, RateTooLowIsRejected) {
  EXPECT_THROW(direct_part_experiment(CompoundSet("dep", {fully_depolarizing_qubit()}), SubspaceBasis::full(2), 2, 0.1,
                                      0.5, 1),
               ValidationError);
}

// ---------------------------------------------------------------------------
// verifier

TEST(Verifier, Lemma5TrivialProjector) {
  Rng rng(49);
  const DensityState rho = random_state(rng, 2);
  const KrausMap a = random_channel(rng, 2, 3, 2), d = random_channel(rng, 3, 2, 2);
  const LemmaCheckRecord r = lemma5_check(rho, a, d, OrthogonalProjector::identity(3));
  EXPECT_TRUE(r.ok);
  const double f = entanglement_fidelity(rho, compose(d, a));
  EXPECT_NEAR(r.rhs, f, 1e-12);
  EXPECT_NEAR(r.lhs, 3 * f - 2, 1e-12);
}

TEST(Verifier, Lemma6IdentityIsEquality) {
  Rng rng(50);
  for (int rep = 0; rep < 20; ++rep) {
    const CMatrix u = haar_unitary(rng, 3);
    const PureVector x1 = PureVector::from_amplitudes(u.col(0)), x2 = PureVector::from_amplitudes(u.col(1));
    const LemmaCheckRecord r = lemma6_check(identity_channel(3), x1, x2, random_pure(rng, 3));
    EXPECT_NEAR(r.lhs, r.rhs, 1e-9);
    EXPECT_TRUE(r.ok);
  }
  const CVector e0 = basis_vector(3, 0);
  EXPECT_THROW(lemma6_check(identity_channel(3), PureVector::from_amplitudes(e0), PureVector::from_amplitudes(e0),
                            PureVector::from_amplitudes(e0)),
               ValidationError);
}

TEST(Verifier, SuiteIsDeterministicAcrossThreads) {
  SuiteSizes s = SuiteSizes::empty();
  s.lemma1 = 4;
  s.lemma3 = 20;
  s.lemma4 = {{2, 1}};
  s.lemma4_trials = 300;
  s.lemma5 = 10;
  s.lemma6 = 10;
  const SuiteReport a = run_suite(7, s, {}, 1), b = run_suite(7, s, {}, 3);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].lemma_id, b.records[i].lemma_id);
    EXPECT_EQ(a.records[i].instance_seed, b.records[i].instance_seed);
    EXPECT_EQ(a.records[i].lhs, b.records[i].lhs);
    EXPECT_EQ(a.records[i].rhs, b.records[i].rhs);
  }
  EXPECT_TRUE(a.ok());
  EXPECT_EQ(a.passed, b.passed);
  EXPECT_GT(a.passed, 0);
}

TEST(Verifier, EmptySuite) {
  const SuiteReport r = run_suite(1, SuiteSizes::empty());
  EXPECT_EQ(r.passed, 0);
  EXPECT_EQ(r.failed, 0);
  EXPECT_TRUE(r.ok());
}
