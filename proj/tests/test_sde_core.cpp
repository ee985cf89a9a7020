#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "masga/errors.hpp"
#include "masga/estimators.hpp"
#include "masga/rng.hpp"
#include "masga/sde.hpp"
#include "test_support.hpp"

namespace masga {
namespace {

using testing::column_data;
using testing::logistic_data;

Vec v1(double x) { return Vec::Constant(1, x); }

TEST(NoiseSource, SameKeySameSequence) {
  NoiseSource a(42, {1, 2, 3, StreamRole::kGaussian});
  NoiseSource b(42, {1, 2, 3, StreamRole::kGaussian});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.gaussian(), b.gaussian());
  EXPECT_EQ(a.counter(), b.counter());
}

TEST(NoiseSource, DistinctStreamsDiffer) {
  std::set<std::uint64_t> first;
  for (std::uint32_t role = 1; role <= 9; ++role) {
    for (std::uint64_t path = 0; path < 20; ++path) {
      NoiseSource s(7, {0, 0, path, static_cast<StreamRole>(role)});
      first.insert(s());
    }
  }
  EXPECT_EQ(first.size(), 180u);
}

TEST(NoiseSource, StreamsAreUncorrelated) {
  NoiseSource a(3, {0, 0, 0, StreamRole::kGaussian});
  NoiseSource b(3, {0, 0, 1, StreamRole::kGaussian});
  double sxy = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sxy += a.gaussian() * b.gaussian();
  EXPECT_LT(std::abs(sxy / n), 4.0 / std::sqrt(n));
}

TEST(NoiseSource, UniformIndexInRange) {
  NoiseSource s(1, {});
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[s.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(SgldStep, ZeroDriftZeroNoiseIsFixedPoint) {
  const ChainState s{Vec::Zero(2), 0};
  const ChainState next = sgld_step(s, Vec::Zero(2), 0.3, 0.0, Vec::Ones(2));
  EXPECT_EQ(next.position, Vec::Zero(2));
  EXPECT_EQ(next.step_index, 1u);
}

TEST(SgldStep, DriftOnly) {
  const ChainState next = sgld_step({v1(1.0), 0}, v1(-1.0), 0.1, 0.0, v1(0.0));
  EXPECT_DOUBLE_EQ(next.position[0], 0.9);
}

TEST(SgldStep, NoiseOnly) {
  const ChainState next = sgld_step({v1(0.0), 0}, v1(0.0), 0.04, 1.0, v1(2.0));
  EXPECT_DOUBLE_EQ(next.position[0], 0.4);
}

TEST(SgldStep, NonFiniteDriftThrowsWithStep) {
  try {
    sgld_step({v1(0.0), 17}, v1(std::nan("")), 0.1, 1.0, v1(0.0));
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 17u);
  }
}

TEST(SgldStep, LeavingTheBoxThrows) {
  EXPECT_THROW(sgld_step({v1(0.0), 0}, v1(1e10), 1.0, 0.0, v1(0.0)), DivergenceError);
}

TEST(SgldStep, RejectsBadInputs) {
  EXPECT_THROW(sgld_step({v1(0.0), 0}, v1(0.0), 0.0, 1.0, v1(0.0)), RangeError);
  EXPECT_THROW(sgld_step({v1(0.0), 0}, Vec::Zero(2), 0.1, 1.0, v1(0.0)), DimensionError);
}

TEST(CoarseIncrement, Examples) {
  EXPECT_EQ(coarse_increment(Vec::Zero(2), Vec::Zero(2)), Vec::Zero(2));
  EXPECT_DOUBLE_EQ(coarse_increment(v1(1), v1(1))[0], std::sqrt(2.0));
  EXPECT_EQ(coarse_increment(v1(3), v1(-3))[0], 0.0);
  EXPECT_THROW(coarse_increment(v1(1), Vec::Zero(2)), DimensionError);
}

TEST(CoarseIncrement, MatchesSumOfFineIncrements) {
  NoiseSource noise(5, {});
  const double h = 0.0123;
  for (int i = 0; i < 10000; ++i) {
    const Vec z1 = v1(noise.gaussian());
    const Vec z2 = v1(noise.gaussian());
    const double coarse = std::sqrt(2 * h) * coarse_increment(z1, z2)[0];
    const double fine = std::sqrt(h) * z1[0] + std::sqrt(h) * z2[0];
    // Rounding scales with the summands, not with a possibly cancelled sum.
    const double scale = std::sqrt(h) * (std::abs(z1[0]) + std::abs(z2[0]));
    const double ulp = std::nextafter(scale, INFINITY) - scale;
    EXPECT_LE(std::abs(coarse - fine), 4 * ulp + 1e-300);
  }
}

TEST(SimulateChain, OuContraction) {
  const OuModel model(column_data({0.0}), 1.0);
  const ChainSpec spec{1, 0.1, 1, 0.0, ReplacementMode::kWith};
  const auto t = simulate_chain(model, spec, PathKey{1, 0, 0, 0}, v1(1.0));
  EXPECT_DOUBLE_EQ(t.final_state.position[0], 0.9);
}

TEST(SimulateChain, ZeroStepsKeepsStart) {
  const OuModel model(column_data({0.5, 1.5}), 1.0);
  const ChainSpec spec{1, 0.1, 0, 1.0, ReplacementMode::kWith};
  const auto t = simulate_chain(model, spec, PathKey{1, 0, 0, 0}, v1(2.5), true);
  EXPECT_EQ(t.final_state.position[0], 2.5);
  EXPECT_EQ(t.path.size(), 1u);
}

TEST(SimulateChain, OuVarianceMatchesClosedForm) {
  // m = 1, alpha = 1, h = 0.1, beta = 1: Var X_20 = h sum_{j<20} 0.81^j.
  const OuModel model(column_data({0.3}), 1.0);
  const ChainSpec spec{1, 0.1, 20, 1.0, ReplacementMode::kWith};
  testing::Moments mom;
  for (std::uint64_t p = 0; p < 100000; ++p) {
    mom.add(simulate_chain(model, spec, PathKey{11, 0, 0, p}, v1(0.0)).final_state.position[0]);
  }
  double exact = 0.0;
  for (int j = 0; j < 20; ++j) exact += 0.1 * std::pow(0.81, j);
  EXPECT_NEAR(mom.variance / exact, 1.0, 0.05);
}

TEST(SimulateChain, DivergenceCarriesStep) {
  const OuModel model(column_data({0.0}), 100.0);
  const ChainSpec spec{1, 1.0, 100, 0.0, ReplacementMode::kWith};
  try {
    simulate_chain(model, spec, PathKey{}, v1(1.0));
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.step(), 1u);
    EXPECT_LT(e.step(), 100u);
  }
}

ClusterGeometry geometry(std::size_t s, double h, std::uint64_t n, bool sub, bool time,
                         double beta, Coupling c = Coupling::kAntithetic,
                         ReplacementMode mode = ReplacementMode::kWithout) {
  return ClusterGeometry{s, h, n, sub, time, beta, mode, c};
}

TEST(Cluster, ZeroStepsAllAtStart) {
  const LogisticModel model(logistic_data(100, 3), PriorKind::kGaussian);
  const Vec x0 = Vec::LinSpaced(3, -1, 1);
  const auto c = simulate_cluster(model, geometry(8, 0.01, 0, true, true, 0.1), PathKey{}, x0);
  for (const auto& chain : c.chains) EXPECT_EQ(chain.position, x0);
  EXPECT_EQ(c.psi().norm(), 0.0);
}

TEST(Cluster, LabelsAndWeights) {
  EXPECT_EQ(chain_label(Branch::kCoarseMinus, Branch::kCoarsePlus), "c-c+");
  EXPECT_EQ(chain_label(Branch::kFine, Branch::kFine), "ff");
  ChainCluster c;
  c.geometry = geometry(4, 0.1, 2, true, true, 0.0);
  EXPECT_EQ(c.weight(Branch::kFine, Branch::kCoarsePlus), -0.5);
  EXPECT_EQ(c.weight(Branch::kCoarseMinus, Branch::kCoarsePlus), 0.25);
  double total = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int t = 0; t < 3; ++t) total += c.weight(static_cast<Branch>(r), static_cast<Branch>(t));
  EXPECT_EQ(total, 0.0);
  c.geometry.split_time = false;
  EXPECT_FALSE(c.active(Branch::kFine, Branch::kCoarseMinus));
  EXPECT_TRUE(c.active(Branch::kCoarsePlus, Branch::kFine));
}

TEST(Cluster, OuCollapseStateIndependentDrift) {
  RowMatrix rows(16, 2);
  NoiseSource noise(9, {});
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = 1 + noise.gaussian();
  const OuModel model(testing::matrix_data(rows), 0.0);
  for (std::uint64_t p = 0; p < 200; ++p) {
    for (auto [sub, time] : {std::pair{true, true}, {true, false}, {false, true}}) {
      const auto c = simulate_cluster(model, geometry(4, 0.05, 8, sub, time, 0.25),
                                      PathKey{3, 1, 1, p}, Vec::Ones(2));
      EXPECT_LE(c.psi().cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Cluster, OuCollapseWhenSubsamplingIsSplit) {
  const OuModel model(column_data({0.1, 2.0, -1.0, 0.7, 3.3, 1.1, -0.4, 0.0}), 1.0);
  for (std::uint64_t p = 0; p < 200; ++p) {
    for (bool time : {true, false}) {
      const auto c = simulate_cluster(model, geometry(4, 0.1, 16, true, time, 0.5),
                                      PathKey{4, 1, 2, p}, v1(0.5));
      EXPECT_LE(std::abs(c.psi()[0]), 1e-12);
    }
  }
}

TEST(Cluster, NoiseSharingReplay) {
  const LogisticModel model(logistic_data(200, 3), PriorKind::kGaussian);
  std::vector<BlockTrace> trace;
  const double h = 0.01;
  simulate_cluster(model, geometry(8, h, 20, true, true, 0.1), PathKey{1, 2, 3, 4}, Vec::Zero(3),
                   &trace);
  ASSERT_EQ(trace.size(), 10u);
  for (const auto& b : trace) {
    const Vec fine = std::sqrt(h) * b.z1 + std::sqrt(h) * b.z2;
    const Vec coarse = std::sqrt(2 * h) * b.z_coarse;
    EXPECT_LE((fine - coarse).cwiseAbs().maxCoeff(), 1e-15);
  }
  // The replayed Gaussians are the first draws of the path's Gaussian stream.
  NoiseSource gauss = PathKey{1, 2, 3, 4}.stream(StreamRole::kGaussian);
  Vec z(3);
  gauss.fill_gaussian(z);
  EXPECT_EQ(z, trace[0].z1);
}

TEST(Cluster, FineChainMatchesDirectReplay) {
  // The ff chain steps with (Z1, U_k) then (Z2, U_{k+1}); rebuild it by hand.
  const LogisticModel model(logistic_data(100, 2), PriorKind::kGaussian);
  const PathKey key{8, 1, 1, 2};
  const double h = 0.02;
  const double beta = 0.1;
  const auto c = simulate_cluster(model, geometry(8, h, 6, true, true, beta), key, Vec::Zero(2));
  NoiseSource gauss = key.stream(StreamRole::kGaussian);
  NoiseSource batches = key.stream(StreamRole::kFineBatch);
  Vec x = Vec::Zero(2);
  Vec xm = Vec::Zero(2);  // c- in subsampling, c+ in time
  for (int k = 0; k < 6; k += 2) {
    Vec z1(2), z2(2);
    gauss.fill_gaussian(z1);
    gauss.fill_gaussian(z2);
    const Batch u0 = sample_batch(batches, 8, model.m(), ReplacementMode::kWithout);
    const Batch u1 = sample_batch(batches, 8, model.m(), ReplacementMode::kWithout);
    x += 0.5 * h * model.estimated_drift(x, u0) + beta * std::sqrt(h) * z1;
    x += 0.5 * h * model.estimated_drift(x, u1) + beta * std::sqrt(h) * z2;
    const Batch first_half_of_u1 = split_batch(u1).first;
    xm += 0.5 * 2 * h * model.estimated_drift(xm, first_half_of_u1) +
          beta * std::sqrt(2 * h) * coarse_increment(z1, z2);
  }
  EXPECT_LE((x - c.at(Branch::kFine, Branch::kFine).position).norm(), 1e-14);
  EXPECT_LE((xm - c.at(Branch::kCoarseMinus, Branch::kCoarsePlus).position).norm(), 1e-14);
}

TEST(Cluster, BatchSplittingIdentity) {
  const LogisticModel model(logistic_data(300, 4), PriorKind::kMixture);
  NoiseSource noise(2, {});
  for (int i = 0; i < 50; ++i) {
    Vec x(4);
    noise.fill_gaussian(x);
    const Batch b = sample_batch(noise, 16, model.m(), ReplacementMode::kWithout);
    const auto [lo, hi] = split_batch(b);
    const Vec full = model.estimated_drift(x, b);
    const Vec avg = 0.5 * model.estimated_drift(x, lo) + 0.5 * model.estimated_drift(x, hi);
    EXPECT_LE((full - avg).norm(), 1e-12 * full.norm());
  }
}

TEST(Cluster, AntitheticBeatsPlainAtLevelOneOne) {
  const auto data = logistic_data(1000, 5);
  const LogisticModel model(data, PriorKind::kGaussian);
  const Vec x0 = approximate_mode(model, Vec::Zero(5), 500, 0.1 / 1000);
  LevelHierarchy h;
  h.beta = model.default_beta();
  const ClusterSampler ant(model, TestFunction::norm_sq(), h, x0, 5, {true, true});
  const ClusterSampler plain(model, TestFunction::norm_sq(), h, x0, 5, {true, true}, Coupling::kPlain);
  testing::Moments a;
  testing::Moments p;
  for (std::uint64_t path = 0; path < 10000; ++path) {
    a.add(ant.cluster({1, 1}, path).psi().squaredNorm());
    p.add(plain.cluster({1, 1}, path).psi().squaredNorm());
  }
  const double se = std::hypot(a.std_error(), p.std_error());
  EXPECT_GT(p.mean - a.mean, 3 * se);
}

TEST(Cluster, DivergenceNamesChain) {
  const OuModel model(column_data({0.0, 1.0}), 100.0);
  try {
    simulate_cluster(model, geometry(2, 1.0, 40, true, true, 0.0, Coupling::kAntithetic,
                                     ReplacementMode::kWith),
                     PathKey{}, v1(1.0));
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_FALSE(e.chain().empty());
    EXPECT_NE(std::string(e.what()).find(e.chain()), std::string::npos);
  }
}

TEST(Cluster, RejectsOddSizes) {
  const OuModel model(column_data({0.0, 1.0, 2.0}), 1.0);
  EXPECT_THROW(simulate_cluster(model, geometry(2, 0.1, 3, false, true, 0.0), PathKey{}, v1(0)),
               RangeError);
  EXPECT_THROW(simulate_cluster(model, geometry(3, 0.1, 2, true, false, 0.0), PathKey{}, v1(0)),
               RangeError);
  EXPECT_THROW(simulate_cluster(model, geometry(4, 0.1, 2, false, false, 0.0), PathKey{}, v1(0)),
               RangeError);
}

TEST(Cluster, KernelCountMatchesInstrumentation) {
  const LogisticModel model(logistic_data(200, 3), PriorKind::kGaussian);
  for (auto coupling : {Coupling::kAntithetic, Coupling::kPlain}) {
    for (auto [sub, time] : {std::pair{true, true}, {true, false}, {false, true}, {false, false}}) {
      const auto g = geometry(8, 0.01, 10, sub, time, 0.1, coupling);
      const auto before = model.kernel_evaluations();
      simulate_cluster(model, g, PathKey{1, 0, 0, 0}, Vec::Zero(3));
      EXPECT_EQ(model.kernel_evaluations() - before, g.kernel_evaluations());
    }
  }
}

TEST(Cluster, DeterministicAcrossThreadCounts) {
  const LogisticModel model(logistic_data(500, 3), PriorKind::kGaussian);
  LevelHierarchy h;
  h.n0 = 20;
  h.beta = model.default_beta();
  const ClusterSampler sampler(model, TestFunction::norm_sq(), h, Vec::Zero(3), 99, {true, true});
  const auto one = sample_paths(sampler, {2, 1}, 0, 64, 1);
  const auto four = sample_paths(sampler, {2, 1}, 0, 64, 4);
  EXPECT_EQ(one, four);
  const auto tail = sample_paths(sampler, {2, 1}, 32, 32, 3);
  EXPECT_TRUE(std::equal(tail.begin(), tail.end(), one.begin() + 32));
}

TEST(FourthMoment, StaysBoundedOnLogistic) {
  const LogisticModel model(logistic_data(1000, 5), PriorKind::kGaussian);
  const Vec x0 = approximate_mode(model, Vec::Zero(5), 500, 0.1 / 1000);
  const ChainSpec spec{4, 0.005, 2000, model.default_beta(), ReplacementMode::kWithout};
  const auto profile = fourth_moment_profile(model, spec, 3, 100, x0);
  ASSERT_EQ(profile.size(), 2001u);
  for (double v : profile) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_LT(v, 2.0 * profile[0]);
  }
  double first = 0.0;
  double last = 0.0;
  for (std::size_t k = 1; k <= 500; ++k) first += profile[k] / 500;
  for (std::size_t k = 1501; k <= 2000; ++k) last += profile[k] / 500;
  EXPECT_LT(last, 1.25 * first);
}

}  // namespace
}  // namespace masga
