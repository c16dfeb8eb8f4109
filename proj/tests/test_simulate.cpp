#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "coxbar/io.hpp"
#include "coxbar/random.hpp"
#include "coxbar/simulate.hpp"

using namespace coxbar;

namespace {

std::string dataset_bytes(const SurvivalDataset& ds) {
  std::ostringstream out;
  write_survival_csv(out, ds);
  write_sparse_design(out, ds);
  return out.str();
}

SimScenario moderate(std::size_t n, std::size_t p, std::uint64_t seed) {
  SimScenario s;
  s.n = n;
  s.p = p;
  s.beta0 = moderate_truth(p);
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Philox, KnownAnswers) {
  using C = Philox4x32::Counter;
  EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RandomStream, DeterministicOpenUnitInterval) {
  RandomStream a(42, 1), b(42, 1), c(42, 2), d(43, 1);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 10000; ++i) {
    const double u = a.uniform();
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_EQ(u, b.uniform());
    differs_stream |= u != c.uniform();
    differs_seed |= u != d.uniform();
  }
  EXPECT_TRUE(differs_stream);
  EXPECT_TRUE(differs_seed);
}

TEST(RandomStream, MomentsOfDerivedDistributions) {
  RandomStream r(7, 9);
  const int n = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0, se = 0.0;
  for (int i = 0; i < n; ++i) {
    su += r.uniform();
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
    se += r.exponential();
  }
  EXPECT_NEAR(su / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sn / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(se / n, 1.0, 4.0 / std::sqrt(n));
}

TEST(RandomStream, DerivedSeedsAreDistinctAndReproducible) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(1, 5, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(1, 5, 17), derive_seed(1, 5, 17));
  EXPECT_NE(derive_seed(1, 5, 17), derive_seed(1, 6, 17));
  EXPECT_NE(derive_seed(1, 5, 17), derive_seed(2, 5, 17));
}

TEST(Simulate, NullModelWithoutCensoringGivesStandardExponentialTimes) {
  SimScenario s;
  s.n = 10000;
  s.p = 3;
  s.beta0 = {0.0, 0.0, 0.0};
  s.target_censoring = 0.0;
  const auto sim = simulate(s);
  EXPECT_TRUE(std::isinf(sim.u_max));
  EXPECT_EQ(sim.censoring_rate, 0.0);
  EXPECT_EQ(sim.data.event_count, s.n);
  const double mean = std::accumulate(sim.data.time.begin(), sim.data.time.end(), 0.0) / static_cast<double>(s.n);
  EXPECT_NEAR(mean, 1.0, 3.0 / std::sqrt(static_cast<double>(s.n)));
}

TEST(Simulate, SeedDeterminism) {
  const auto s = moderate(300, 100, 99);
  EXPECT_EQ(dataset_bytes(simulate(s).data), dataset_bytes(simulate(s).data));
  auto t = s;
  t.seed = 100;
  EXPECT_NE(dataset_bytes(simulate(s).data), dataset_bytes(simulate(t).data));
}

TEST(Simulate, Ar1AdjacentCorrelation) {
  auto s = moderate(10000, 6, 3);
  const auto ds = simulate(s).data;
  for (std::size_t j = 0; j + 1 < ds.p; ++j) {
    const auto a = dense_column(ds, j), b = dense_column(ds, j + 1);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= ds.n;
    mb /= ds.n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    EXPECT_NEAR(sab / std::sqrt(saa * sbb), 0.5, 0.05) << "columns " << j + 1 << "," << j + 2;
  }
}

TEST(Simulate, CensoringCalibration) {
  for (double target : {0.2, 0.5, 0.95}) {
    double total = 0.0;
    for (std::uint64_t r = 0; r < 100; ++r) {
      auto s = moderate(300, 100, derive_seed(2024, 1, r));
      s.target_censoring = target;
      total += simulate(s).censoring_rate;
    }
    EXPECT_NEAR(total / 100.0, target, 0.02) << "target " << target;
  }
}

TEST(Simulate, SparseBinaryDesign) {
  SimScenario s;
  s.n = 20000;
  s.p = 40;
  s.beta0 = std::vector<double>(40, 0.0);
  s.beta0[0] = 1.0;
  s.design = DesignKind::sparse_binary;
  s.sparsity = 0.98;
  s.target_censoring = 0.95;
  const auto sim = simulate(s);
  const auto& ds = sim.data;
  EXPECT_NEAR(static_cast<double>(ds.design.nnz()) / (20000.0 * 40.0), 0.02, 0.002);
  for (std::size_t j = 0; j < ds.p; ++j)
    for (double v : ds.design.column(j).value) EXPECT_EQ(v, 1.0);
  EXPECT_NEAR(sim.censoring_rate, 0.95, 0.01);
  EXPECT_TRUE(validate(ds).ok);
}

TEST(Simulate, RejectsInvalidScenario) {
  auto s = moderate(100, 10, 1);
  s.beta0.pop_back();
  EXPECT_THROW(simulate(s), InputError);
  s = moderate(100, 10, 1);
  s.rho = 1.0;
  EXPECT_THROW(simulate(s), InputError);
  s = moderate(100, 10, 1);
  s.design = DesignKind::sparse_binary;
  s.sparsity = 1.0;
  EXPECT_THROW(simulate(s), InputError);
  s = moderate(100, 10, 1);
  s.target_censoring = 1.0;
  EXPECT_THROW(simulate(s), InputError);
}

TEST(Scenario, ParsesKeysAndBlockSyntax) {
  std::istringstream in(
      "# comment\n"
      "n = 500\n"
      "p=6\n"
      "beta0=0.7x3, 0, -1\n"
      "design=sparse-binary:0.9   # trailing comment\n"
      "censoring=0.5\n"
      "seed=77\n");
  const auto s = parse_scenario(in);
  EXPECT_EQ(s.n, 500u);
  EXPECT_EQ(s.p, 6u);
  EXPECT_EQ(s.beta0, (std::vector<double>{0.7, 0.7, 0.7, 0.0, -1.0, 0.0}));
  EXPECT_EQ(s.design, DesignKind::sparse_binary);
  EXPECT_EQ(s.sparsity, 0.9);
  EXPECT_EQ(s.target_censoring, 0.5);
  EXPECT_EQ(s.seed, 77u);
}

TEST(Scenario, DefaultsToModerateTruth) {
  std::istringstream in("n=300\np=12\ndesign=ar1:0.3\n");
  const auto s = parse_scenario(in);
  EXPECT_EQ(s.beta0, moderate_truth(12));
  EXPECT_EQ(s.rho, 0.3);
  EXPECT_EQ(moderate_truth(10), (std::vector<double>{0.2, 0, 0.35, 0, 0.5, 0.55, 0, 0, 0.7, 0.8}));
}

TEST(Scenario, ErrorsCarryLineNumbers) {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_scenario(in, "cfg");
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("n=10\nbogus=1\n").find("cfg:2"), std::string::npos);
  EXPECT_NE(message("n=abc\n").find("cfg:1"), std::string::npos);
  EXPECT_NE(message("p=2\nbeta0=1,2,3\n").find("beta0"), std::string::npos);
  EXPECT_NE(message("design=grid\n").find("unknown design"), std::string::npos);
  EXPECT_NE(message("n 10\n").find("key=value"), std::string::npos);
}
