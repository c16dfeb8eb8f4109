#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "coxbar/survival_data.hpp"
#include "oracles.hpp"

using namespace coxbar;

namespace {

SurvivalDataset small_dataset() {
  // times 2, 1, 2, 3 with statuses 1, 1, 0, 1
  std::vector<ColumnInput> cols(2);
  cols[0] = {{0, 1, 3}, {1.0, -2.0, 0.5}};
  cols[1] = {{2}, {4.0}};
  return build_dataset({2.0, 1.0, 2.0, 3.0}, {1, 1, 0, 1}, std::move(cols));
}

}  // namespace

TEST(SurvivalData, RiskOrderDescendingTimeEventsFirst) {
  const auto ds = small_dataset();
  EXPECT_EQ(ds.order, (std::vector<std::size_t>{3, 0, 2, 1}));
  for (std::size_t k = 0; k < ds.n; ++k) EXPECT_EQ(ds.position[ds.order[k]], k);
  EXPECT_EQ(ds.event_count, 3u);
  EXPECT_TRUE(validate(ds).ok) << validate(ds).message;
}

TEST(SurvivalData, TiedTimesShareOneRiskSet) {
  const auto ds = build_dataset({1.0, 2.0, 2.0, 2.0, 3.0}, {1, 1, 0, 1, 0}, {});
  // positions: t=3 (c), t=2 events x2, t=2 censored, t=1 event
  ASSERT_EQ(ds.risk.groups.size(), 2u);
  EXPECT_EQ(ds.risk.groups[0].end, 3u);
  EXPECT_EQ(ds.risk.groups[0].events, 2.0);
  EXPECT_EQ(ds.risk.groups[1].end, 4u);
  EXPECT_EQ(ds.risk.groups[1].events, 1.0);
  EXPECT_EQ(ds.risk.first_group, (std::vector<std::uint32_t>{0, 0, 0, 0, 1}));
}

TEST(SurvivalData, ColumnPositionsFollowRiskOrder) {
  const auto ds = small_dataset();
  const auto& c0 = ds.design.column(0);
  EXPECT_EQ(c0.pos, (std::vector<std::uint32_t>{0, 1, 3}));
  EXPECT_EQ(c0.value, (std::vector<double>{0.5, 1.0, -2.0}));
  EXPECT_EQ(dense_column(ds, 0), (std::vector<double>{1.0, -2.0, 0.0, 0.5}));
  EXPECT_EQ(dense_column(ds, 1), (std::vector<double>{0.0, 0.0, 4.0, 0.0}));
}

TEST(SurvivalData, ExplicitZerosAreDropped) {
  std::vector<ColumnInput> cols(1);
  cols[0] = {{0, 1, 2}, {0.0, 3.0, 0.0}};
  const auto ds = build_dataset({1.0, 2.0, 3.0}, {1, 1, 1}, std::move(cols));
  EXPECT_EQ(ds.design.column(0).nnz(), 1u);
  EXPECT_EQ(ds.design.nnz(), 1u);
}

TEST(SurvivalData, EmptyDesignIsValid) {
  const auto ds = build_dataset({1.0, 2.0}, {1, 0}, std::vector<ColumnInput>(3));
  EXPECT_EQ(ds.p, 3u);
  EXPECT_EQ(ds.design.nnz(), 0u);
  EXPECT_TRUE(validate(ds).ok);
}

TEST(SurvivalData, RejectsBadInput) {
  EXPECT_THROW(build_dataset({1.0, 0.0}, {1, 1}, {}), InputError);
  EXPECT_THROW(build_dataset({1.0, -1.0}, {1, 1}, {}), InputError);
  EXPECT_THROW(build_dataset({1.0, NAN}, {1, 1}, {}), InputError);
  EXPECT_THROW(build_dataset({1.0, INFINITY}, {1, 1}, {}), InputError);
  EXPECT_THROW(build_dataset({1.0, 2.0}, {1, 2}, {}), InputError);
  EXPECT_THROW(build_dataset({1.0, 2.0}, {1}, {}), InputError);
  EXPECT_THROW(build_dataset({}, {}, {}), InputError);
  std::vector<ColumnInput> dup(1);
  dup[0] = {{1, 1}, {1.0, 2.0}};
  EXPECT_THROW(build_dataset({1.0, 2.0}, {1, 1}, dup), InputError);
  std::vector<ColumnInput> range(1);
  range[0] = {{2}, {1.0}};
  EXPECT_THROW(build_dataset({1.0, 2.0}, {1, 1}, range), InputError);
  std::vector<ColumnInput> nonfinite(1);
  nonfinite[0] = {{0}, {NAN}};
  EXPECT_THROW(build_dataset({1.0, 2.0}, {1, 1}, nonfinite), InputError);
  std::vector<ColumnInput> ragged(1);
  ragged[0] = {{0, 1}, {1.0}};
  EXPECT_THROW(build_dataset({1.0, 2.0}, {1, 1}, ragged), InputError);
}

TEST(SurvivalData, ValidateDetectsShuffledOrder) {
  auto ds = small_dataset();
  std::swap(ds.order[0], ds.order[3]);
  const auto rep = validate(ds);
  EXPECT_FALSE(rep.ok);
  EXPECT_NE(rep.message.find("order"), std::string::npos) << rep.message;
}

TEST(SurvivalData, ValidateDetectsCorruptColumn) {
  auto ds = small_dataset();
  auto col = std::make_shared<SparseColumn>(ds.design.column(0));
  std::swap(col->pos[0], col->pos[1]);
  ds.design.columns[0] = col;
  EXPECT_FALSE(validate(ds).ok);
}

TEST(SurvivalData, SubsetSharesColumnStorage) {
  const auto ds = small_dataset();
  const std::vector<std::size_t> pick{1};
  const auto sub = subset_columns(ds, pick);
  EXPECT_EQ(sub.p, 1u);
  EXPECT_EQ(sub.design.columns[0].get(), ds.design.columns[1].get());
  EXPECT_TRUE(validate(sub).ok);
  const std::vector<std::size_t> bad{2};
  EXPECT_THROW(subset_columns(ds, bad), InputError);
}

TEST(SurvivalData, CenterScaleGivesZeroMeanAndUnitSampleVariance) {
  std::mt19937_64 rng(3);
  const auto prob = oracle::random_problem(rng, 40, 4, 0.3);
  const auto ds = standardize(oracle::to_dataset(prob), StandardizeMode::center_and_scale);
  for (std::size_t j = 0; j < ds.p; ++j) {
    const auto v = dense_column(ds, j);
    double sum = 0.0, ss = 0.0;
    for (double x : v) sum += x;
    for (double x : v) ss += x * x;
    EXPECT_NEAR(sum, 0.0, 1e-12);
    EXPECT_NEAR(ss, static_cast<double>(ds.n - 1), 1e-10);
  }
}

TEST(SurvivalData, CenterScaleTwoPointColumn) {
  std::vector<ColumnInput> cols(1);
  cols[0] = {{0, 1}, {1.0, -1.0}};
  const auto ds = standardize(build_dataset({1.0, 2.0}, {1, 1}, cols), StandardizeMode::center_and_scale);
  const auto v = dense_column(ds, 0);
  EXPECT_NEAR(v[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(v[1], -1.0 / std::sqrt(2.0), 1e-15);
}

TEST(SurvivalData, ScaleOnlyGivesUnitMeanSquare) {
  std::vector<ColumnInput> cols(1);
  cols[0] = {{0, 2}, {3.0, 4.0}};
  const auto ds = standardize(build_dataset({1.0, 2.0, 3.0, 4.0}, {1, 1, 1, 1}, cols), StandardizeMode::scale_only);
  const auto v = dense_column(ds, 0);
  double ss = 0.0;
  for (double x : v) ss += x * x;
  EXPECT_NEAR(ss / 4.0, 1.0, 1e-15);
  EXPECT_EQ(v[1], 0.0);
  EXPECT_EQ(ds.design.column(0).nnz(), 2u);
}

TEST(SurvivalData, StandardizeIsIdempotent) {
  std::mt19937_64 rng(4);
  const auto ds = oracle::to_dataset(oracle::random_problem(rng, 30, 5, 0.4));
  for (auto mode : {StandardizeMode::scale_only, StandardizeMode::center_and_scale}) {
    const auto once = standardize(ds, mode);
    const auto twice = standardize(once, mode);
    for (std::size_t j = 0; j < ds.p; ++j) {
      EXPECT_EQ(once.design.transform(j).center, twice.design.transform(j).center);
      EXPECT_EQ(once.design.transform(j).scale, twice.design.transform(j).scale);
      EXPECT_EQ(dense_column(once, j), dense_column(twice, j));
    }
  }
}

TEST(SurvivalData, ConstantColumnCannotBeCentered) {
  std::vector<ColumnInput> cols(1);
  cols[0] = {{0, 1, 2}, {2.0, 2.0, 2.0}};
  const auto ds = build_dataset({1.0, 2.0, 3.0}, {1, 1, 1}, cols);
  try {
    standardize(ds, StandardizeMode::center_and_scale);
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("x1"), std::string::npos);
  }
}

TEST(SurvivalData, OriginalScaleCoefficientsReproducePredictorDifferences) {
  std::mt19937_64 rng(5);
  const auto raw = oracle::to_dataset(oracle::random_problem(rng, 25, 3, 0.5));
  const auto ds = standardize(raw, StandardizeMode::center_and_scale);
  const std::vector<double> beta{0.3, -1.2, 0.7};
  const auto orig = to_original_scale(ds, beta);
  const auto std_x = oracle::from_dataset(ds);
  const auto raw_x = oracle::from_dataset(raw);
  const auto eta_std = oracle::linear_predictor(std_x, beta);
  const auto eta_raw = oracle::linear_predictor(raw_x, orig);
  for (std::size_t i = 1; i < ds.n; ++i)
    EXPECT_NEAR(eta_std[i] - eta_std[0], eta_raw[i] - eta_raw[0], 1e-12);
}
