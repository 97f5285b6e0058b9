// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lsx/evalmetrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace lsx::eval {
namespace {

using testing::random_tensor;

const Tensor kToy = Tensor::matrix({{0, 0}, {0, 2}, {4, 0}, {4, 2}});
const std::vector<int> kToyLabels{0, 0, 1, 1};

TEST(Iies, HandComputedTwoClassExample) {
  EXPECT_NEAR(iies_encoded(kToy, kToyLabels), 0.5, 1e-9);
  EXPECT_NEAR(iies_encoded(kToy, kToyLabels, IiesDenominator::corrected), 0.25, 1e-9);
}

TEST(Iies, IdentityEncoderGivesTheSameValue) {
  // A linear head has an identity feature map.
  const nets::Model identity = nets::Model::init(nets::MlpSpec{2, 0, 2}, 0);
  EXPECT_NEAR(iies(kToy, kToyLabels, identity), 0.5, 1e-9);
}

TEST(Iies, OneSamplePerClassIsZero) {
  EXPECT_EQ(iies_encoded(Tensor::matrix({{0, 1}, {5, 3}, {2, 2}}), std::vector<int>{0, 1, 2}), 0.0);
}

TEST(Iies, DuplicationPermutationAndRelabelInvariance) {
  const Tensor z = random_tensor({60, 5}, 3);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < 60; ++i) y[i] = static_cast<int>((i * 7) % 4);
  const double base = iies_encoded(z, y);

  std::vector<std::size_t> twice(120);
  for (std::size_t i = 0; i < 120; ++i) twice[i] = i % 60;
  std::vector<int> y2(120);
  for (std::size_t i = 0; i < 120; ++i) y2[i] = y[i % 60];
  EXPECT_NEAR(iies_encoded(z.take_rows(twice), y2), base, 1e-12);

  std::vector<std::size_t> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  std::vector<int> yp(60), relabel(60);
  for (std::size_t i = 0; i < 60; ++i) yp[i] = y[perm[i]];
  EXPECT_NEAR(iies_encoded(z.take_rows(perm), yp), base, 1e-12);

  const int remap[4] = {7, 2, 9, 0};
  for (std::size_t i = 0; i < 60; ++i) relabel[i] = remap[y[i]];
  EXPECT_NEAR(iies_encoded(z, relabel), base, 1e-12);
}

TEST(Iies, NeedsTwoClasses) {
  EXPECT_THROW(iies_encoded(kToy, std::vector<int>{0, 0, 0, 0}), MetricError);
}

TEST(Ridge, HandSolvedNormalEquations) {
  // (X^T X + I) W = X^T Y with X = [[1,2],[3,4]], Y = I gives W = [[-7,7],[8,2]] / 35.
  const Tensor x = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor w = ridge_fit(x, std::vector<int>{0, 1}, 2, 1.0);
  ASSERT_EQ(w.shape(), (Shape{2, 2}));
  const double want[4] = {-7.0 / 35, 7.0 / 35, 8.0 / 35, 2.0 / 35};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(w[i], want[i], 1e-8);
}

TEST(Ridge, OneHotClassIndicatorsAreSeparable) {
  const std::size_t n = 200, k = 10;
  Tensor x(Shape{n, k});
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % k);
    x[i * k + i % k] = 1.0;
  }
  EXPECT_EQ(ridge_separability(x, y, x, y, k), 100.0);
  EXPECT_EQ(ridge_holdout(x, y, k, 1.0, 0), 100.0);
}

TEST(Ridge, ShuffledLabelsAreAtChance) {
  const Tensor train = random_tensor({1000, 20}, 1), test = random_tensor({1000, 20}, 2);
  std::mt19937_64 rng(3);
  std::vector<int> ytr(1000), yte(1000);
  for (auto& v : ytr) v = static_cast<int>(rng() % 10);
  for (auto& v : yte) v = static_cast<int>(rng() % 10);
  EXPECT_NEAR(ridge_separability(train, ytr, test, yte, 10), 10.0, 3.0);
}

TEST(Ridge, DeterministicAndChecked) {
  const Tensor x = random_tensor({50, 4}, 5);
  std::vector<int> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = static_cast<int>(i % 2);
  EXPECT_EQ(ridge_holdout(x, y, 2, 1.0, 9), ridge_holdout(x, y, 2, 1.0, 9));
  EXPECT_THROW(ridge_holdout(x, y, 2, 1.0, 9, 1.0), MetricError);
}

TEST(TopCount, CeilingOfTheShare) {
  EXPECT_EQ(top_count(10, 784), 79u);
  EXPECT_EQ(top_count(50, 5), 3u);
  EXPECT_EQ(top_count(1, 5), 1u);
  EXPECT_EQ(top_count(10, 10), 1u);
  EXPECT_EQ(top_count(100, 7), 7u);
  EXPECT_THROW(top_count(0, 5), MetricError);
  EXPECT_THROW(top_count(101, 5), MetricError);
}

TEST(RankEntries, MagnitudeThenIndex) {
  const std::vector<double> e{0.5, -2.0, 0.5, 0.0, 2.0};
  EXPECT_EQ(rank_entries(e), (std::vector<std::size_t>{1, 4, 0, 2, 3}));
}

using testing::linear;

TEST(CompSuffDiscrete, MatchesExhaustiveMasking) {
  std::mt19937_64 rng(11);
  for (std::size_t d = 1; d <= 8; ++d) {
    const Tensor w = random_tensor({d, 3}, 20 + d), x = random_tensor({6, d}, 40 + d, 0.0, 1.0);
    Tensor e = random_tensor({6, d}, 60 + d);
    e[0] = e[d > 1 ? 1 : 0];  // one tie
    const std::vector<double> b{0.3, -0.1, 0.2};
    const std::vector<double> qs{1, 5, 10, 20, 50, 100};
    const auto got = comp_suff_discrete(linear(w, b), x, e, qs);
    const auto want = testing::comp_suff_brute_force(w, b, x, e, qs);
    EXPECT_NEAR(got.comp, want.comp, 1e-12) << d;
    EXPECT_NEAR(got.suff, want.suff, 1e-12) << d;
  }
}

TEST(CompSuffDiscrete, ConstantModelScoresZero) {
  const auto m = linear(Tensor(Shape{4, 3}), {0.1, 0.5, -0.2});
  const auto r = comp_suff_discrete(m, random_tensor({5, 4}, 1), random_tensor({5, 4}, 2), default_b_set());
  EXPECT_EQ(r.comp, 0.0);
  EXPECT_EQ(r.suff, 0.0);
}

TEST(CompSuffDiscrete, KeepingTheOnlyReadEntryIsSufficient) {
  Tensor w(Shape{5, 2});
  w[2 * 2 + 1] = 3.0;
  const auto m = linear(w, {0.0, 0.0});
  const Tensor x = random_tensor({4, 5}, 3, 0.1, 1.0);
  Tensor e(Shape{4, 5});
  for (std::size_t s = 0; s < 4; ++s) e[s * 5 + 2] = 1.0;
  const std::vector<double> q{20};
  const auto r = comp_suff_discrete(m, x, e, q);
  EXPECT_EQ(r.suff, 0.0);
  EXPECT_GT(r.comp, 0.0);
}

TEST(CompSuffDiscrete, TrueSensitivityOrderMaximizesComp) {
  const std::size_t d = 5;
  Tensor w(Shape{d, 2});
  const double wv[d] = {0.7, 0.2, 1.3, 0.4, 0.9};
  for (std::size_t i = 0; i < d; ++i) w[i * 2 + 1] = wv[i];
  const auto m = linear(w, {0.0, 0.0});
  const Tensor x = Tensor::matrix({{0.3, 0.9, 0.2, 0.6, 0.5}});
  const std::vector<double> qs{20, 40, 60, 80};
  Tensor truth(Shape{1, d});
  for (std::size_t i = 0; i < d; ++i) truth[i] = x[i] * wv[i];
  const double best = comp_suff_discrete(m, x, truth, qs).comp;
  std::vector<double> ranks{1, 2, 3, 4, 5};
  do {
    const Tensor e(Shape{1, d}, ranks);
    EXPECT_LE(comp_suff_discrete(m, x, e, qs).comp, best + 1e-15);
  } while (std::next_permutation(ranks.begin(), ranks.end()));
}

TEST(CompSuffDiscrete, RejectsBadBSet) {
  const auto m = linear(Tensor(Shape{2, 2}), {0, 0});
  const Tensor x(Shape{1, 2});
  EXPECT_THROW(comp_suff_discrete(m, x, x, std::vector<double>{0.0}), MetricError);
  EXPECT_THROW(comp_suff_discrete(m, x, x, std::vector<double>{150.0}), MetricError);
  EXPECT_THROW(comp_suff_discrete(m, x, x, std::vector<double>{}), MetricError);
}

struct ContinuousToy {
  Tensor w = random_tensor({20, 4}, 7);
  nets::Model model = linear(w, {0, 0, 0, 0});
  Tensor x = random_tensor({1000, 20}, 8, 0.0, 1.0);
  std::vector<int> y = nets::argmax_rows(nets::predict(model, x));
};

TEST(CompSuffContinuous, ConstantMapMatchesRandomSelection) {
  ContinuousToy t;
  const auto r = comp_suff_continuous(t.model, t.x, t.y, Tensor(t.x.shape(), 0.5), default_b_set(), 1);
  EXPECT_LT(std::abs(r.comp), 2.0);
  EXPECT_LT(std::abs(r.suff), 2.0);
}

TEST(CompSuffContinuous, FullShareContributesNothing) {
  ContinuousToy t;
  const auto r = comp_suff_continuous(t.model, t.x, t.y, random_tensor(t.x.shape(), 3), std::vector<double>{100}, 2);
  EXPECT_EQ(r.comp, 0.0);
  EXPECT_EQ(r.suff, 0.0);
}

// Class k reads input k only, so the map marking x_y alone is exactly
// faithful: dropping it flips most predictions, keeping it alone keeps them.
TEST(CompSuffContinuous, FaithfulMapBeatsRandom) {
  Tensor w(Shape{20, 4});
  for (std::size_t k = 0; k < 4; ++k) w[k * 4 + k] = 1.0;
  const nets::Model model = linear(w, {0, 0, 0, 0});
  const Tensor x = random_tensor({1000, 20}, 8, 0.0, 1.0);
  const auto y = nets::argmax_rows(nets::predict(model, x));
  Tensor e(x.shape());
  for (std::size_t s = 0; s < 1000; ++s) {
    const auto k = static_cast<std::size_t>(y[s]);
    e[s * 20 + k] = x[s * 20 + k];
  }
  const auto r = comp_suff_continuous(model, x, y, e, default_b_set(), 3);
  EXPECT_GT(r.comp, 20.0);
  EXPECT_LT(r.suff, -20.0);
}

TEST(CompSuffContinuous, SeedDeterministic) {
  ContinuousToy t;
  const Tensor e = random_tensor(t.x.shape(), 4);
  const auto a = comp_suff_continuous(t.model, t.x, t.y, e, default_b_set(), 5);
  const auto b = comp_suff_continuous(t.model, t.x, t.y, e, default_b_set(), 5);
  EXPECT_EQ(a.comp, b.comp);
  EXPECT_EQ(a.suff, b.suff);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(dataset_median(Tensor::from({3, 1, 2})), 2.0);
  EXPECT_EQ(dataset_median(Tensor::from({4, 1, 3, 2})), 2.5);
}

TEST(MetricRow, CsvRoundTripAndRanges) {
  MetricReport r;
  r.run = "runs/x";
  r.mode = "lsx";
  r.seed = 4;
  r.accuracy = 91.25;
  r.ridge_accuracy = 99.5;
  r.iies = 0.123456789012345;
  r.comp = -1.5;
  r.suff = 2.25;
  r.b_set = default_b_set();
  const std::string row = to_csv_row(r);
  const MetricReport back = parse_csv_row(row);
  EXPECT_EQ(to_csv_row(back), row);
  EXPECT_EQ(back.iies, r.iies);
  EXPECT_EQ(back.b_set, r.b_set);
  const std::string header = csv_header();
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));

  r.ridge_accuracy = 100.5;
  EXPECT_THROW(r.validate(), MetricError);
  r.ridge_accuracy = 50.0;
  r.comp = std::nan("");
  EXPECT_THROW(to_csv_row(r), MetricError);
  EXPECT_THROW(parse_csv_row("a,b,c"), MetricError);
}

}  // namespace
}  // namespace lsx::eval
