// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lsx/attribution.hpp"
#include "test_util.hpp"

namespace lsx::attr {
namespace {

using nets::MlpSpec;
using nets::Model;
using testing::random_tensor;

Model linear_model(std::size_t inputs, std::size_t classes, std::uint64_t seed) {
  return Model::init(MlpSpec{inputs, 0, classes}, seed);
}

// Weight column for class y; the linear head stores W as [inputs, classes].
std::vector<double> class_weights(const Model& m, std::size_t y) {
  const Tensor& w = m.params()[0].value;
  std::vector<double> out(w.dim(0));
  for (std::size_t i = 0; i < w.dim(0); ++i) out[i] = w[i * w.dim(1) + y];
  return out;
}

TEST(InputXGradient, LinearExample) {
  Model m = linear_model(2, 2, 0);
  auto p = m.params();
  p[0].value = Tensor::matrix({{0.5, 3.0}, {2.0, -1.0}});
  m.assign(p);
  const std::vector<int> y{1};
  const Tensor e = input_x_gradient(m, Tensor::matrix({{1.0, 2.0}}), y);
  EXPECT_EQ(e, Tensor::matrix({{3.0, -2.0}}));
}

TEST(InputXGradient, LinearModelIsInputTimesClassRow) {
  const Model m = linear_model(7, 4, 3);
  const Tensor x = random_tensor({5, 7}, 4);
  const std::vector<int> y{0, 3, 2, 1, 3};
  const Tensor e = input_x_gradient(m, x, y);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto w = class_weights(m, static_cast<std::size_t>(y[r]));
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(e[r * 7 + i], x[r * 7 + i] * w[i], 1e-12);
  }
}

TEST(InputXGradient, ZeroInputGivesZeroMap) {
  nets::CnnSpec spec;
  spec.height = spec.width = 12;
  spec.kernel = 3;
  spec.conv1 = 2;
  spec.conv2 = 2;
  spec.fc1 = 4;
  const Model m = Model::init(spec, 1);
  const std::vector<int> y{4, 7};
  const Tensor e = input_x_gradient(m, Tensor(Shape{2, 1, 12, 12}), y);
  EXPECT_EQ(e.shape(), (Shape{2, 1, 12, 12}));
  EXPECT_EQ(e.max_abs(), 0.0);
}

TEST(InputXGradient, ConstantModelGivesZeroMap) {
  Model m = Model::init(MlpSpec{6, 5, 3}, 2);
  auto p = m.params();
  for (auto& q : p) q.value = Tensor(q.value.shape(), 0.0);
  m.assign(p);
  const std::vector<int> y{0, 2};
  EXPECT_EQ(input_x_gradient(m, random_tensor({2, 6}, 1), y).max_abs(), 0.0);
}

TEST(IntegratedGradients, LinearHeadIsExactForAnyStepCount) {
  const Model m = linear_model(8, 3, 5);
  const Tensor z = random_tensor({4, 8}, 6);
  const std::vector<int> y{2, 0, 1, 2};
  for (std::size_t steps : {1u, 3u, 50u}) {
    const Tensor ig = integrated_gradients(m, z, y, steps);
    for (std::size_t r = 0; r < 4; ++r) {
      const auto w = class_weights(m, static_cast<std::size_t>(y[r]));
      for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(ig[r * 8 + i], z[r * 8 + i] * w[i], 1e-12);
    }
  }
}

TEST(IntegratedGradients, ZeroInputGivesZero) {
  const Model m = Model::init(MlpSpec{5, 6, 2}, 1);
  const std::vector<int> y{1};
  EXPECT_EQ(integrated_gradients(m, Tensor(Shape{1, 5}), y, 20).max_abs(), 0.0);
}

// Attributions sum to f_y(z) - f_y(0) in the limit of many steps.
TEST(IntegratedGradients, CompletenessAtFiveHundredSteps) {
  const Model m = Model::init(MlpSpec{6, 8, 3}, 9);
  const Tensor z = random_tensor({6, 6}, 10, 0.0, 1.0);
  const std::vector<int> y{0, 1, 2, 0, 1, 2};
  const Tensor ig = integrated_gradients(m, z, y, 500);
  const Tensor fz = nets::predict(m, z), f0 = nets::predict(m, Tensor(Shape{6, 6}));
  for (std::size_t r = 0; r < 6; ++r) {
    double total = 0.0;
    for (std::size_t i = 0; i < 6; ++i) total += ig[r * 6 + i];
    const std::size_t k = static_cast<std::size_t>(y[r]);
    EXPECT_LT(std::abs(total - (fz[r * 3 + k] - f0[r * 3 + k])), 1e-3) << "row " << r;
  }
}

TEST(IntegratedGradients, StepDoublingConverges) {
  const Model m = Model::init(MlpSpec{10, 16, 4}, 3);
  const Tensor z = random_tensor({8, 10}, 4, 0.0, 1.0);
  const std::vector<int> y{0, 1, 2, 3, 0, 1, 2, 3};
  const Tensor a = integrated_gradients(m, z, y, 200), b = integrated_gradients(m, z, y, 400);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_LT(std::abs(a[i] - b[i]), 1e-3);
}

TEST(IntegratedGradients, ScalingInputKeepsBinarizedMask) {
  const Model m = linear_model(12, 3, 8);
  const Tensor z = random_tensor({3, 12}, 2, 0.0, 1.0);
  Tensor z3 = z;
  for (double& v : z3.data()) v *= 3.0;
  const std::vector<int> y{0, 1, 2};
  EXPECT_EQ(binarize(integrated_gradients(m, z, y, 10), 0.2), binarize(integrated_gradients(m, z3, y, 10), 0.2));
}

TEST(Binarize, Examples) {
  EXPECT_EQ(binarize(Tensor::matrix({{0.9, 0.1, -0.3}}), 0.5), Tensor::matrix({{1.0, 0.0, 0.0}}));
  EXPECT_EQ(binarize(Tensor(Shape{2, 4}), 0.3), Tensor(Shape{2, 4}));
  EXPECT_EQ(binarize(Tensor::matrix({{-2.0, 0.0, 1e-9, 0.5}}), 0.0), Tensor::matrix({{0.0, 0.0, 1.0, 1.0}}));
  EXPECT_THROW(binarize(Tensor::matrix({{1.0}}), 1.5), ShapeError);
}

TEST(Binarize, RowsAreNormalizedSeparately) {
  const Tensor m = binarize(Tensor::matrix({{10.0, 4.0}, {0.1, 0.04}}), 0.5);
  EXPECT_EQ(m, Tensor::matrix({{1.0, 0.0}, {1.0, 0.0}}));
}

TEST(Dump, CsvAndPgm) {
  data::LabeledSet set;
  set.inputs = Tensor(Shape{2, 1, 2, 3});
  set.labels = {1, 0};
  set.ids = {40, 41};
  set.num_classes = 2;
  Tensor values = random_tensor({2, 1, 2, 3}, 1);
  const std::vector<int> pred{1, 1};
  const auto maps = to_maps(values, set, pred);
  ASSERT_EQ(maps.size(), 2u);
  EXPECT_EQ(maps[1].sample_id, 41u);
  EXPECT_EQ(maps[1].label, 0);
  EXPECT_EQ(maps[1].values.shape(), (Shape{1, 2, 3}));

  const auto dir = std::filesystem::temp_directory_path() / "lsx_dump_test";
  std::filesystem::create_directories(dir);
  write_csv(dir / "e.csv", maps);
  std::ifstream csv(dir / "e.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header, "sample_id,label,predicted,v0,v1,v2,v3,v4,v5");
  EXPECT_EQ(row.rfind("40,1,1,", 0), 0u);

  write_pgm(dir / "e.pgm", maps[0]);
  std::ifstream pgm(dir / "e.pgm", std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  pgm >> magic >> w >> h >> maxval;
  pgm.get();
  std::string pixels((std::istreambuf_iterator<char>(pgm)), std::istreambuf_iterator<char>());
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(w, 3u);
  EXPECT_EQ(h, 2u);
  EXPECT_EQ(maxval, 255u);
  ASSERT_EQ(pixels.size(), 6u);
  EXPECT_EQ(static_cast<unsigned char>(*std::max_element(pixels.begin(), pixels.end(), [](char a, char b) {
              return static_cast<unsigned char>(a) < static_cast<unsigned char>(b);
            })),
            255);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace lsx::attr
