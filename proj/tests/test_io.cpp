// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "relit/image_io.hpp"
#include "relit/model_io.hpp"
#include "test_support.hpp"

namespace relit {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("relit_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(IoTest, ModelRoundTrip) {
  const MorphableModel model = make_synthetic_model(4, 9);
  save_json(dir_ / "m.json", to_json(model));
  const MorphableModel back = load_model(dir_ / "m.json");
  EXPECT_EQ(to_json(back), to_json(model));
  Rng rng(1);
  FaceCoefficients c = FaceCoefficients::zeros_for(model);
  for (Eigen::Index i = 0; i < c.alpha.size(); ++i) c.alpha[i] = 0.3 * (i % 3) - 0.2;
  EXPECT_EQ(evaluate_model(back, c).positions, evaluate_model(model, c).positions);
}

TEST_F(IoTest, CoefficientsRoundTrip) {
  const MorphableModel model = make_synthetic_model(4, 9);
  FaceCoefficients c = FaceCoefficients::zeros_for(model);
  c.beta[0] = 0.5;
  c.pose.translation = Vec3(0.1, -0.2, 0.3);
  save_json(dir_ / "c.json", to_json(c));
  const FaceCoefficients back = load_coefficients(dir_ / "c.json");
  EXPECT_EQ(back.beta, c.beta);
  EXPECT_EQ(back.pose.translation, c.pose.translation);
  EXPECT_EQ(back.pose.rotation, c.pose.rotation);
}

TEST_F(IoTest, ShRoundTripIsExact) {
  Rng rng(2);
  const ShCoeffs sh = random_lighting(rng);
  save_json(dir_ / "sh.json", to_json(sh));
  EXPECT_EQ(load_sh(dir_ / "sh.json").coeffs, sh.coeffs);
}

TEST_F(IoTest, SchemaErrorsAreInputErrors) {
  Rng rng(3);
  Json sh = to_json(random_lighting(rng));
  sh["schema_version"] = 99;
  EXPECT_THROW(sh_from_json(sh), InputError);
  Json short_rows = to_json(random_lighting(rng));
  short_rows.erase("schema_version");
  EXPECT_NO_THROW(sh_from_json(short_rows));
  EXPECT_THROW(sh_from_json(Json::array()), InputError);
  EXPECT_THROW(model_from_json(Json{{"num_vertices", 3}}), InputError);
  EXPECT_THROW(load_json(dir_ / "missing.json"), InputError);
  std::ofstream(dir_ / "bad.json") << "{ not json";
  EXPECT_THROW(load_json(dir_ / "bad.json"), InputError);
}

TEST_F(IoTest, PngRoundTripQuantises) {
  Rng rng(4);
  const RasterImage img = testing::random_image(7, 5, rng);
  write_png(dir_ / "a.png", img);
  const RasterImage back = read_png(dir_ / "a.png");
  ASSERT_TRUE(back.same_size(img));
  EXPECT_EQ(back.data(), quantize_8bit(img).data());
  for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_LE(std::abs(back.data()[i] - img.data()[i]), 0.5 / 255 + 1e-12);
}

TEST_F(IoTest, PfmRoundTrip) {
  Rng rng(5);
  const RasterImage img = testing::random_image(6, 9, rng);
  write_pfm(dir_ / "a.pfm", img);
  const RasterImage back = read_pfm(dir_ / "a.pfm");
  ASSERT_TRUE(back.same_size(img));
  for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_NEAR(back.data()[i], img.data()[i], 1e-7);
}

TEST_F(IoTest, MissingOrCorruptPngIsInputError) {
  EXPECT_THROW(read_png(dir_ / "none.png"), InputError);
  std::ofstream(dir_ / "junk.png") << "definitely not a png";
  EXPECT_THROW(read_png(dir_ / "junk.png"), InputError);
}

TEST_F(IoTest, ObjRoundTrip) {
  const Mesh mesh = evaluate_model(make_synthetic_model(4, 9),
                                   FaceCoefficients::zeros_for(make_synthetic_model(4, 9)));
  write_obj(dir_ / "m.obj", mesh);
  const Mesh back = read_obj(dir_ / "m.obj");
  ASSERT_EQ(back.num_vertices(), mesh.num_vertices());
  EXPECT_EQ(back.faces, mesh.faces);
  EXPECT_LT((back.positions - mesh.positions).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(read_obj(dir_ / "none.obj"), InputError);
}

}  // namespace
}  // namespace relit
