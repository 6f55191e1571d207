#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "facecoder/dataset.hpp"
#include "facecoder/fit.hpp"
#include "facecoder/loss.hpp"
#include "support/testing.hpp"

using namespace facecoder;

namespace {

// N vertices at pixel centers, all black, none visible.
RenderedFace blank_face(int n) {
  RenderedFace r;
  r.screen_pos = Points2::Zero(n, 2);
  for (int i = 0; i < n; ++i) r.screen_pos.row(i) << i % 8, i / 8;
  r.color = Points3::Zero(n, 3);
  r.depth = Eigen::VectorXd::Constant(n, 100.0);
  r.is_visible.assign(n, 0);
  return r;
}

void make_visible(RenderedFace& r, std::uint32_t i) {
  r.visible.push_back(i);
  std::sort(r.visible.begin(), r.visible.end());
  r.is_visible[i] = 1;
}

LandmarkSet landmarks_at(const RenderedFace& r, const std::vector<std::uint32_t>& vertices) {
  LandmarkSet out;
  for (auto v : vertices) out.push_back({r.screen_pos.row(v).transpose(), 1.0, v});
  return out;
}

// Straight-line bilinear lookup on the float pixels.
Eigen::Vector3d bilinear(const Image& img, double x, double y) {
  const int x0 = std::min(static_cast<int>(std::floor(x)), img.width() - 2);
  const int y0 = std::min(static_cast<int>(std::floor(y)), img.height() - 2);
  const double fx = x - x0, fy = y - y0;
  return (1 - fx) * (1 - fy) * img.at(x0, y0) + fx * (1 - fy) * img.at(x0 + 1, y0) +
         (1 - fx) * fy * img.at(x0, y0 + 1) + fx * fy * img.at(x0 + 1, y0 + 1);
}

const FaceModel& model() {
  static const FaceModel m = generate_synthetic_model(41, 600);
  return m;
}

}  // namespace

TEST_CASE("photometric loss of a perfect match is zero") {
  const Image img(8, 8, Eigen::Vector3d(0.5, 0.25, 0.125));
  RenderedFace r = blank_face(10);
  for (std::uint32_t i = 0; i < 10; ++i) {
    r.color.row(i) << 0.5, 0.25, 0.125;
    make_visible(r, i);
  }
  CHECK(photometric_loss(r, img, 0.0).value == 0.0);
  CHECK(photometric_loss(r, img, 1e-8).value == doctest::Approx(1e-8).epsilon(1e-9));
}

TEST_CASE("photometric loss unit value: one residual (0.3, 0, 0.4) over N = 10") {
  const Image img(8, 8);
  RenderedFace r = blank_face(10);
  r.color.row(3) << -0.3, 0.0, -0.4;
  make_visible(r, 3);
  const PhotometricLoss l = photometric_loss(r, img, 0.0);
  CHECK(std::abs(l.value - 0.05) < 1e-12);
  CHECK_FALSE(l.empty_visibility);
  // Per-visible normalization divides by |V| instead.
  CHECK(std::abs(photometric_loss(r, img, 0.0, PhotoNormalization::VisibleVertices).value - 0.5) < 1e-12);
}

TEST_CASE("photometric loss with an empty visible set is zero and flagged") {
  const Image img(8, 8, Eigen::Vector3d::Ones());
  const RenderedFace r = blank_face(10);
  const PhotometricLoss l = photometric_loss(r, img);
  CHECK(l.value == 0.0);
  CHECK(l.empty_visibility);
}

TEST_CASE("photometric loss matches a brute-force oracle on rendered scenes") {
  const Camera cam;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const SyntheticSample target = make_sample(model(), cam, SamplerConfig{}, 13, k);
    const CodeVector x = testing::random_code(model(), cam, 100 + k);
    const RenderedFace r = forward(model(), cam, x);
    REQUIRE(!r.visible.empty());
    const double eps = 1e-3;
    double sum = 0;
    for (std::uint32_t i = 0; i < model().n_vertices(); ++i) {
      if (!r.is_visible[i]) continue;
      const Eigen::Vector3d d = bilinear(target.image, r.screen_pos(i, 0), r.screen_pos(i, 1)) - r.color.row(i).transpose();
      sum += std::sqrt(d.x() * d.x() + d.y() * d.y() + d.z() * d.z() + eps * eps);
    }
    const double expected = sum / model().n_vertices();
    CHECK(testing::rel_diff(photometric_loss(r, target.image, eps).value, expected) < 1e-12);
  }
}

TEST_CASE("landmark loss examples") {
  RenderedFace r = blank_face(10);
  LandmarkSet l = landmarks_at(r, {2, 5, 7});
  CHECK(landmark_loss(r, l) == 0.0);
  LandmarkSet one = {{r.screen_pos.row(4).transpose() + Eigen::Vector2d(3, 4), 1.0, 4}};
  CHECK(std::abs(landmark_loss(r, one) - 25.0) < 1e-12);
  one[0].confidence = 0.5;
  CHECK(std::abs(landmark_loss(r, one) - 12.5) < 1e-12);
  for (auto& m : l) {
    m.position += Eigen::Vector2d(17, -9);
    m.confidence = 0.0;
  }
  CHECK(landmark_loss(r, l) == 0.0);
}

TEST_CASE("landmark loss is invariant to the landmark order and counts landmarks outside V") {
  const Camera cam;
  const CodeVector x = testing::random_code(model(), cam, 7);
  const RenderedFace r = forward(model(), cam, x);
  LandmarkSet l = project_landmarks(model(), cam, testing::random_code(model(), cam, 8));
  const double a = landmark_loss(r, l);
  std::reverse(l.begin(), l.end());
  CHECK(std::abs(landmark_loss(r, l) - a) < 1e-9 * a);
  // Explicit sum over every landmark, visible or not.
  double sum = 0;
  for (const auto& m : l) sum += (r.screen_pos.row(m.vertex).transpose() - m.position).squaredNorm();
  CHECK(testing::rel_diff(a, sum) < 1e-12);
}

TEST_CASE("landmark loss skips unprojectable vertices") {
  RenderedFace r = blank_face(10);
  r.screen_pos.row(2).setConstant(std::numeric_limits<double>::quiet_NaN());
  const LandmarkSet l = {{Eigen::Vector2d(1, 1), 1.0, 2}, {r.screen_pos.row(3).transpose() + Eigen::Vector2d(0, 2), 1.0, 3}};
  CHECK(landmark_loss(r, l) == doctest::Approx(4.0));
}

TEST_CASE("regularizer examples") {
  const LossWeights w;
  CodeVector x;
  CHECK(reg_loss(x, w) == 0.0);
  x.alpha(0) = 1.0;
  CHECK(std::abs(reg_loss(x, w) - 1.0) < 1e-12);
  x.alpha(0) = 0.0;
  x.beta(0) = 1.0;
  CHECK(std::abs(reg_loss(x, w) - 1.7e-3) < 1e-12);
  x.beta(0) = 0.0;
  x.delta(0) = 1.0;
  CHECK(std::abs(reg_loss(x, w) - 0.8) < 1e-12);
  // Pose and illumination are not penalized.
  x.delta(0) = 0.0;
  x.rotation.setConstant(1);
  x.translation.setConstant(100);
  x.gamma.setConstant(3);
  CHECK(reg_loss(x, w) == 0.0);
}

TEST_CASE("default weights are the published values") {
  const LossWeights w;
  CHECK(w.w_photo == 1.92);
  CHECK(w.w_reg == 2.9e-5);
  CHECK(w.w_beta == 1.7e-3);
  CHECK(w.w_delta == 0.8);
  CHECK(w.w_land == 0);
  CHECK(w.normalization == PhotoNormalization::TotalVertices);
}

TEST_CASE("total loss weighted sum: E_photo 0.1 and E_reg 100 give 0.1949") {
  const Image img(8, 8);
  RenderedFace r = blank_face(10);
  r.color.row(0) << -0.6, 0.0, -0.8;  // residual norm 1, so E_photo = 1/10
  make_visible(r, 0);
  CodeVector x;
  x.alpha(0) = 10.0;  // E_reg = 100
  LossWeights w;
  w.l21_epsilon = 0.0;
  const LossBreakdown b = total_loss(r, x, img, nullptr, w);
  CHECK(std::abs(b.photo - 0.1) < 1e-12);
  CHECK(std::abs(b.reg - 100.0) < 1e-12);
  CHECK(std::abs(b.total - 0.1949) < 1e-12);
  CHECK(b.visible_count == 1);
}

TEST_CASE("toggling w_land changes the total by exactly E_land") {
  const Image img(8, 8);
  RenderedFace r = blank_face(10);
  make_visible(r, 1);
  const LandmarkSet l = {{r.screen_pos.row(4).transpose() + Eigen::Vector2d(3, 4), 1.0, 4}};
  LossWeights w;
  const LossBreakdown off = total_loss(r, CodeVector{}, img, &l, w);
  w.w_land = 1;
  const LossBreakdown on = total_loss(r, CodeVector{}, img, &l, w);
  CHECK(off.land == on.land);
  CHECK(on.total - off.total == doctest::Approx(25.0).epsilon(1e-14));
  CHECK_ERROR_KIND(total_loss(r, CodeVector{}, img, nullptr, w), ErrorKind::InvalidArgument);
}

TEST_CASE("total loss of an image rendered from its own code is the smoothing floor") {
  const FaceModel flat = testing::flat_model(600, 0.5);
  const Camera cam;
  const CodeVector x = init_code(flat, cam);
  // Colors are constant, so the quantized render equals the vertex color up to 8-bit rounding.
  const double c = 0.5 * 0.7 * sh::kBand0;
  const Image img(cam.width, cam.height, Eigen::Vector3d::Constant(c));
  LossWeights w;
  const LossBreakdown b = total_loss(flat, cam, x, img, nullptr, w);
  CHECK(b.reg == 0.0);
  CHECK(b.total < 1e-6);
  CHECK(b.visible_count > 0);
}

TEST_CASE("total loss validates its inputs") {
  const Camera cam;
  const CodeVector x = init_code(model(), cam);
  const Image img(cam.width, cam.height);
  LossWeights w;
  CHECK_ERROR_KIND(total_loss(model(), cam, x, Image(10, 10), nullptr, w), ErrorKind::InvalidArgument);
  LandmarkSet few(3);
  CHECK_ERROR_KIND(total_loss(model(), cam, x, img, &few, w), ErrorKind::InvalidArgument);
  LandmarkSet bad = project_landmarks(model(), cam, x);
  bad[0].confidence = 1.5;
  CHECK_ERROR_KIND(total_loss(model(), cam, x, img, &bad, w), ErrorKind::InvalidArgument);
  w.w_land = 2;
  CHECK_ERROR_KIND(total_loss(model(), cam, x, img, nullptr, w), ErrorKind::InvalidArgument);
  w.w_land = 0;
  w.w_photo = -1;
  CHECK_ERROR_KIND(total_loss(model(), cam, x, img, nullptr, w), ErrorKind::InvalidArgument);
}

TEST_CASE("loss grows with a growing landmark offset and a growing residual") {
  RenderedFace r = blank_face(10);
  make_visible(r, 0);
  double prev = -1;
  for (double d = 0; d < 5; d += 0.5) {
    const LandmarkSet l = {{r.screen_pos.row(0).transpose() + Eigen::Vector2d(d, 0), 1.0, 0}};
    const double v = landmark_loss(r, l);
    CHECK(v > prev);
    prev = v;
  }
  const Image img(8, 8);
  prev = -1;
  for (double c = 0; c < 1; c += 0.1) {
    r.color.row(0).setConstant(-c);
    const double v = photometric_loss(r, img).value;
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("mean RGB distance") {
  const Image img(8, 8);
  RenderedFace r = blank_face(10);
  CHECK(mean_rgb_distance(r, img) == 0.0);
  r.color.row(0) << 0.3, 0.0, 0.4;
  r.color.row(1) << 0.0, 0.0, 0.0;
  make_visible(r, 0);
  make_visible(r, 1);
  CHECK(std::abs(mean_rgb_distance(r, img) - 0.25) < 1e-12);
}
