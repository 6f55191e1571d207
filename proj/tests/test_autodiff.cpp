#include <cmath>
#include <random>

#include <doctest.h>

#include "facecoder/autodiff.hpp"
#include "facecoder/dataset.hpp"
#include "facecoder/fit.hpp"
#include "facecoder/gradcheck.hpp"
#include "support/testing.hpp"

using namespace facecoder;

namespace {

const FaceModel& model() {
  static const FaceModel m = generate_synthetic_model(51, 500);
  return m;
}

}  // namespace

TEST_CASE("projection rows do not depend on reflectance or illumination") {
  const Camera cam;
  const CodeVector x = testing::random_code(model(), cam, 1);
  const JacobianResult j = jacobian(model(), cam, x);
  REQUIRE(!j.blocks.empty());
  for (const auto& b : j.blocks) {
    CHECK(b.matrix.block(0, kBetaOffset, 2, kReflDim).cwiseAbs().maxCoeff() == 0.0);
    CHECK(b.matrix.block(0, kGammaOffset, 2, kGammaDim).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("color rows against illumination are reflectance times the SH basis") {
  const Camera cam;
  const CodeVector x = testing::random_code(model(), cam, 2);
  const JacobianResult j = jacobian(model(), cam, x);
  const Points3 shape = evaluate_shape(model(), x.alpha, x.delta);
  const Points3 refl = evaluate_reflectance(model(), x.beta);
  const Points3 normals = vertex_normals(model(), shape);
  const Eigen::Matrix3d t = euler_to_matrix(x.rotation);
  for (const auto& b : j.blocks) {
    const ShVector h = sh_basis(t.transpose() * normals.row(b.vertex).transpose());
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < kGammaDim; ++k) {
        const double expected = (k % 3 == c) ? refl(b.vertex, c) * h(k / 3) : 0.0;
        CHECK(std::abs(b.matrix(2 + c, kGammaOffset + k) - expected) < 1e-14);
      }
    }
  }
}

TEST_CASE("jacobian matches the extended-precision finite-difference oracle") {
  const Camera cam;
  for (std::uint64_t k = 0; k < 3; ++k) {
    const CodeVector x = testing::random_code(model(), cam, 10 + k);
    const JacobianCheck c = check_jacobian(model(), cam, x);
    CHECK(c.report.entries > 0);
    CHECK(c.report.max_rel_error < kJacobianTolerance);
  }
}

TEST_CASE("explicit vertex lists report unprojectable vertices") {
  const Camera cam;
  CodeVector x = init_code(model(), cam);
  x.translation.z() = pose_pivot(model()).z();
  const RenderedFace r = forward(model(), cam, x);
  std::vector<std::uint32_t> behind, front;
  for (std::uint32_t i = 0; i < model().n_vertices(); ++i) {
    if (r.depth(i) <= kZNear) behind.push_back(i);
    if (r.depth(i) > kZNear + 1.0) front.push_back(i);
  }
  REQUIRE(!behind.empty());
  REQUIRE(!front.empty());
  const JacobianResult jb = jacobian(model(), cam, x, behind);
  CHECK(jb.blocks.empty());
  CHECK(jb.excluded_near_plane == behind);
  const JacobianResult jf = jacobian(model(), cam, x, front);
  CHECK(jf.blocks.size() == front.size());
  CHECK(jf.excluded_near_plane.empty());
  const std::vector<std::uint32_t> bad = {model().n_vertices()};
  CHECK_ERROR_KIND(jacobian(model(), cam, x, bad), ErrorKind::InvalidArgument);
}

TEST_CASE("gradient vanishes at an exact photometric optimum") {
  const Camera cam;
  const testing::ExactScene s = testing::exact_scene(500, cam);
  LossWeights w;
  w.w_reg = 0.0;
  const LossGradient g = loss_gradient(s.model, cam, init_code(s.model, cam), s.image, nullptr, w);
  CHECK(g.loss.visible_count > 0);
  CHECK(g.gradient.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("regularizer gradient") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  CodeVector x;
  for (auto& v : x.alpha) v = n(rng);
  for (auto& v : x.delta) v = n(rng);
  for (auto& v : x.beta) v = n(rng);
  x.rotation.setConstant(0.3);
  x.translation.setConstant(50);
  x.gamma.setConstant(0.2);
  LossWeights w;
  w.w_reg = 1.0;
  const Eigen::VectorXd g = reg_gradient(x, w);
  REQUIRE(g.size() == kCodeDim);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(kCodeDim);
  expected.segment(kAlphaOffset, kShapeDim) = 2 * x.alpha;
  expected.segment(kDeltaOffset, kExprDim) = 2 * w.w_delta * x.delta;
  expected.segment(kBetaOffset, kReflDim) = 2 * w.w_beta * x.beta;
  CHECK((g - expected).cwiseAbs().maxCoeff() < 1e-14);
  w.w_reg = 2.9e-5;
  CHECK((reg_gradient(x, w) - 2.9e-5 * expected).cwiseAbs().maxCoeff() < 1e-18);
}

TEST_CASE("loss gradient matches term-wise finite differences for both landmark settings") {
  const Camera cam;
  int checked = 0;
  for (std::uint64_t k = 0; checked < 4 && k < 40; ++k) {
    const SyntheticSample target = make_sample(model(), cam, SamplerConfig{}, 61, k);
    const CodeVector x = testing::random_code(model(), cam, 200 + k);
    if (near_pixel_grid(forward(model(), cam, x))) continue;
    for (int wl : {0, 1}) {
      LossWeights w;
      w.w_land = wl;
      const GradientCheck c = check_loss_gradient(model(), cam, x, target.image, &target.landmarks, w);
      CHECK(c.report.max_rel_error < kGradientTolerance);
    }
    ++checked;
  }
  CHECK(checked == 4);
}

TEST_CASE("reverse mode equals the sum of adjoint-weighted Jacobian blocks") {
  const Camera cam;
  const SyntheticSample target = make_sample(model(), cam, SamplerConfig{}, 62, 0);
  const CodeVector x = testing::random_code(model(), cam, 300);
  const RenderedFace r = forward(model(), cam, x);
  LossWeights w;
  w.w_land = 1;
  const OutputAdjoints adj = loss_output_adjoints(r, target.image, &target.landmarks, w);
  std::vector<std::uint32_t> active;
  for (std::uint32_t i = 0; i < model().n_vertices(); ++i) {
    if (adj.du.row(i).squaredNorm() + adj.dc.row(i).squaredNorm() > 0) active.push_back(i);
  }
  REQUIRE(!active.empty());
  const JacobianResult j = jacobian(model(), cam, x, active);
  CHECK(j.excluded_near_plane.empty());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kCodeDim);
  for (const auto& b : j.blocks) {
    Eigen::Matrix<double, 1, 5> a;
    a << adj.du.row(b.vertex), adj.dc.row(b.vertex);
    sum += (a * b.matrix).transpose();
  }
  const Eigen::VectorXd rev = backpropagate_outputs(model(), cam, x, adj);
  CHECK((rev - sum).cwiseAbs().maxCoeff() <= 1e-9 * sum.cwiseAbs().maxCoeff());

  const LossGradient g = loss_gradient(model(), cam, x, target.image, &target.landmarks, w);
  CHECK((g.gradient - rev - reg_gradient(x, w)).cwiseAbs().maxCoeff() <= 1e-12 * g.gradient.cwiseAbs().maxCoeff());
  CHECK(g.loss.total == doctest::Approx(total_loss(model(), cam, x, target.image, &target.landmarks, w).total));
}

TEST_CASE("fd_check on a constant and on a quadratic") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  Eigen::VectorXd x(kCodeDim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = n(rng);

  const auto constant = [](const Eigen::VectorXd&) { return 3.5; };
  const Eigen::MatrixXd num = numeric_jacobian(
      [&](const Eigen::VectorXd& p) { return Eigen::VectorXd::Constant(1, constant(p)); }, x, 1e-4);
  CHECK(num.cwiseAbs().maxCoeff() < 1e-10);
  const FdReport c = fd_check(constant, Eigen::VectorXd::Zero(kCodeDim), x, 1e-4);
  CHECK(c.max_rel_error == 0.0);
  CHECK(c.entries == static_cast<std::size_t>(kCodeDim));

  const auto quad = [](const Eigen::VectorXd& p) { return p.dot(p); };
  const FdReport q = fd_check(quad, 2.0 * x, x, 1e-3);
  CHECK(q.max_rel_error < 1e-8);

  // A wrong analytic gradient is caught and located.
  Eigen::VectorXd wrong = 2.0 * x;
  wrong(17) += 1.0;
  const FdReport bad = fd_check(quad, wrong, x, 1e-3);
  CHECK(bad.max_rel_error > 0.1);
  CHECK(bad.worst_param == 17);
}

TEST_CASE("fd_relative_error floor") {
  CHECK(fd_relative_error(1.0, 1.0) == 0.0);
  CHECK(fd_relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(fd_relative_error(1e-12, 0.0) == doctest::Approx(1e-4));
  CHECK_ERROR_KIND(numeric_jacobian([](const Eigen::VectorXd& p) { return p; }, Eigen::VectorXd::Zero(2), 0.0),
                   ErrorKind::InvalidArgument);
}
