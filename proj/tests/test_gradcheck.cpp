#include <vector>

#include <doctest.h>

#include "facecoder/gradcheck.hpp"
#include "support/testing.hpp"

using namespace facecoder;

namespace {

RenderedFace single_vertex(double x, double y, bool visible) {
  RenderedFace r;
  r.screen_pos = Points2(1, 2);
  r.screen_pos << x, y;
  r.color = Points3::Zero(1, 3);
  r.depth = Eigen::VectorXd::Constant(1, 10.0);
  r.is_visible.assign(1, visible ? 1 : 0);
  if (visible) r.visible.push_back(0);
  return r;
}

}  // namespace

TEST_CASE("near_pixel_grid looks at visible vertices only") {
  CHECK(near_pixel_grid(single_vertex(10.0005, 20.5, true)));
  CHECK(near_pixel_grid(single_vertex(10.5, 19.9995, true)));
  CHECK_FALSE(near_pixel_grid(single_vertex(10.5, 20.5, true)));
  CHECK_FALSE(near_pixel_grid(single_vertex(10.002, 20.998, true)));
  CHECK_FALSE(near_pixel_grid(single_vertex(10.0, 20.0, false)));
  CHECK(near_pixel_grid(single_vertex(10.002, 20.5, true), 0.01));
}

TEST_CASE("reference jacobian agrees with the analytic blocks") {
  const FaceModel model = generate_synthetic_model(81, 300);
  const Camera cam;
  const CodeVector x = testing::random_code(model, cam, 4);
  const RenderedFace r = forward(model, cam, x);
  REQUIRE(r.visible.size() > 10);
  const std::vector<std::uint32_t> some = {r.visible[0], r.visible[5], r.visible[10]};
  const Eigen::MatrixXd ref = reference_jacobian(model, cam, x, some, 1e-4);
  REQUIRE(ref.rows() == 15);
  REQUIRE(ref.cols() == kCodeDim);
  const JacobianResult j = jacobian(model, cam, x, some);
  REQUIRE(j.blocks.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const Eigen::MatrixXd diff = j.blocks[k].matrix - ref.middleRows(5 * static_cast<Eigen::Index>(k), 5);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("a small grad-check suite passes on two models and is deterministic") {
  const FaceModel models[] = {generate_synthetic_model(1, 300), generate_synthetic_model(2, 500)};
  GradCheckOptions o;
  o.seed = 3;
  o.jacobian_configs = 4;
  o.gradient_configs = 3;
  const GradCheckSummary s = run_grad_check(models, Camera{}, o);
  CHECK(s.jacobian_configs == 4);
  CHECK(s.gradient_configs == 3);
  CHECK(s.jacobian.entries > 0);
  CHECK(s.gradient[0].entries > 0);
  CHECK(s.gradient[1].entries > 0);
  CHECK(s.jacobian_pass());
  CHECK(s.gradient_pass());
  CHECK(s.jacobian_entries_over == 0);
  const GradCheckSummary again = run_grad_check(models, Camera{}, o);
  CHECK(again.jacobian.max_rel_error == s.jacobian.max_rel_error);
  CHECK(again.gradient[1].max_rel_error == s.gradient[1].max_rel_error);
  CHECK(again.redraws == s.redraws);
}

TEST_CASE("grad-check input errors") {
  const std::vector<FaceModel> none;
  CHECK_ERROR_KIND(run_grad_check(none, Camera{}, GradCheckOptions{}), ErrorKind::InvalidArgument);
}
