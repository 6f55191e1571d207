#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "facecoder/autodiff.hpp"
#include "facecoder/face_model.hpp"
#include "facecoder/scene.hpp"

namespace facecoder {

// Finite-difference verification suite behind `eval --grad-check`.
//
// The Jacobian check compares jacobian() with central differences of an
// independent straight-line forward pass evaluated in long double. In double
// precision the cancellation error of (F(x+h) − F(x−h)) / 2h on pixel
// coordinates near 120 px is about 1e-10 px, which is larger than the true
// value of many small-σ shape entries, so a double-precision oracle would
// report rounding noise rather than Jacobian errors.
//
// The loss-gradient check differences total_loss term by term with V frozen.
// Each coordinate gets a step small enough that no visible vertex moves more
// than kGridMargin / 2 pixels, and configurations with a visible vertex within
// kGridMargin of a pixel-grid line are re-drawn, so every probe stays inside
// one bilinear cell.

inline constexpr double kJacobianTolerance = 1e-4;
inline constexpr double kGradientTolerance = 1e-3;
inline constexpr double kGridMargin = 1e-3;

struct JacobianCheck {
  FdReport report;                   // aggregated over all visible vertices
  std::size_t entries_over = 0;      // entries above kJacobianTolerance
  std::uint32_t worst_vertex = 0;
};

/// Analytic blocks for V against long-double central differences with step h.
JacobianCheck check_jacobian(const FaceModel& model, const Camera& camera, const CodeVector& x, double step = 1e-4);

/// Central-difference columns of the long-double forward pass for the given
/// vertices: result(5·j + r, k) is ∂(output r of vertices[j])/∂x_k.
Eigen::MatrixXd reference_jacobian(const FaceModel& model, const Camera& camera, const CodeVector& x,
                                   std::span<const std::uint32_t> vertices, double step);

/// True when some vertex of V lies within `margin` pixels of a grid line.
bool near_pixel_grid(const RenderedFace& rendered, double margin = kGridMargin);

struct GradientCheck {
  FdReport report;
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
};

/// Step for the smooth landmark and prior terms of the gradient check.
inline constexpr double kSmoothTermStep = 1e-2;

/// ∇E_loss against term-wise central differences with V frozen. The
/// photometric term uses at most `max_step`; the smooth terms use
/// kSmoothTermStep.
GradientCheck check_loss_gradient(const FaceModel& model, const Camera& camera, const CodeVector& x,
                                  const Image& image, const LandmarkSet* landmarks, const LossWeights& weights,
                                  double max_step = 1e-4);

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t jacobian_configs = 10;  // cycled over the given models
  std::size_t gradient_configs = 10;  // per w_land setting
  double step = 1e-4;
  std::size_t max_redraws = 1000;
};

struct GradCheckSummary {
  FdReport jacobian;
  std::size_t jacobian_configs = 0;
  std::size_t jacobian_entries_over = 0;
  FdReport gradient[2];  // indexed by w_land
  std::size_t gradient_configs = 0;
  std::size_t redraws = 0;
  double jacobian_seconds = 0.0;
  double gradient_seconds = 0.0;

  bool jacobian_pass() const { return jacobian.max_rel_error < kJacobianTolerance; }
  bool gradient_pass() const {
    return gradient[0].max_rel_error < kGradientTolerance && gradient[1].max_rel_error < kGradientTolerance;
  }
};

/// Random codes from the default scene sampler, one stream per config.
/// Gradient configs render a second sampled code as the target image with its
/// projected landmarks.
GradCheckSummary run_grad_check(std::span<const FaceModel> models, const Camera& camera,
                                const GradCheckOptions& options);

}  // namespace facecoder
