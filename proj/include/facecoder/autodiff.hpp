#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "facecoder/face_model.hpp"
#include "facecoder/formation.hpp"
#include "facecoder/loss.hpp"
#include "facecoder/scene.hpp"

namespace facecoder {

/// Rows (u_x, u_y, c_r, c_g, c_b) against the flattened code vector.
using JacobianMatrix = Eigen::Matrix<double, 5, kCodeDim>;

struct JacobianBlock {
  std::uint32_t vertex = 0;
  JacobianMatrix matrix;
};

/// Vertices closer than this to kZNear are left out of the Jacobian.
inline constexpr double kNearPlaneGuard = 1e-6;

struct JacobianResult {
  std::vector<JacobianBlock> blocks;
  std::vector<std::uint32_t> excluded_near_plane;
};

/// dF_i/dx for every vertex in V (visibility held fixed).
JacobianResult jacobian(const FaceModel& model, const Camera& camera, const CodeVector& x);

/// dF_i/dx for the listed vertices. Vertices that cannot be projected are
/// reported in excluded_near_plane.
JacobianResult jacobian(const FaceModel& model, const Camera& camera, const CodeVector& x,
                        std::span<const std::uint32_t> vertices);

/// Per-vertex adjoints ∂E/∂u_i and ∂E/∂c_i of a scalar objective.
struct OutputAdjoints {
  Points2 du;
  Points3 dc;
};

/// Adjoints of w_photo·E_photo + w_land·E_land for a forward pass.
OutputAdjoints loss_output_adjoints(const RenderedFace& rendered, const Image& image, const LandmarkSet* landmarks,
                                    const LossWeights& weights);

/// Σ_i (∂E/∂u_i, ∂E/∂c_i)·B_i accumulated in reverse mode, without forming B_i.
/// Only vertices with a non-zero adjoint contribute; colors are only
/// differentiated for vertices in V.
Eigen::VectorXd backpropagate_outputs(const FaceModel& model, const Camera& camera, const CodeVector& x,
                                      const OutputAdjoints& adjoints);

/// ∇_x E_reg scaled by w_reg.
Eigen::VectorXd reg_gradient(const CodeVector& x, const LossWeights& weights);

struct LossGradient {
  Eigen::VectorXd gradient;  // 257 entries, flattened order
  LossBreakdown loss;
};

/// Value and gradient of the full objective at x.
LossGradient loss_gradient(const FaceModel& model, const Camera& camera, const CodeVector& x, const Image& image,
                           const LandmarkSet* landmarks, const LossWeights& weights);

// ---------------------------------------------------------------------------
// Finite-difference verification

struct FdReport {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  Eigen::Index worst_row = -1;   // output index (5·k + r for stacked blocks)
  Eigen::Index worst_param = -1;  // input index
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t entries = 0;
};

/// |a − n| / max(|a|, |n|, 1e-8).
double fd_relative_error(double analytic, double numeric);

/// Central differences of a vector function, one column per coordinate.
Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step);

/// Compares an analytic Jacobian (outputs × inputs) with central differences.
FdReport fd_check(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                  const Eigen::MatrixXd& analytic, const Eigen::VectorXd& x, double step);

/// Scalar variant: the analytic argument is the gradient.
FdReport fd_check(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& analytic,
                  const Eigen::VectorXd& x, double step);

/// Compares two matrices entry by entry with fd_relative_error.
FdReport compare_entries(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric);

}  // namespace facecoder
