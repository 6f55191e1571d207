#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "facecoder/face_model.hpp"
#include "facecoder/formation.hpp"
#include "facecoder/loss.hpp"
#include "facecoder/scene.hpp"

namespace facecoder {

// ---------------------------------------------------------------------------
// Framing and the head-centric pose parameterization
//
// Optimizers and the encoder do not move t directly. They move the position
// of the head center in camera space, s = Tᵀ(C − t), so a change of rotation
// turns the head in place instead of swinging it around the camera. The code
// vector itself always stores t.

/// Ambient (band 0) coefficient of every color channel at initialization.
inline constexpr double kAmbientOffset = 0.7;

/// Fraction of the image height spanned by the bounding sphere at init.
inline constexpr double kFramingFraction = 0.75;

/// Camera distance at which the model's bounding sphere spans
/// kFramingFraction of the image height.
double framing_distance(const FaceModel& model, const Camera& camera);

/// Head center C used as the rotation pivot (bounding-box center of A_s).
Eigen::Vector3d pose_pivot(const FaceModel& model);

/// s = Tᵀ(C − t).
Eigen::Vector3d pivot_offset(const CodeVector& x, const Eigen::Vector3d& pivot);

/// Sets t = C − T s for the current rotation.
void set_pivot_offset(CodeVector& x, const Eigen::Vector3d& pivot, const Eigen::Vector3d& offset);

/// Flattened code with the translation block replaced by s.
Eigen::VectorXd to_pivot_coordinates(const CodeVector& x, const Eigen::Vector3d& pivot);
CodeVector from_pivot_coordinates(const Eigen::VectorXd& y, const Eigen::Vector3d& pivot);

/// Converts ∂E/∂x (t coordinates) to ∂E/∂y (pivot coordinates) at x.
Eigen::VectorXd gradient_to_pivot(const Eigen::VectorXd& grad, const CodeVector& x, const Eigen::Vector3d& pivot);

/// Average face centered in the image under ambient light: α=δ=β=0, no
/// rotation, head center on the optical axis at framing_distance, band-0
/// illumination kAmbientOffset per channel.
CodeVector init_code(const FaceModel& model, const Camera& camera);

// ---------------------------------------------------------------------------
// Direct fitting

enum class Optimizer { AdaDelta, GdLineSearch, Lbfgs };

std::string to_string(Optimizer optimizer);
Optimizer optimizer_from_string(const std::string& name);

struct FitConfig {
  int max_iterations = 500;
  Optimizer optimizer = Optimizer::Lbfgs;
  double base_rate = 0.1;
  double z_translation_rate = 0.0005;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  double convergence_tol = 1e-6;  // relative loss change
  int convergence_window = 10;    // iterations
  int preconditioner_interval = 10;
  // Iterations at the start that move only pose and illumination.
  int pose_warmup_iterations = 50;
  std::uint64_t seed = 0;
  LossWeights weights;

  void validate() const;
};

struct FitReport {
  CodeVector code;                         // best-loss iterate
  LossBreakdown initial_loss;              // at the starting code
  std::vector<LossBreakdown> trajectory;   // one entry per iteration used
  std::vector<std::size_t> visible_counts;  // |V| per iteration used
  int iterations = 0;
  int best_iteration = 0;
  bool converged = false;
  double photometric_rgb = 0.0;            // mean RGB distance at the result
  std::optional<double> landmark_error;    // mean pixel error at the result
  LossBreakdown final_loss;
};

/// Minimizes the full objective from init_code. V is recomputed every
/// iteration and frozen within it. Landmarks are required when w_land = 1.
/// Throws Error(InitializationFailure) if nothing is visible at the start and
/// Error(Numerical) if the gradient stops being finite.
FitReport fit(const FaceModel& model, const Camera& camera, const Image& image, const LandmarkSet* landmarks,
              const FitConfig& config);

/// Same, from a given starting code.
FitReport fit_from(const FaceModel& model, const Camera& camera, const Image& image, const LandmarkSet* landmarks,
                   const FitConfig& config, const CodeVector& start);

struct FitMetrics {
  double geometric_error = 0.0;   // mm, translation and scale compensated
  double photometric_rgb = 0.0;   // mean per-vertex RGB distance over V
  double landmark_error = 0.0;    // px, mean over the model landmarks
};

/// Mean distance between corresponding rows after removing both centroids
/// and the best isotropic scale of the estimate.
double compensated_point_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& ground_truth);

/// Mean vertex distance between the rotated shapes Tᵀ·V of two codes after
/// removing centroids and the best isotropic scale of the estimate.
double compensated_geometric_error(const FaceModel& model, const CodeVector& estimate,
                                   const CodeVector& ground_truth);

/// Mean distance between projected model landmarks of two codes.
double landmark_pixel_error(const FaceModel& model, const Camera& camera, const CodeVector& estimate,
                            const CodeVector& ground_truth);

FitMetrics evaluate_fit(const FaceModel& model, const Camera& camera, const CodeVector& estimate,
                        const CodeVector& ground_truth, const Image& image);

}  // namespace facecoder
