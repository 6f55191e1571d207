#pragma once

#include <array>
#include <optional>

#include <Eigen/Core>

#include "facecoder/face_model.hpp"

namespace facecoder {

/// Points at or in front of this camera-space depth (mm) are not projected.
inline constexpr double kZNear = 1.0;

/// Pinhole intrinsics. +z looks away from the camera, image y grows downward,
/// pixel (i, j) has its center at coordinate (i, j).
struct Camera {
  double focal_length = 500.0;
  Eigen::Vector2d principal_point{120.0, 120.0};
  int width = 240;
  int height = 240;

  /// Throws Error(InvalidArgument) when an invariant is violated.
  void validate() const;
  bool operator==(const Camera&) const = default;
};

/// Camera placement: rotation T and translation t, both in world space.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidPose from_code(const CodeVector& x);
};

/// T = R_z(θz)·R_y(θy)·R_x(θx) for angles (θx, θy, θz).
Eigen::Matrix3d euler_to_matrix(const Eigen::Vector3d& angles);

/// ∂T/∂θx, ∂T/∂θy, ∂T/∂θz.
std::array<Eigen::Matrix3d, 3> euler_to_matrix_derivatives(const Eigen::Vector3d& angles);

/// Tᵀ(v − t).
Eigen::Vector3d world_to_camera(const RigidPose& pose, const Eigen::Vector3d& v);
/// T·p + t.
Eigen::Vector3d camera_to_world(const RigidPose& pose, const Eigen::Vector3d& p);

/// Perspective projection to pixels; nullopt when p.z <= kZNear.
std::optional<Eigen::Vector2d> project(const Camera& camera, const Eigen::Vector3d& p_cam);

using ShVector = Eigen::Matrix<double, kShBands, 1>;
using ShGradient = Eigen::Matrix<double, kShBands, 3>;

namespace sh {
inline constexpr double kBand0 = 0.28209479177387814;  // 1 / (2√π)
inline constexpr double kBand1 = 0.48860251190291992;  // √(3 / 4π)
inline constexpr double kBand2 = 1.09254843059207907;  // √(15 / 4π)
inline constexpr double kBand2Zonal = 0.31539156525252005;  // √(5 / 16π)
inline constexpr double kBand2Sym = 0.54627421529603959;    // √(15 / 16π)
}  // namespace sh

/// Real SH basis, bands 0–2, order (1; y; z; x; xy; yz; 3z²−1; xz; x²−y²).
/// Throws Error(InvalidArgument) unless |‖n‖ − 1| <= 1e-6.
ShVector sh_basis(const Eigen::Vector3d& n);

/// Same polynomial without the unit-length check.
ShVector sh_basis_unchecked(const Eigen::Vector3d& n);

/// Gradient of each basis polynomial with respect to n (row b is ∇H_b).
ShGradient sh_basis_gradient(const Eigen::Vector3d& n);

/// Lambertian radiosity: color_c = r_c · Σ_b γ[3b + c] · H_b(n). No clamping.
Eigen::Vector3d sh_radiosity(const Eigen::Vector3d& reflectance, const Eigen::Vector3d& normal,
                             const Eigen::Ref<const Eigen::VectorXd>& gamma);

/// Per-channel irradiance Σ_b γ[3b + c] · H_b for precomputed basis values.
inline Eigen::Vector3d sh_irradiance(const ShVector& basis, const Eigen::Ref<const Eigen::VectorXd>& gamma) {
  Eigen::Vector3d e = Eigen::Vector3d::Zero();
  for (int b = 0; b < kShBands; ++b) e += basis(b) * gamma.segment<3>(3 * b);
  return e;
}

}  // namespace facecoder
