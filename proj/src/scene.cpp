#include "facecoder/scene.hpp"

#include <cmath>

#include "facecoder/errors.hpp"

namespace facecoder {

void Camera::validate() const {
  if (!(focal_length > 0.0) || !std::isfinite(focal_length)) throw_invalid_argument("focal length must be > 0");
  if (width <= 1 || height <= 1) throw_invalid_argument("image size must be at least 2x2");
  if (!(principal_point.x() >= 0.0 && principal_point.x() <= width && principal_point.y() >= 0.0 &&
        principal_point.y() <= height)) {
    throw_invalid_argument("principal point must lie inside the image");
  }
}

RigidPose RigidPose::from_code(const CodeVector& x) {
  return {euler_to_matrix(x.rotation), x.translation};
}

namespace {
Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return (Eigen::Matrix3d() << 1, 0, 0, 0, c, -s, 0, s, c).finished();
}
Eigen::Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return (Eigen::Matrix3d() << c, 0, s, 0, 1, 0, -s, 0, c).finished();
}
Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return (Eigen::Matrix3d() << c, -s, 0, s, c, 0, 0, 0, 1).finished();
}
Eigen::Matrix3d drot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return (Eigen::Matrix3d() << 0, 0, 0, 0, -s, -c, 0, c, -s).finished();
}
Eigen::Matrix3d drot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return (Eigen::Matrix3d() << -s, 0, c, 0, 0, 0, -c, 0, -s).finished();
}
Eigen::Matrix3d drot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return (Eigen::Matrix3d() << -s, -c, 0, c, -s, 0, 0, 0, 0).finished();
}
}  // namespace

Eigen::Matrix3d euler_to_matrix(const Eigen::Vector3d& angles) {
  return rot_z(angles.z()) * rot_y(angles.y()) * rot_x(angles.x());
}

std::array<Eigen::Matrix3d, 3> euler_to_matrix_derivatives(const Eigen::Vector3d& angles) {
  const Eigen::Matrix3d rx = rot_x(angles.x()), ry = rot_y(angles.y()), rz = rot_z(angles.z());
  return {rz * ry * drot_x(angles.x()), rz * drot_y(angles.y()) * rx, drot_z(angles.z()) * ry * rx};
}

Eigen::Vector3d world_to_camera(const RigidPose& pose, const Eigen::Vector3d& v) {
  return pose.rotation.transpose() * (v - pose.translation);
}

Eigen::Vector3d camera_to_world(const RigidPose& pose, const Eigen::Vector3d& p) {
  return pose.rotation * p + pose.translation;
}

std::optional<Eigen::Vector2d> project(const Camera& camera, const Eigen::Vector3d& p_cam) {
  if (!(p_cam.z() > kZNear)) return std::nullopt;
  return camera.principal_point + camera.focal_length * Eigen::Vector2d(p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z());
}

ShVector sh_basis_unchecked(const Eigen::Vector3d& n) {
  const double x = n.x(), y = n.y(), z = n.z();
  ShVector h;
  h << sh::kBand0, sh::kBand1 * y, sh::kBand1 * z, sh::kBand1 * x, sh::kBand2 * x * y, sh::kBand2 * y * z,
      sh::kBand2Zonal * (3.0 * z * z - 1.0), sh::kBand2 * x * z, sh::kBand2Sym * (x * x - y * y);
  return h;
}

ShVector sh_basis(const Eigen::Vector3d& n) {
  if (!(std::abs(n.norm() - 1.0) <= 1e-6)) throw_invalid_argument("sh_basis expects a unit normal");
  return sh_basis_unchecked(n);
}

ShGradient sh_basis_gradient(const Eigen::Vector3d& n) {
  const double x = n.x(), y = n.y(), z = n.z();
  ShGradient g;
  g << 0, 0, 0,
       0, sh::kBand1, 0,
       0, 0, sh::kBand1,
       sh::kBand1, 0, 0,
       sh::kBand2 * y, sh::kBand2 * x, 0,
       0, sh::kBand2 * z, sh::kBand2 * y,
       0, 0, 6.0 * sh::kBand2Zonal * z,
       sh::kBand2 * z, 0, sh::kBand2 * x,
       2.0 * sh::kBand2Sym * x, -2.0 * sh::kBand2Sym * y, 0;
  return g;
}

Eigen::Vector3d sh_radiosity(const Eigen::Vector3d& reflectance, const Eigen::Vector3d& normal,
                             const Eigen::Ref<const Eigen::VectorXd>& gamma) {
  if (gamma.size() != kGammaDim) throw_invalid_argument("gamma must have 27 entries");
  return reflectance.cwiseProduct(sh_irradiance(sh_basis(normal), gamma));
}

}  // namespace facecoder
