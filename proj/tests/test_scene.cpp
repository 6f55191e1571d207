#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <doctest.h>

#include "facecoder/scene.hpp"
#include "support/testing.hpp"

using namespace facecoder;

namespace {

Eigen::Vector3d random_angles(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  return {u(rng), u(rng), u(rng)};
}

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
}

}  // namespace

TEST_CASE("euler_to_matrix examples") {
  CHECK(euler_to_matrix(Eigen::Vector3d::Zero()) == Eigen::Matrix3d::Identity());
  const Eigen::Vector3d v = euler_to_matrix(Eigen::Vector3d(0, M_PI / 2, 0)) * Eigen::Vector3d(1, 0, 0);
  CHECK((v - Eigen::Vector3d(0, 0, -1)).norm() < 1e-15);
}

TEST_CASE("euler_to_matrix composes z, y, x rotations") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d a = random_angles(rng);
    const Eigen::Matrix3d expected = (Eigen::AngleAxisd(a.z(), Eigen::Vector3d::UnitZ()) *
                                      Eigen::AngleAxisd(a.y(), Eigen::Vector3d::UnitY()) *
                                      Eigen::AngleAxisd(a.x(), Eigen::Vector3d::UnitX()))
                                         .toRotationMatrix();
    const Eigen::Matrix3d t = euler_to_matrix(a);
    CHECK((t - expected).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((t.transpose() * t - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(t.determinant() - 1.0) < 1e-9);
  }
}

TEST_CASE("euler_to_matrix derivatives match central differences") {
  std::mt19937_64 rng(2);
  const double h = 1e-6;
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector3d a = random_angles(rng);
    const auto d = euler_to_matrix_derivatives(a);
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d ap = a, am = a;
      ap(j) += h;
      am(j) -= h;
      const Eigen::Matrix3d fd = (euler_to_matrix(ap) - euler_to_matrix(am)) / (2 * h);
      CHECK((fd - d[j]).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("world_to_camera examples") {
  const RigidPose id;
  const Eigen::Vector3d v(1.5, -2.0, 30.0);
  CHECK(world_to_camera(id, v) == v);
  RigidPose pose;
  pose.rotation = euler_to_matrix(Eigen::Vector3d(0.3, -0.2, 1.1));
  pose.translation = Eigen::Vector3d(4, 5, -6);
  CHECK(world_to_camera(pose, pose.translation).norm() < 1e-15);
}

TEST_CASE("world_to_camera matches a homogeneous matrix oracle") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 100.0);
  for (int i = 0; i < 50; ++i) {
    RigidPose pose;
    pose.rotation = euler_to_matrix(random_angles(rng));
    pose.translation = Eigen::Vector3d(g(rng), g(rng), g(rng));
    // Camera-to-world is [T t; 0 1]; world-to-camera is its inverse.
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = pose.rotation;
    m.topRightCorner<3, 1>() = pose.translation;
    const Eigen::Matrix4d inv = m.inverse();
    const Eigen::Vector3d v(g(rng), g(rng), g(rng));
    const Eigen::Vector4d expected = inv * v.homogeneous();
    const Eigen::Vector3d p = world_to_camera(pose, v);
    CHECK((p - expected.head<3>()).norm() / std::max(1.0, v.norm()) < 1e-12);
    CHECK((camera_to_world(pose, p) - v).norm() / std::max(1.0, v.norm()) < 1e-12);
  }
}

TEST_CASE("RigidPose from a code vector") {
  CodeVector x;
  x.rotation = Eigen::Vector3d(0.1, 0.2, 0.3);
  x.translation = Eigen::Vector3d(1, 2, 3);
  const RigidPose p = RigidPose::from_code(x);
  CHECK(p.rotation == euler_to_matrix(x.rotation));
  CHECK(p.translation == x.translation);
}

TEST_CASE("project examples") {
  const Camera cam;
  for (double z : {1.5, 10.0, 600.0}) {
    const auto u = project(cam, Eigen::Vector3d(0, 0, z));
    REQUIRE(u.has_value());
    CHECK(*u == cam.principal_point);
    const auto w = project(cam, Eigen::Vector3d(z, 0, z));
    REQUIRE(w.has_value());
    CHECK((*w - (cam.principal_point + Eigen::Vector2d(cam.focal_length, 0))).norm() < 1e-12);
  }
  // y grows downward with +y camera axis.
  CHECK(project(cam, Eigen::Vector3d(0, 1, 10))->y() > cam.principal_point.y());
}

TEST_CASE("project rejects points at or in front of the near plane") {
  const Camera cam;
  CHECK_FALSE(project(cam, Eigen::Vector3d(0, 0, kZNear)).has_value());
  CHECK_FALSE(project(cam, Eigen::Vector3d(0, 0, 0.5)).has_value());
  CHECK_FALSE(project(cam, Eigen::Vector3d(1, 1, -10)).has_value());
  CHECK(project(cam, Eigen::Vector3d(0, 0, std::nextafter(kZNear, 2.0))).has_value());
}

TEST_CASE("camera validation") {
  Camera c;
  CHECK_NOTHROW(c.validate());
  c.focal_length = 0;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::InvalidArgument);
  c = Camera{};
  c.principal_point = Eigen::Vector2d(300, 10);
  CHECK_ERROR_KIND(c.validate(), ErrorKind::InvalidArgument);
  c = Camera{};
  c.width = 0;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::InvalidArgument);
}

TEST_CASE("sh_basis constants") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) CHECK(sh_basis(random_unit(rng))(0) == doctest::Approx(0.2820948).epsilon(1e-7));
  const ShVector h = sh_basis(Eigen::Vector3d(0, 0, 1));
  // One-based H_3 is the z term.
  CHECK(h(2) == doctest::Approx(0.4886025).epsilon(1e-7));
  CHECK(h(1) == 0.0);
  CHECK(h(3) == 0.0);
  CHECK(sh::kBand0 == doctest::Approx(1.0 / (2.0 * std::sqrt(M_PI))).epsilon(1e-15));
  CHECK(sh::kBand1 == doctest::Approx(std::sqrt(3.0 / (4 * M_PI))).epsilon(1e-15));
  CHECK(sh::kBand2 == doctest::Approx(std::sqrt(15.0 / (4 * M_PI))).epsilon(1e-15));
  CHECK(sh::kBand2Zonal == doctest::Approx(std::sqrt(5.0 / (16 * M_PI))).epsilon(1e-15));
  CHECK(sh::kBand2Sym == doctest::Approx(std::sqrt(15.0 / (16 * M_PI))).epsilon(1e-15));
}

TEST_CASE("sh_basis order") {
  const Eigen::Vector3d n = Eigen::Vector3d(0.3, -0.5, 0.7).normalized();
  const double x = n.x(), y = n.y(), z = n.z();
  const ShVector h = sh_basis(n);
  ShVector e;
  e << sh::kBand0, sh::kBand1 * y, sh::kBand1 * z, sh::kBand1 * x, sh::kBand2 * x * y, sh::kBand2 * y * z,
      sh::kBand2Zonal * (3 * z * z - 1), sh::kBand2 * x * z, sh::kBand2Sym * (x * x - y * y);
  CHECK((h - e).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("sh_basis is orthonormal on the sphere (Monte Carlo)") {
  std::mt19937_64 rng(5);
  const int samples = 1000000;
  Eigen::Matrix<double, 9, 9> gram = Eigen::Matrix<double, 9, 9>::Zero();
  for (int i = 0; i < samples; ++i) {
    const ShVector h = sh_basis(random_unit(rng));
    gram.noalias() += h * h.transpose();
  }
  gram *= 4 * M_PI / samples;
  CHECK((gram - Eigen::Matrix<double, 9, 9>::Identity()).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("sh_basis rejects non-unit normals") {
  CHECK_ERROR_KIND(sh_basis(Eigen::Vector3d(0, 0, 1.01)), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(sh_basis(Eigen::Vector3d::Zero()), ErrorKind::InvalidArgument);
  CHECK_NOTHROW(sh_basis(Eigen::Vector3d(0, 0, 1 + 5e-7)));
}

TEST_CASE("sh_basis_gradient matches central differences") {
  std::mt19937_64 rng(6);
  const double h = 1e-6;
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector3d n = random_unit(rng);
    const ShGradient g = sh_basis_gradient(n);
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d np = n, nm = n;
      np(j) += h;
      nm(j) -= h;
      const ShVector fd = (sh_basis_unchecked(np) - sh_basis_unchecked(nm)) / (2 * h);
      CHECK((fd - g.col(j)).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("sh_radiosity examples") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd gamma(kGammaDim);
  for (int i = 0; i < kGammaDim; ++i) gamma(i) = u(rng);
  const Eigen::Vector3d n = random_unit(rng);
  CHECK(sh_radiosity(Eigen::Vector3d::Zero(), n, gamma) == Eigen::Vector3d::Zero());

  Eigen::VectorXd ambient = Eigen::VectorXd::Zero(kGammaDim);
  ambient.head<3>() = Eigen::Vector3d(0.7, 0.5, 0.3);
  const Eigen::Vector3d r(0.8, 0.6, 0.4);
  const Eigen::Vector3d expected = r.cwiseProduct(ambient.head<3>()) * 0.28209479177387814;
  for (int i = 0; i < 5; ++i) CHECK((sh_radiosity(r, random_unit(rng), ambient) - expected).norm() < 1e-15);

  // Channel c uses gamma[3b + c].
  const ShVector h = sh_basis(n);
  Eigen::Vector3d direct = Eigen::Vector3d::Zero();
  for (int c = 0; c < 3; ++c)
    for (int b = 0; b < kShBands; ++b) direct(c) += r(c) * gamma(3 * b + c) * h(b);
  CHECK((sh_radiosity(r, n, gamma) - direct).norm() < 1e-14);
  CHECK((sh_irradiance(h, gamma).cwiseProduct(r) - direct).norm() < 1e-14);
}

TEST_CASE("sh_radiosity is linear in reflectance and illumination and unclamped") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd g1(kGammaDim), g2(kGammaDim);
  for (int i = 0; i < kGammaDim; ++i) {
    g1(i) = u(rng);
    g2(i) = u(rng);
  }
  const Eigen::Vector3d n = random_unit(rng);
  const Eigen::Vector3d r(0.3, 0.2, 0.9);
  const Eigen::Vector3d lhs = sh_radiosity(r, n, 2.0 * g1 - 3.0 * g2);
  const Eigen::Vector3d rhs = 2.0 * sh_radiosity(r, n, g1) - 3.0 * sh_radiosity(r, n, g2);
  CHECK((lhs - rhs).norm() < 1e-14);
  CHECK((sh_radiosity(2.0 * r, n, g1) - 2.0 * sh_radiosity(r, n, g1)).norm() < 1e-14);
  Eigen::VectorXd bright = Eigen::VectorXd::Zero(kGammaDim);
  bright.head<3>().setConstant(100.0);
  CHECK(sh_radiosity(Eigen::Vector3d::Ones(), n, bright).minCoeff() > 1.0);
  CHECK(sh_radiosity(Eigen::Vector3d::Ones(), n, -bright).maxCoeff() < 0.0);
}
