#pragma once

// Shared fixtures for the unit tests.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <doctest.h>

#include "facecoder/dataset.hpp"
#include "facecoder/errors.hpp"
#include "facecoder/face_model.hpp"
#include "facecoder/fit.hpp"
#include "facecoder/random.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Empty directory private to one test.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "facecoder_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// The synthetic model with a constant average reflectance, so a render
/// under ambient light has one color everywhere.
inline facecoder::FaceModel flat_model(std::uint32_t n_vertices, double albedo) {
  facecoder::FaceModelData d = facecoder::generate_synthetic_model(3, n_vertices).data();
  d.avg_reflectance.setConstant(albedo);
  return facecoder::FaceModel(std::move(d));
}

/// Albedo whose init_code color a·(H_1·0.7) is exactly the float value
/// `target`, so a constant image of that value reproduces every vertex color.
inline double exact_albedo(float target) {
  const double irradiance = facecoder::sh::kBand0 * facecoder::kAmbientOffset;
  double a = target / irradiance;
  for (int k = 0; k < 64; ++k) {
    const double c = a * irradiance;
    if (c == static_cast<double>(target)) return a;
    a = c < target ? std::nextafter(a, 1e9) : std::nextafter(a, -1e9);
  }
  FAIL("no exact albedo found");
  return a;
}

/// Flat model whose init_code render matches a constant image exactly at
/// every visible vertex, with that image.
struct ExactScene {
  facecoder::FaceModel model;
  facecoder::Image image;
};

inline ExactScene exact_scene(std::uint32_t n_vertices, const facecoder::Camera& camera, float target = 0.125f) {
  return {flat_model(n_vertices, exact_albedo(target)),
          facecoder::Image(camera.width, camera.height, Eigen::Vector3d::Constant(target))};
}

/// A code drawn from the default scene sampler.
inline facecoder::CodeVector random_code(const facecoder::FaceModel& model, const facecoder::Camera& camera,
                                         std::uint64_t seed) {
  auto rng = facecoder::make_stream(seed, 77);
  return facecoder::sample_code(model, camera, facecoder::SamplerConfig{}, rng);
}

/// Runs fn and returns the library error it throws, if any.
inline std::optional<facecoder::Error> error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const facecoder::Error& e) {
    return e;
  }
  return std::nullopt;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace testing

#define CHECK_ERROR_KIND(expr, expected_kind)                        \
  do {                                                               \
    const auto caught_ = ::testing::error_of([&] { (void)(expr); }); \
    REQUIRE_MESSAGE(caught_.has_value(), "no facecoder::Error");     \
    CHECK(caught_->kind() == (expected_kind));                       \
  } while (0)
