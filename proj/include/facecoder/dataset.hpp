#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "facecoder/face_model.hpp"
#include "facecoder/formation.hpp"
#include "facecoder/loss.hpp"
#include "facecoder/scene.hpp"

namespace facecoder {

/// Ranges of the synthetic scene sampler.
struct SamplerConfig {
  double coefficient_std = 1.0;      // α, δ, β ~ N(0, s²); bases already carry σ_k
  double max_angle_deg = 25.0;       // each Euler angle uniform in ±max
  double translation_jitter = 0.10;  // head center offset, fraction of radius (xy) and distance (z)
  double ambient = 0.7;              // band-0 illumination per channel
  double ambient_jitter = 0.1;       // uniform ± around ambient
  double band1_noise = 0.15;         // uniform ± on band-1 coefficients
  double band2_noise = 0.05;         // uniform ± on band-2 coefficients
  bool gradient_background = false;  // black unless set

  void validate() const;
};

/// Linear color ramp: color(x, y) = base + dx·x/(W−1) + dy·y/(H−1).
struct Background {
  Eigen::Vector3d base = Eigen::Vector3d::Zero();
  Eigen::Vector3d dx = Eigen::Vector3d::Zero();
  Eigen::Vector3d dy = Eigen::Vector3d::Zero();

  Image render(int width, int height) const;
  bool operator==(const Background&) const = default;
};

struct SyntheticSample {
  CodeVector code;
  Background background;
  Image image;           // 8-bit quantized so it survives the PPM round trip
  LandmarkSet landmarks;  // projected ground truth, confidence 1
};

/// Draws a code vector from the sampler ranges.
CodeVector sample_code(const FaceModel& model, const Camera& camera, const SamplerConfig& config,
                       std::mt19937_64& rng);

/// Renders a code over a background and quantizes the result to 8 bits.
Image render_scene(const FaceModel& model, const Camera& camera, const CodeVector& code,
                   const Background& background);

/// Projected model landmarks of a code with confidence 1.
LandmarkSet project_landmarks(const FaceModel& model, const Camera& camera, const CodeVector& code);

/// One scene from its own random stream (seed, index). Throws
/// Error(InvariantViolation) if a landmark falls outside the image.
SyntheticSample make_sample(const FaceModel& model, const Camera& camera, const SamplerConfig& config,
                            std::uint64_t seed, std::uint64_t index);

struct ManifestEntry {
  std::string image;      // paths relative to the manifest directory
  std::string code;
  std::string landmarks;
  Background background;
};

struct Manifest {
  std::uint64_t seed = 0;
  Camera camera;
  std::vector<ManifestEntry> entries;
};

/// Writes `count` samples and manifest.json into out_dir.
Manifest generate_dataset(const FaceModel& model, const Camera& camera, const SamplerConfig& config,
                          std::size_t count, std::uint64_t seed, const std::filesystem::path& out_dir);

std::string encode_manifest_json(const Manifest& manifest);
Manifest decode_manifest_json(const std::string& text);
Manifest read_manifest(const std::filesystem::path& path);

/// Dataset held in memory, images kept as 8-bit to bound memory use.
struct LoadedSample {
  std::vector<std::uint8_t> pixels;  // interleaved RGB bytes
  CodeVector code;
  LandmarkSet landmarks;
};

struct LoadedDataset {
  Camera camera;
  std::vector<LoadedSample> samples;

  Image image(std::size_t i) const;
};

/// Reads every entry of a manifest. Landmark files are loaded when present.
LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

/// Builds an in-memory dataset directly, without touching the disk.
LoadedDataset synthesize_dataset(const FaceModel& model, const Camera& camera, const SamplerConfig& config,
                                 std::size_t count, std::uint64_t seed);

}  // namespace facecoder
