#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "facecoder/face_model.hpp"
#include "facecoder/formation.hpp"
#include "facecoder/scene.hpp"

namespace facecoder {

/// How the photometric sum over V is normalized.
enum class PhotoNormalization { TotalVertices, VisibleVertices };

/// Objective weights. Defaults are the published values.
struct LossWeights {
  double w_photo = 1.92;
  double w_reg = 2.9e-5;
  int w_land = 0;  // 0 or 1
  double w_beta = 1.7e-3;
  double w_delta = 0.8;
  double l21_epsilon = 1e-8;
  PhotoNormalization normalization = PhotoNormalization::TotalVertices;

  void validate() const;
};

struct Landmark {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  // pixels
  double confidence = 1.0;                             // in [0, 1]
  std::uint32_t vertex = 0;
};

using LandmarkSet = std::vector<Landmark>;

/// Throws Error(InvalidArgument) unless the set has 46 entries with
/// confidences in [0, 1] and vertex indices below n_vertices.
void validate_landmarks(const LandmarkSet& landmarks, std::uint32_t n_vertices);

struct PhotometricLoss {
  double value = 0.0;
  bool empty_visibility = false;
};

/// (1/N) Σ_{i∈V} √(‖I(u_i) − c_i‖² + ε²) with N the total vertex count
/// (or |V| under PhotoNormalization::VisibleVertices).
PhotometricLoss photometric_loss(const RenderedFace& rendered, const Image& image, double epsilon = 1e-8,
                                 PhotoNormalization normalization = PhotoNormalization::TotalVertices);

/// Σ_j c_j ‖u_{k_j} − s_j‖². Landmarks whose vertex cannot be projected are skipped.
double landmark_loss(const RenderedFace& rendered, const LandmarkSet& landmarks);

/// Σ α_k² + w_β Σ β_k² + w_δ Σ δ_k². Pose and illumination are not penalized.
double reg_loss(const CodeVector& x, const LossWeights& weights);

struct LossBreakdown {
  double photo = 0.0;
  double land = 0.0;
  double reg = 0.0;
  double total = 0.0;
  std::size_t visible_count = 0;
  bool empty_visibility = false;
};

/// w_land·E_land + w_photo·E_photo + w_reg·E_reg.
/// Throws Error(InvalidArgument) when w_land = 1 and no landmarks are given.
LossBreakdown total_loss(const FaceModel& model, const Camera& camera, const CodeVector& x, const Image& image,
                         const LandmarkSet* landmarks, const LossWeights& weights);

/// Same, from an already computed forward pass.
LossBreakdown total_loss(const RenderedFace& rendered, const CodeVector& x, const Image& image,
                         const LandmarkSet* landmarks, const LossWeights& weights);

/// Mean per-vertex RGB distance ‖I(u_i) − c_i‖ over V (reporting metric).
double mean_rgb_distance(const RenderedFace& rendered, const Image& image);

}  // namespace facecoder
