#include "facecoder/loss.hpp"

#include <cmath>

#include "facecoder/errors.hpp"

namespace facecoder {

void LossWeights::validate() const {
  if (!(w_photo >= 0.0) || !(w_reg >= 0.0) || !(w_beta >= 0.0) || !(w_delta >= 0.0) || !(l21_epsilon >= 0.0)) {
    throw_invalid_argument("loss weights must be non-negative");
  }
  if (w_land != 0 && w_land != 1) throw_invalid_argument("w_land must be 0 or 1");
}

void validate_landmarks(const LandmarkSet& landmarks, std::uint32_t n_vertices) {
  if (landmarks.size() != kLandmarkCount) {
    throw_invalid_argument("expected 46 landmarks, got " + std::to_string(landmarks.size()));
  }
  for (const auto& l : landmarks) {
    if (!(l.confidence >= 0.0 && l.confidence <= 1.0)) throw_invalid_argument("landmark confidence outside [0,1]");
    if (l.vertex >= n_vertices) throw_invalid_argument("landmark vertex index out of range");
    if (!l.position.allFinite()) throw_invalid_argument("landmark position is not finite");
  }
}

PhotometricLoss photometric_loss(const RenderedFace& rendered, const Image& image, double epsilon,
                                 PhotoNormalization normalization) {
  PhotometricLoss out;
  if (rendered.visible.empty()) {
    out.empty_visibility = true;
    return out;
  }
  const double eps2 = epsilon * epsilon;
  double sum = 0.0;
  for (auto i : rendered.visible) {
    const auto sample = sample_image(image, rendered.screen_pos.row(i).transpose());
    if (!sample) throw_invalid_argument("visible vertex outside the image; camera and image disagree");
    const Eigen::Vector3d r = sample->color - rendered.color.row(i).transpose();
    sum += std::sqrt(r.squaredNorm() + eps2);
  }
  const double denom = normalization == PhotoNormalization::TotalVertices
                           ? static_cast<double>(rendered.n_vertices())
                           : static_cast<double>(rendered.visible.size());
  out.value = sum / denom;
  return out;
}

double landmark_loss(const RenderedFace& rendered, const LandmarkSet& landmarks) {
  double sum = 0.0;
  for (const auto& l : landmarks) {
    const Eigen::Vector2d u = rendered.screen_pos.row(l.vertex);
    if (!u.allFinite()) continue;
    sum += l.confidence * (u - l.position).squaredNorm();
  }
  return sum;
}

double reg_loss(const CodeVector& x, const LossWeights& weights) {
  return x.alpha.squaredNorm() + weights.w_beta * x.beta.squaredNorm() + weights.w_delta * x.delta.squaredNorm();
}

LossBreakdown total_loss(const RenderedFace& rendered, const CodeVector& x, const Image& image,
                         const LandmarkSet* landmarks, const LossWeights& weights) {
  weights.validate();
  if (weights.w_land == 1 && landmarks == nullptr) throw_invalid_argument("w_land = 1 requires landmarks");
  LossBreakdown b;
  const auto photo = photometric_loss(rendered, image, weights.l21_epsilon, weights.normalization);
  b.photo = photo.value;
  b.empty_visibility = photo.empty_visibility;
  b.visible_count = rendered.visible.size();
  b.land = landmarks ? landmark_loss(rendered, *landmarks) : 0.0;
  b.reg = reg_loss(x, weights);
  b.total = weights.w_land * b.land + weights.w_photo * b.photo + weights.w_reg * b.reg;
  return b;
}

LossBreakdown total_loss(const FaceModel& model, const Camera& camera, const CodeVector& x, const Image& image,
                         const LandmarkSet* landmarks, const LossWeights& weights) {
  if (image.width() != camera.width || image.height() != camera.height) {
    throw_invalid_argument("image size does not match the camera");
  }
  if (landmarks) validate_landmarks(*landmarks, model.n_vertices());
  return total_loss(forward(model, camera, x), x, image, landmarks, weights);
}

double mean_rgb_distance(const RenderedFace& rendered, const Image& image) {
  if (rendered.visible.empty()) return 0.0;
  double sum = 0.0;
  for (auto i : rendered.visible) {
    const auto sample = sample_image(image, rendered.screen_pos.row(i).transpose());
    if (!sample) continue;
    sum += (sample->color - rendered.color.row(i).transpose()).norm();
  }
  return sum / static_cast<double>(rendered.visible.size());
}

}  // namespace facecoder
