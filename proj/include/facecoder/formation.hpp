#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "facecoder/face_model.hpp"
#include "facecoder/scene.hpp"

namespace facecoder {

/// Linear RGB image, channel values in [0, 1]. Row-major, interleaved RGB.
class Image {
 public:
  Image() = default;
  Image(int width, int height, const Eigen::Vector3d& fill = Eigen::Vector3d::Zero());

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  Eigen::Vector3d at(int x, int y) const {
    const float* p = &pixels_[3 * (static_cast<std::size_t>(y) * width_ + x)];
    return {p[0], p[1], p[2]};
  }
  /// Stores the color clamped to [0, 1].
  void set(int x, int y, const Eigen::Vector3d& color);

  std::span<const float> pixels() const { return pixels_; }
  std::span<float> mutable_pixels() { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> pixels_;
};

/// Per-vertex output of the forward pass. Unprojectable vertices (depth at or
/// in front of kZNear) carry NaN screen positions.
struct RenderedFace {
  Points2 screen_pos;
  Points3 color;
  Eigen::VectorXd depth;
  std::vector<std::uint32_t> visible;   // ascending vertex indices
  std::vector<std::uint8_t> is_visible;  // mask of size N

  std::size_t n_vertices() const { return static_cast<std::size_t>(color.rows()); }
  bool operator==(const RenderedFace& other) const;
};

/// Visibility tests, exposed so they can be re-checked independently.
bool in_sample_domain(const Camera& camera, const Eigen::Vector2d& u);

/// u_i and c_i for every vertex, and the front-facing, in-depth, in-image set V.
RenderedFace forward(const FaceModel& model, const Camera& camera, const CodeVector& x);

struct ImageSample {
  Eigen::Vector3d color;
  Eigen::Matrix<double, 3, 2> gradient;  // ∂color/∂(u_x, u_y)
};

/// Bilinear lookup; nullopt outside [0, W−1]×[0, H−1]. On grid lines the
/// gradient is taken from the cell to the lower-right (clamped at the border).
std::optional<ImageSample> sample_image(const Image& image, const Eigen::Vector2d& u);

/// Z-buffered Gouraud rasterization. A triangle is drawn when it faces the
/// camera and at least one of its vertices is in V, so nothing is drawn for an
/// empty V. Ties in depth keep the lower triangle index.
Image rasterize(std::span<const Triangle> triangles, const RenderedFace& rendered, const Image& background);
Image rasterize(const FaceModel& model, const RenderedFace& rendered, const Image& background);

}  // namespace facecoder
