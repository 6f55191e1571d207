#include "facecoder/formation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <limits>

#include "facecoder/errors.hpp"
#include "forward_state.hpp"

namespace facecoder {

// ---------------------------------------------------------------------------
// Image

Image::Image(int width, int height, const Eigen::Vector3d& fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw_invalid_argument("image dimensions must be positive");
  pixels_.resize(3 * static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    for (int c = 0; c < 3; ++c) pixels_[i + c] = static_cast<float>(std::clamp(fill(c), 0.0, 1.0));
  }
}

void Image::set(int x, int y, const Eigen::Vector3d& color) {
  float* p = &pixels_[3 * (static_cast<std::size_t>(y) * width_ + x)];
  for (int c = 0; c < 3; ++c) p[c] = static_cast<float>(std::clamp(color(c), 0.0, 1.0));
}

bool RenderedFace::operator==(const RenderedFace& other) const {
  auto same = [](const auto& a, const auto& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double x = a.data()[i], y = b.data()[i];
      if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
    }
    return true;
  };
  return same(screen_pos, other.screen_pos) && same(color, other.color) && same(depth, other.depth) &&
         visible == other.visible;
}

bool in_sample_domain(const Camera& camera, const Eigen::Vector2d& u) {
  return u.x() >= 0.0 && u.y() >= 0.0 && u.x() <= camera.width - 1 && u.y() <= camera.height - 1;
}

// ---------------------------------------------------------------------------
// Forward pass

namespace detail {

void shade_and_project(const MeshTopology& topology, const Camera& camera, const CodeVector& x,
                       ForwardState& s) {
  const auto n = topology.n_vertices();
  const auto& tris = topology.triangles();

  s.face_cross.resize(tris.size(), 3);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const Eigen::Vector3d a = s.positions.row(tris[t][0]);
    const Eigen::Vector3d b = s.positions.row(tris[t][1]);
    const Eigen::Vector3d c = s.positions.row(tris[t][2]);
    s.face_cross.row(t) = (b - a).cross(c - a).transpose();
  }

  s.rotation = euler_to_matrix(x.rotation);
  s.rotation_d = euler_to_matrix_derivatives(x.rotation);
  s.translation = x.translation;
  const Eigen::Matrix3d rt = s.rotation.transpose();

  s.normal_sum.resize(n, 3);
  s.normal_len.resize(n);
  s.normals.resize(n, 3);
  s.cam.resize(n, 3);
  s.cam_normals.resize(n, 3);
  s.sh.resize(n, kShBands);
  s.irradiance.resize(n, 3);
  s.screen.resize(n, 2);
  s.color.resize(n, 3);
  s.projectable.assign(n, 0);
  s.visible_mask.assign(n, 0);
  s.visible.clear();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::uint32_t i = 0; i < n; ++i) {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    double scale = 0.0;
    for (auto t : topology.incident(i)) {
      sum += s.face_cross.row(t).transpose();
      scale += s.face_cross.row(t).norm();
    }
    const double len = sum.norm();
    if (!(len > 1e-12 * scale) || !std::isfinite(len)) {
      throw Error(ErrorKind::DegenerateGeometry,
                  "accumulated normal of vertex " + std::to_string(i) + " vanishes", "normals", i);
    }
    const Eigen::Vector3d normal = sum / len;
    s.normal_sum.row(i) = sum.transpose();
    s.normal_len(i) = len;
    s.normals.row(i) = normal.transpose();

    const Eigen::Vector3d p = rt * (s.positions.row(i).transpose() - x.translation);
    const Eigen::Vector3d nc = rt * normal;
    s.cam.row(i) = p.transpose();
    s.cam_normals.row(i) = nc.transpose();

    const ShVector h = sh_basis_unchecked(nc);
    const Eigen::Vector3d e = sh_irradiance(h, x.gamma);
    s.sh.row(i) = h.transpose();
    s.irradiance.row(i) = e.transpose();
    s.color.row(i) = s.reflectance.row(i).cwiseProduct(e.transpose());

    if (auto u = project(camera, p)) {
      s.projectable[i] = 1;
      s.screen.row(i) = u->transpose();
      if (nc.z() < 0.0 && in_sample_domain(camera, *u)) {
        s.visible_mask[i] = 1;
        s.visible.push_back(i);
      }
    } else {
      s.screen.row(i) << nan, nan;
    }
  }
}

ForwardState compute_forward_state(const FaceModel& model, const Camera& camera, const CodeVector& x) {
  ForwardState s;
  s.positions = evaluate_shape(model, x.alpha, x.delta);
  s.reflectance = evaluate_reflectance(model, x.beta);
  shade_and_project(model.topology(), camera, x, s);
  return s;
}

RenderedFace to_rendered(const ForwardState& s) {
  RenderedFace r;
  r.screen_pos = s.screen;
  r.color = s.color;
  r.depth = s.cam.col(2);
  r.visible = s.visible;
  r.is_visible = s.visible_mask;
  return r;
}

}  // namespace detail

RenderedFace forward(const FaceModel& model, const Camera& camera, const CodeVector& x) {
  camera.validate();
  return detail::to_rendered(detail::compute_forward_state(model, camera, x));
}

// ---------------------------------------------------------------------------
// Sampling

std::optional<ImageSample> sample_image(const Image& image, const Eigen::Vector2d& u) {
  const int w = image.width(), h = image.height();
  if (!(u.x() >= 0.0 && u.y() >= 0.0 && u.x() <= w - 1 && u.y() <= h - 1)) return std::nullopt;
  const int x0 = std::min(static_cast<int>(std::floor(u.x())), std::max(w - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(u.y())), std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = u.x() - x0, fy = u.y() - y0;
  const Eigen::Vector3d c00 = image.at(x0, y0), c10 = image.at(x1, y0);
  const Eigen::Vector3d c01 = image.at(x0, y1), c11 = image.at(x1, y1);
  ImageSample s;
  const Eigen::Vector3d top = c00 + fx * (c10 - c00);
  const Eigen::Vector3d bottom = c01 + fx * (c11 - c01);
  s.color = top + fy * (bottom - top);
  s.gradient.col(0) = (1.0 - fy) * (c10 - c00) + fy * (c11 - c01);
  s.gradient.col(1) = bottom - top;
  return s;
}

// ---------------------------------------------------------------------------
// Rasterization

Image rasterize(std::span<const Triangle> triangles, const RenderedFace& rendered, const Image& background) {
  Image out = background;
  const int w = out.width(), h = out.height();
  std::vector<double> zbuf(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
  const auto n = rendered.n_vertices();
  std::vector<std::uint8_t> mask(n, 0);
  for (auto v : rendered.visible) {
    if (v >= n) throw_invalid_argument("visible index out of range");
    mask[v] = 1;
  }
  for (const auto& tri : triangles) {
    if (tri[0] >= n || tri[1] >= n || tri[2] >= n) throw_invalid_argument("triangle index out of range");
    if (!mask[tri[0]] && !mask[tri[1]] && !mask[tri[2]]) continue;
    const Eigen::Vector2d a = rendered.screen_pos.row(tri[0]);
    const Eigen::Vector2d b = rendered.screen_pos.row(tri[1]);
    const Eigen::Vector2d c = rendered.screen_pos.row(tri[2]);
    if (!a.allFinite() || !b.allFinite() || !c.allFinite()) continue;
    // With image y pointing down, a triangle facing the camera winds clockwise
    // on screen, giving a negative signed area.
    const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (!(area < -1e-12)) continue;
    const int xmin = std::max(0, static_cast<int>(std::ceil(std::min({a.x(), b.x(), c.x()}))));
    const int xmax = std::min(w - 1, static_cast<int>(std::floor(std::max({a.x(), b.x(), c.x()}))));
    const int ymin = std::max(0, static_cast<int>(std::ceil(std::min({a.y(), b.y(), c.y()}))));
    const int ymax = std::min(h - 1, static_cast<int>(std::floor(std::max({a.y(), b.y(), c.y()}))));
    const double inv_za = 1.0 / rendered.depth(tri[0]);
    const double inv_zb = 1.0 / rendered.depth(tri[1]);
    const double inv_zc = 1.0 / rendered.depth(tri[2]);
    const Eigen::Vector3d ca = rendered.color.row(tri[0]);
    const Eigen::Vector3d cb = rendered.color.row(tri[1]);
    const Eigen::Vector3d cc = rendered.color.row(tri[2]);
    for (int y = ymin; y <= ymax; ++y) {
      for (int x = xmin; x <= xmax; ++x) {
        const Eigen::Vector2d p(x, y);
        // Barycentric weights from signed sub-triangle areas.
        const double wa = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
        const double wb = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
        const double wc = 1.0 - wa - wb;
        if (wa < 0.0 || wb < 0.0 || wc < 0.0) continue;
        const double z = 1.0 / (wa * inv_za + wb * inv_zb + wc * inv_zc);
        double& zref = zbuf[static_cast<std::size_t>(y) * w + x];
        if (!(z < zref)) continue;
        zref = z;
        out.set(x, y, wa * ca + wb * cb + wc * cc);
      }
    }
  }
  return out;
}

Image rasterize(const FaceModel& model, const RenderedFace& rendered, const Image& background) {
  return rasterize(model.triangles(), rendered, background);
}

}  // namespace facecoder
