// Synthetic head model: convex hull of a Fibonacci sphere, sculpted into a
// head with nose, brow, eye sockets and chin, plus smooth random PCA-style
// bases with geometrically decaying standard deviations.

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <numbers>
#include <random>
#include <unordered_map>

#include <Eigen/Dense>

#include "facecoder/errors.hpp"
#include "facecoder/face_model.hpp"

namespace facecoder {
namespace {

std::vector<Eigen::Vector3d> fibonacci_sphere(std::uint32_t n) {
  std::vector<Eigen::Vector3d> pts(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::uint32_t i = 0; i < n; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * i;
    pts[i] = {r * std::cos(phi), y, r * std::sin(phi)};
  }
  return pts;
}

// Incremental convex hull. All input points are assumed to be extreme
// (they lie on a sphere); outward-oriented triangles are returned.
std::vector<Triangle> convex_hull(const std::vector<Eigen::Vector3d>& p) {
  struct Face {
    Triangle v;
    Eigen::Vector3d normal;
    double offset;
  };
  auto make_face = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    Face f{{a, b, c}, (p[b] - p[a]).cross(p[c] - p[a]).normalized(), 0.0};
    f.offset = f.normal.dot(p[a]);
    return f;
  };
  auto key = [](std::uint32_t a, std::uint32_t b) { return (static_cast<std::uint64_t>(a) << 32) | b; };

  const auto n = static_cast<std::uint32_t>(p.size());
  // Seed tetrahedron from well-separated points.
  std::uint32_t i0 = 0, i1 = 0, i2 = 0, i3 = 0;
  double best = -1;
  for (std::uint32_t i = 0; i < n; ++i)
    if (double d = (p[i] - p[i0]).squaredNorm(); d > best) best = d, i1 = i;
  best = -1;
  for (std::uint32_t i = 0; i < n; ++i)
    if (double d = (p[i] - p[i0]).cross(p[i1] - p[i0]).squaredNorm(); d > best) best = d, i2 = i;
  best = -1;
  const Eigen::Vector3d pn = (p[i1] - p[i0]).cross(p[i2] - p[i0]);
  for (std::uint32_t i = 0; i < n; ++i)
    if (double d = std::abs(pn.dot(p[i] - p[i0])); d > best) best = d, i3 = i;
  if (pn.dot(p[i3] - p[i0]) > 0) std::swap(i1, i2);

  std::vector<Face> faces;
  std::vector<char> alive;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_face;
  auto add_face = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    const auto id = static_cast<std::uint32_t>(faces.size());
    faces.push_back(make_face(a, b, c));
    alive.push_back(1);
    edge_face[key(a, b)] = id;
    edge_face[key(b, c)] = id;
    edge_face[key(c, a)] = id;
  };
  add_face(i0, i1, i2);
  add_face(i0, i3, i1);
  add_face(i1, i3, i2);
  add_face(i2, i3, i0);

  std::vector<std::uint32_t> live = {0, 1, 2, 3};
  std::vector<char> visible;
  std::vector<std::array<std::uint32_t, 2>> horizon;
  for (std::uint32_t q = 0; q < n; ++q) {
    if (q == i0 || q == i1 || q == i2 || q == i3) continue;
    visible.assign(faces.size(), 0);
    bool any = false;
    for (auto f : live) {
      if (faces[f].normal.dot(p[q]) - faces[f].offset > 1e-12) visible[f] = 1, any = true;
    }
    if (!any) throw Error(ErrorKind::DegenerateGeometry, "hull point is not extreme", "mesh", q);
    horizon.clear();
    for (auto f : live) {
      if (!visible[f]) continue;
      const auto& v = faces[f].v;
      for (int e = 0; e < 3; ++e) {
        const std::uint32_t a = v[e], b = v[(e + 1) % 3];
        const auto twin = edge_face.at(key(b, a));
        if (!visible[twin]) horizon.push_back({a, b});
      }
    }
    std::vector<std::uint32_t> next_live;
    next_live.reserve(live.size() + horizon.size());
    for (auto f : live) {
      if (visible[f]) {
        alive[f] = 0;
        const auto& v = faces[f].v;
        for (int e = 0; e < 3; ++e) edge_face.erase(key(v[e], v[(e + 1) % 3]));
      } else {
        next_live.push_back(f);
      }
    }
    for (const auto& [a, b] : horizon) {
      next_live.push_back(static_cast<std::uint32_t>(faces.size()));
      add_face(a, b, q);
    }
    live = std::move(next_live);
  }
  std::vector<Triangle> out;
  out.reserve(live.size());
  std::sort(live.begin(), live.end());
  for (auto f : live) out.push_back(faces[f].v);
  return out;
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double gauss2(double x, double y, double sx, double sy) {
  return std::exp(-0.5 * ((x * x) / (sx * sx) + (y * y) / (sy * sy)));
}

// Weight of the facial front region for a unit direction (front is -z).
double front_weight(const Eigen::Vector3d& d) { return smoothstep(0.15, 0.6, -d.z()); }

// Radial displacement in mm sculpting the facial features.
double feature_displacement(const Eigen::Vector3d& d) {
  const double w = front_weight(d);
  if (w == 0.0) return 0.0;
  const double x = d.x(), y = d.y();
  double disp = 0.0;
  disp += 22.0 * gauss2(x, y - 0.10, 0.10, 0.22);                 // nose
  disp -= 9.0 * gauss2(std::abs(x) - 0.33, y + 0.18, 0.13, 0.09);  // eye sockets
  disp += 5.0 * gauss2(std::abs(x) - 0.3, y + 0.33, 0.25, 0.06);   // brow ridge
  disp -= 3.0 * gauss2(x, y - 0.46, 0.22, 0.04);                   // mouth groove
  disp += 2.5 * gauss2(x, y - 0.40, 0.18, 0.05);                   // upper lip
  disp += 6.0 * gauss2(x, y - 0.66, 0.22, 0.10);                   // chin
  disp -= 4.0 * gauss2(std::abs(x) - 0.45, y - 0.1, 0.12, 0.2);    // cheek hollows
  return w * disp;
}

// Feature blobs are wide and contrasted enough to stay visible at a few
// hundred vertices, so image evidence constrains pose and not only shading.
Eigen::Vector3d skin_tone(const Eigen::Vector3d& d) {
  const Eigen::Vector3d skin(0.80, 0.58, 0.47);
  const Eigen::Vector3d lips(0.70, 0.26, 0.28);
  const Eigen::Vector3d brow(0.28, 0.19, 0.14);
  const Eigen::Vector3d eye(0.22, 0.18, 0.18);
  const double w = front_weight(d);
  const double x = d.x(), y = d.y();
  const double w_lips = w * gauss2(x, y - 0.44, 0.20, 0.08);
  const double w_brow = w * gauss2(std::abs(x) - 0.30, y + 0.36, 0.18, 0.07);
  const double w_eye = w * gauss2(std::abs(x) - 0.32, y + 0.17, 0.11, 0.08);
  Eigen::Vector3d c = skin;
  c += w_lips * (lips - skin) + w_brow * (brow - skin) + w_eye * (eye - skin);
  return c;
}

struct SmoothField {
  std::vector<Eigen::Vector3d> centers;
  std::vector<double> widths;
  std::vector<Eigen::Vector3d> weights;

  Eigen::Vector3d operator()(const Eigen::Vector3d& d) const {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    for (std::size_t m = 0; m < centers.size(); ++m) {
      const double s = widths[m];
      v += weights[m] * std::exp(-(d - centers[m]).squaredNorm() / (2 * s * s));
    }
    return v;
  }
};

Eigen::Vector3d random_direction(std::mt19937_64& rng, bool front_biased) {
  std::normal_distribution<double> normal;
  Eigen::Vector3d v(normal(rng), normal(rng), normal(rng));
  if (front_biased) v.z() = -std::abs(v.z()) - 1.0;
  return v.normalized();
}

SmoothField random_field(std::mt19937_64& rng, bool front_biased, int terms) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> width(0.22, 0.6);
  SmoothField f;
  for (int m = 0; m < terms; ++m) {
    f.centers.push_back(random_direction(rng, front_biased));
    f.widths.push_back(width(rng));
    f.weights.emplace_back(normal(rng), normal(rng), normal(rng));
  }
  return f;
}

// Orthonormal smooth columns, scaled so that 3·σ_k·max|column entry block|
// stays below `limit` and σ_k decays by kSyntheticSigmaDecay.
Eigen::MatrixXd scaled_basis(std::mt19937_64& rng, const std::vector<Eigen::Vector3d>& dirs, int cols,
                             bool front_only, double limit) {
  const auto n = static_cast<Eigen::Index>(dirs.size());
  Eigen::MatrixXd raw(3 * n, cols);
  for (int k = 0; k < cols; ++k) {
    const SmoothField field = random_field(rng, front_only, 8);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Vector3d v = field(dirs[i]);
      if (front_only) v *= front_weight(dirs[i]) + 0.02;
      raw.block<3, 1>(3 * i, k) = v;
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(3 * n, cols);
  // Largest per-vertex offset of each unit column, weighted by the decay.
  double worst = 0.0;
  for (int k = 0; k < cols; ++k) {
    double col_max = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) col_max = std::max(col_max, q.block<3, 1>(3 * i, k).norm());
    worst = std::max(worst, col_max * std::pow(kSyntheticSigmaDecay, k));
  }
  const double sigma1 = 0.9 * limit / (3.0 * worst);
  for (int k = 0; k < cols; ++k) q.col(k) *= sigma1 * std::pow(kSyntheticSigmaDecay, k);
  return q.cast<float>().cast<double>();
}

std::vector<std::uint32_t> pick_landmarks(std::mt19937_64& rng, const std::vector<Eigen::Vector3d>& dirs,
                                          const Points3& pos) {
  const auto n = static_cast<std::uint32_t>(dirs.size());
  std::vector<std::uint32_t> order(n);
  for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return dirs[a].z() < dirs[b].z(); });
  std::vector<std::uint32_t> candidates;
  for (auto i : order) {
    const bool frontal = dirs[i].z() < -0.55 && std::abs(dirs[i].y()) < 0.7;
    if (frontal || candidates.size() < kLandmarkCount) candidates.push_back(i);
  }
  // Farthest-point sampling from a seeded start.
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  std::vector<std::uint32_t> chosen = {candidates[pick(rng)]};
  std::vector<double> dist(candidates.size(), std::numeric_limits<double>::infinity());
  while (chosen.size() < kLandmarkCount) {
    const Eigen::RowVector3d last = pos.row(chosen.back());
    std::size_t best = 0;
    double best_d = -1;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      dist[c] = std::min(dist[c], (pos.row(candidates[c]) - last).squaredNorm());
      if (dist[c] > best_d) best_d = dist[c], best = c;
    }
    chosen.push_back(candidates[best]);
  }
  return chosen;
}

}  // namespace

FaceModel generate_synthetic_model(std::uint64_t seed, std::uint32_t n_vertices) {
  if (n_vertices < kMinSyntheticVertices) {
    throw_invalid_argument("synthetic model needs at least " + std::to_string(kMinSyntheticVertices) +
                           " vertices (46 distinct landmarks), got " + std::to_string(n_vertices));
  }
  std::mt19937_64 rng(seed);
  const auto dirs = fibonacci_sphere(n_vertices);

  FaceModelData d;
  d.n_vertices = n_vertices;
  d.triangles = convex_hull(dirs);

  const Eigen::Vector3d radii(78.0, 100.0, 92.0);
  Points3 pos(n_vertices, 3);
  Points3 refl(n_vertices, 3);
  for (std::uint32_t i = 0; i < n_vertices; ++i) {
    const Eigen::Vector3d& u = dirs[i];
    const Eigen::Vector3d p = radii.cwiseProduct(u) + feature_displacement(u) * u;
    pos.row(i) = p.transpose();
    refl.row(i) = skin_tone(u).transpose();
  }
  // Low-amplitude seeded variation of the average tone.
  const SmoothField tone = random_field(rng, false, 6);
  for (std::uint32_t i = 0; i < n_vertices; ++i) {
    const Eigen::Vector3d v = 0.01 * tone(dirs[i]);
    refl.row(i) = (refl.row(i) + v.transpose()).cwiseMax(0.0).cwiseMin(1.0);
  }

  d.avg_shape = Eigen::Map<const Eigen::VectorXd>(pos.data(), 3 * n_vertices).cast<float>().cast<double>();
  d.avg_reflectance =
      Eigen::Map<const Eigen::VectorXd>(refl.data(), 3 * n_vertices).cast<float>().cast<double>();

  const double head_radius = radii.maxCoeff();
  d.shape_basis = scaled_basis(rng, dirs, kShapeDim, false, 0.15 * head_radius);
  d.expr_basis = scaled_basis(rng, dirs, kExprDim, true, 0.15 * head_radius);
  d.refl_basis = scaled_basis(rng, dirs, kReflDim, false, 0.15);
  d.landmark_indices = pick_landmarks(rng, dirs, pos);
  return FaceModel(std::move(d));
}

}  // namespace facecoder
