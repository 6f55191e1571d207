#include "facecoder/face_model.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <unordered_map>
#include <unordered_set>

#include "binary_io.hpp"
#include "facecoder/errors.hpp"

namespace facecoder {

// ---------------------------------------------------------------------------
// CodeVector

Eigen::VectorXd CodeVector::flatten() const {
  Eigen::VectorXd flat(kCodeDim);
  flat.segment<kShapeDim>(kAlphaOffset) = alpha;
  flat.segment<kExprDim>(kDeltaOffset) = delta;
  flat.segment<kReflDim>(kBetaOffset) = beta;
  flat.segment<3>(kRotationOffset) = rotation;
  flat.segment<3>(kTranslationOffset) = translation;
  flat.segment<kGammaDim>(kGammaOffset) = gamma;
  return flat;
}

CodeVector CodeVector::unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != kCodeDim) {
    throw_invalid_argument("code vector must have " + std::to_string(kCodeDim) + " entries, got " +
                           std::to_string(flat.size()));
  }
  CodeVector x;
  x.alpha = flat.segment<kShapeDim>(kAlphaOffset);
  x.delta = flat.segment<kExprDim>(kDeltaOffset);
  x.beta = flat.segment<kReflDim>(kBetaOffset);
  x.rotation = flat.segment<3>(kRotationOffset);
  x.translation = flat.segment<3>(kTranslationOffset);
  x.gamma = flat.segment<kGammaDim>(kGammaOffset);
  return x;
}

bool CodeVector::operator==(const CodeVector& other) const {
  return alpha == other.alpha && delta == other.delta && beta == other.beta &&
         rotation == other.rotation && translation == other.translation && gamma == other.gamma;
}

// ---------------------------------------------------------------------------
// MeshTopology

MeshTopology::MeshTopology(std::uint32_t n_vertices, std::vector<Triangle> triangles)
    : n_vertices_(n_vertices), triangles_(std::move(triangles)) {
  offsets_.assign(n_vertices_ + 1, 0);
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    for (auto v : triangles_[t]) {
      if (v >= n_vertices_) {
        throw Error(ErrorKind::InvariantViolation,
                    "triangle " + std::to_string(t) + " references vertex " + std::to_string(v) +
                        " of " + std::to_string(n_vertices_),
                    "triangles");
      }
      ++offsets_[v + 1];
    }
  }
  for (std::uint32_t v = 0; v < n_vertices_; ++v) offsets_[v + 1] += offsets_[v];
  incident_.resize(offsets_.back());
  std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::uint32_t t = 0; t < triangles_.size(); ++t) {
    for (auto v : triangles_[t]) incident_[fill[v]++] = t;
  }
}

bool MeshTopology::is_edge_manifold() const {
  auto key = [](std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };
  std::unordered_set<std::uint64_t> directed;
  std::unordered_map<std::uint64_t, int> undirected;
  directed.reserve(triangles_.size() * 3);
  undirected.reserve(triangles_.size() * 3);
  for (const auto& tri : triangles_) {
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) return false;
    for (int e = 0; e < 3; ++e) {
      std::uint32_t a = tri[e], b = tri[(e + 1) % 3];
      if (!directed.insert(key(a, b)).second) return false;
      if (++undirected[key(std::min(a, b), std::max(a, b))] > 2) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// FaceModel

bool basis_is_scaled_orthogonal(const Eigen::MatrixXd& basis, double tolerance) {
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  const Eigen::VectorXd sigma = gram.diagonal().cwiseSqrt();
  for (Eigen::Index j = 0; j < gram.cols(); ++j) {
    if (!(sigma(j) > 0.0) || !std::isfinite(sigma(j))) return false;
    for (Eigen::Index k = 0; k < j; ++k) {
      if (std::abs(gram(j, k)) > tolerance * sigma(j) * sigma(k)) return false;
    }
  }
  return true;
}

namespace {

void check(bool ok, const std::string& message, const char* section) {
  if (!ok) throw Error(ErrorKind::InvariantViolation, message, section);
}

void check_dims(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* section) {
  check(m.rows() == rows && m.cols() == cols,
        "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
            std::to_string(m.rows()) + "x" + std::to_string(m.cols()),
        section);
  check(m.allFinite(), "non-finite entries", section);
}

}  // namespace

FaceModel::FaceModel(FaceModelData data) : data_(std::move(data)) {
  const Eigen::Index n3 = 3 * static_cast<Eigen::Index>(data_.n_vertices);
  check(data_.n_vertices >= 3, "model needs at least 3 vertices", "header");
  check_dims(data_.avg_shape, n3, 1, "avg_shape");
  check_dims(data_.shape_basis, n3, kShapeDim, "shape_basis");
  check_dims(data_.expr_basis, n3, kExprDim, "expr_basis");
  check_dims(data_.avg_reflectance, n3, 1, "avg_reflectance");
  check_dims(data_.refl_basis, n3, kReflDim, "refl_basis");
  check(!data_.triangles.empty(), "mesh has no triangles", "triangles");
  topology_ = MeshTopology(data_.n_vertices, data_.triangles);
  check(topology_.is_edge_manifold(), "mesh is not edge-manifold", "triangles");
  check(basis_is_scaled_orthogonal(data_.shape_basis), "basis is not scaled-orthogonal", "shape_basis");
  check(basis_is_scaled_orthogonal(data_.expr_basis), "basis is not scaled-orthogonal", "expr_basis");
  check(basis_is_scaled_orthogonal(data_.refl_basis), "basis is not scaled-orthogonal", "refl_basis");
  check(data_.landmark_indices.size() == kLandmarkCount,
        "expected 46 landmark indices, got " + std::to_string(data_.landmark_indices.size()),
        "landmarks");
  std::unordered_set<std::uint32_t> seen;
  for (auto k : data_.landmark_indices) {
    check(k < data_.n_vertices, "landmark index " + std::to_string(k) + " out of range", "landmarks");
    check(seen.insert(k).second, "duplicate landmark index " + std::to_string(k), "landmarks");
  }
}

Eigen::VectorXd FaceModel::shape_sigma() const { return data_.shape_basis.colwise().norm().transpose(); }
Eigen::VectorXd FaceModel::expr_sigma() const { return data_.expr_basis.colwise().norm().transpose(); }
Eigen::VectorXd FaceModel::refl_sigma() const { return data_.refl_basis.colwise().norm().transpose(); }

Eigen::Vector3d FaceModel::bounding_center() const {
  Eigen::Map<const Points3> p(data_.avg_shape.data(), data_.n_vertices, 3);
  return 0.5 * (p.colwise().minCoeff() + p.colwise().maxCoeff()).transpose();
}

double FaceModel::bounding_radius() const {
  Eigen::Map<const Points3> p(data_.avg_shape.data(), data_.n_vertices, 3);
  const Eigen::RowVector3d c = bounding_center().transpose();
  return (p.rowwise() - c).rowwise().norm().maxCoeff();
}

bool FaceModel::operator==(const FaceModel& other) const {
  const auto& a = data_;
  const auto& b = other.data_;
  return a.n_vertices == b.n_vertices && a.triangles == b.triangles && a.avg_shape == b.avg_shape &&
         a.shape_basis == b.shape_basis && a.expr_basis == b.expr_basis &&
         a.avg_reflectance == b.avg_reflectance && a.refl_basis == b.refl_basis &&
         a.landmark_indices == b.landmark_indices;
}

// ---------------------------------------------------------------------------
// Evaluation

Points3 evaluate_shape(const FaceModel& model, const Eigen::Ref<const Eigen::VectorXd>& alpha,
                       const Eigen::Ref<const Eigen::VectorXd>& delta) {
  if (alpha.size() != kShapeDim || delta.size() != kExprDim) {
    throw_invalid_argument("evaluate_shape expects alpha[80] and delta[64], got alpha[" +
                           std::to_string(alpha.size()) + "] delta[" + std::to_string(delta.size()) + "]");
  }
  Eigen::VectorXd flat = model.avg_shape();
  flat.noalias() += model.shape_basis() * alpha;
  flat.noalias() += model.expr_basis() * delta;
  return Eigen::Map<const Points3>(flat.data(), model.n_vertices(), 3);
}

Points3 evaluate_reflectance(const FaceModel& model, const Eigen::Ref<const Eigen::VectorXd>& beta) {
  if (beta.size() != kReflDim) {
    throw_invalid_argument("evaluate_reflectance expects beta[80], got beta[" +
                           std::to_string(beta.size()) + "]");
  }
  Eigen::VectorXd flat = model.avg_reflectance();
  flat.noalias() += model.refl_basis() * beta;
  return Eigen::Map<const Points3>(flat.data(), model.n_vertices(), 3);
}

Points3 vertex_normals(const MeshTopology& topology, const Points3& positions) {
  const auto n = topology.n_vertices();
  if (positions.rows() != static_cast<Eigen::Index>(n)) {
    throw_invalid_argument("vertex_normals: position count does not match the mesh");
  }
  const auto& tris = topology.triangles();
  Points3 face(tris.size(), 3);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const Eigen::Vector3d a = positions.row(tris[t][0]);
    const Eigen::Vector3d b = positions.row(tris[t][1]);
    const Eigen::Vector3d c = positions.row(tris[t][2]);
    face.row(t) = (b - a).cross(c - a).transpose();
  }
  Points3 normals(n, 3);
  for (std::uint32_t v = 0; v < n; ++v) {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    double scale = 0.0;
    for (auto t : topology.incident(v)) {
      sum += face.row(t).transpose();
      scale += face.row(t).norm();
    }
    const double len = sum.norm();
    if (!(len > 1e-12 * scale) || !std::isfinite(len)) {
      throw Error(ErrorKind::DegenerateGeometry,
                  "accumulated normal of vertex " + std::to_string(v) + " vanishes", "normals", v);
    }
    normals.row(v) = (sum / len).transpose();
  }
  return normals;
}

Points3 vertex_normals(const FaceModel& model, const Points3& positions) {
  return vertex_normals(model.topology(), positions);
}

// ---------------------------------------------------------------------------
// MFM1

std::vector<std::uint8_t> encode_model(const FaceModel& model) {
  const auto& d = model.data();
  detail::ByteWriter w;
  w.magic("MFM1");
  w.u32(d.n_vertices);
  w.u32(static_cast<std::uint32_t>(d.triangles.size()));
  w.u32(kShapeDim);
  w.u32(kExprDim);
  w.u32(kReflDim);
  w.f32_array(d.avg_shape.reshaped());
  w.f32_array(d.shape_basis.reshaped());  // column-major
  w.f32_array(d.expr_basis.reshaped());
  w.f32_array(d.avg_reflectance.reshaped());
  w.f32_array(d.refl_basis.reshaped());
  for (const auto& tri : d.triangles)
    for (auto v : tri) w.u32(v);
  for (auto k : d.landmark_indices) w.u32(k);
  return w.take();
}

namespace {

Eigen::MatrixXd read_block(detail::ByteReader& r, Eigen::Index rows, Eigen::Index cols, const char* section) {
  r.require(static_cast<std::size_t>(rows * cols) * 4, section);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, c) = r.f32(section);
  return m;
}

}  // namespace

FaceModel decode_model(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("MFM1");
  FaceModelData d;
  d.n_vertices = r.u32("header");
  const std::uint32_t n_tris = r.u32("header");
  const std::uint32_t dims[3] = {r.u32("header"), r.u32("header"), r.u32("header")};
  if (dims[0] != kShapeDim || dims[1] != kExprDim || dims[2] != kReflDim) {
    throw Error(ErrorKind::InvariantViolation,
                "basis dimensions must be (80,64,80), got (" + std::to_string(dims[0]) + "," +
                    std::to_string(dims[1]) + "," + std::to_string(dims[2]) + ")",
                "header");
  }
  const Eigen::Index n3 = 3 * static_cast<Eigen::Index>(d.n_vertices);
  // Reject absurd headers before allocating.
  const std::uint64_t expected = 4ull * static_cast<std::uint64_t>(n3) * (2 + kShapeDim + kExprDim + kReflDim) +
                                 12ull * n_tris + 4ull * kLandmarkCount;
  if (expected > r.remaining() + (1ull << 40)) {
    throw Error(ErrorKind::InvariantViolation, "header sizes are implausible", "header");
  }
  d.avg_shape = read_block(r, n3, 1, "avg_shape");
  d.shape_basis = read_block(r, n3, kShapeDim, "shape_basis");
  d.expr_basis = read_block(r, n3, kExprDim, "expr_basis");
  d.avg_reflectance = read_block(r, n3, 1, "avg_reflectance");
  d.refl_basis = read_block(r, n3, kReflDim, "refl_basis");
  r.require(12ull * n_tris, "triangles");
  d.triangles.resize(n_tris);
  for (auto& tri : d.triangles)
    for (auto& v : tri) v = r.u32("triangles");
  r.require(4ull * kLandmarkCount, "landmarks");
  d.landmark_indices.resize(kLandmarkCount);
  for (auto& k : d.landmark_indices) k = r.u32("landmarks");
  if (r.remaining() != 0) {
    throw Error(ErrorKind::InvariantViolation,
                std::to_string(r.remaining()) + " trailing bytes after landmark section", "trailer");
  }
  return FaceModel(std::move(d));
}

void save_model(const FaceModel& model, const std::filesystem::path& path) {
  detail::write_file_bytes(path.string(), encode_model(model));
}

FaceModel load_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file_bytes(path.string()));
}

}  // namespace facecoder
