#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace facecoder {

inline constexpr int kShapeDim = 80;
inline constexpr int kExprDim = 64;
inline constexpr int kReflDim = 80;
inline constexpr int kShBands = 9;
inline constexpr int kGammaDim = 3 * kShBands;
inline constexpr int kLandmarkCount = 46;

// Offsets of each block inside the flattened 257-vector.
inline constexpr int kAlphaOffset = 0;
inline constexpr int kDeltaOffset = kAlphaOffset + kShapeDim;
inline constexpr int kBetaOffset = kDeltaOffset + kExprDim;
inline constexpr int kRotationOffset = kBetaOffset + kReflDim;
inline constexpr int kTranslationOffset = kRotationOffset + 3;
inline constexpr int kGammaOffset = kTranslationOffset + 3;
inline constexpr int kCodeDim = kGammaOffset + kGammaDim;
static_assert(kCodeDim == 257);

using Triangle = std::array<std::uint32_t, 3>;

/// N×3 row-major point/color arrays. Row i is vertex i.
using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// Semantic code vector: shape, expression, reflectance, pose, illumination.
///
/// `gamma` stores 9 SH coefficients for each color channel, coefficient-major:
/// gamma[3 * b + c] is coefficient b of channel c. Euler angles are stored as
/// given; no wrapping is applied.
struct CodeVector {
  Eigen::Matrix<double, kShapeDim, 1> alpha = Eigen::Matrix<double, kShapeDim, 1>::Zero();
  Eigen::Matrix<double, kExprDim, 1> delta = Eigen::Matrix<double, kExprDim, 1>::Zero();
  Eigen::Matrix<double, kReflDim, 1> beta = Eigen::Matrix<double, kReflDim, 1>::Zero();
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Matrix<double, kGammaDim, 1> gamma = Eigen::Matrix<double, kGammaDim, 1>::Zero();

  Eigen::VectorXd flatten() const;
  static CodeVector unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat);

  bool operator==(const CodeVector& other) const;
};

/// Triangle connectivity with per-vertex incident-triangle lists (CSR).
class MeshTopology {
 public:
  MeshTopology() = default;
  MeshTopology(std::uint32_t n_vertices, std::vector<Triangle> triangles);

  std::uint32_t n_vertices() const { return n_vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }

  /// Indices of the triangles incident to vertex v (its one-ring).
  std::span<const std::uint32_t> incident(std::uint32_t v) const {
    return {incident_.data() + offsets_[v], incident_.data() + offsets_[v + 1]};
  }

  /// True when every undirected edge borders at most two triangles and every
  /// directed edge appears at most once (consistent orientation).
  bool is_edge_manifold() const;

 private:
  std::uint32_t n_vertices_ = 0;
  std::vector<Triangle> triangles_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> incident_;
};

/// Raw model arrays. Positions are millimeters, reflectance linear RGB.
/// Per-vertex data is interleaved: entry 3*i + k is component k of vertex i.
struct FaceModelData {
  std::uint32_t n_vertices = 0;
  std::vector<Triangle> triangles;
  Eigen::VectorXd avg_shape;
  Eigen::MatrixXd shape_basis;
  Eigen::MatrixXd expr_basis;
  Eigen::VectorXd avg_reflectance;
  Eigen::MatrixXd refl_basis;
  std::vector<std::uint32_t> landmark_indices;
};

/// Linear face model with validated invariants. Immutable after construction.
class FaceModel {
 public:
  /// Validates every invariant; throws Error(InvariantViolation) on failure.
  explicit FaceModel(FaceModelData data);

  std::uint32_t n_vertices() const { return data_.n_vertices; }
  const MeshTopology& topology() const { return topology_; }
  const std::vector<Triangle>& triangles() const { return topology_.triangles(); }
  const Eigen::VectorXd& avg_shape() const { return data_.avg_shape; }
  const Eigen::MatrixXd& shape_basis() const { return data_.shape_basis; }
  const Eigen::MatrixXd& expr_basis() const { return data_.expr_basis; }
  const Eigen::VectorXd& avg_reflectance() const { return data_.avg_reflectance; }
  const Eigen::MatrixXd& refl_basis() const { return data_.refl_basis; }
  const std::vector<std::uint32_t>& landmark_indices() const { return data_.landmark_indices; }
  const FaceModelData& data() const { return data_; }

  /// Per-column standard deviations recovered from the basis norms.
  Eigen::VectorXd shape_sigma() const;
  Eigen::VectorXd expr_sigma() const;
  Eigen::VectorXd refl_sigma() const;

  /// Center of the axis-aligned bounding box of the average shape and the
  /// radius of the sphere around it that contains every average vertex.
  Eigen::Vector3d bounding_center() const;
  double bounding_radius() const;

  bool operator==(const FaceModel& other) const;

 private:
  FaceModelData data_;
  MeshTopology topology_;
};

/// Checks EᵀE = diag(σ²): diagonal entries against the squared column norm
/// and off-diagonal entries within `tolerance · σ_j · σ_k`.
bool basis_is_scaled_orthogonal(const Eigen::MatrixXd& basis, double tolerance = 1e-5);

/// A_s + E_s α + E_e δ as an N×3 array.
Points3 evaluate_shape(const FaceModel& model, const Eigen::Ref<const Eigen::VectorXd>& alpha,
                       const Eigen::Ref<const Eigen::VectorXd>& delta);

/// A_r + E_r β as an N×3 array. No clamping.
Points3 evaluate_reflectance(const FaceModel& model, const Eigen::Ref<const Eigen::VectorXd>& beta);

/// Normalized sum of unnormalized incident-triangle cross products.
/// Throws Error(DegenerateGeometry) naming the first vertex whose sum vanishes.
Points3 vertex_normals(const MeshTopology& topology, const Points3& positions);
Points3 vertex_normals(const FaceModel& model, const Points3& positions);

/// Deterministic license-free stand-in for a scanned face model.
/// Requires n_vertices >= kMinSyntheticVertices.
inline constexpr std::uint32_t kMinSyntheticVertices = 46;
FaceModel generate_synthetic_model(std::uint64_t seed, std::uint32_t n_vertices);

/// Ratio between consecutive σ_k in synthetic bases.
inline constexpr double kSyntheticSigmaDecay = 0.9;

// MFM1 binary format; see docs/formats.md.
void save_model(const FaceModel& model, const std::filesystem::path& path);
FaceModel load_model(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_model(const FaceModel& model);
FaceModel decode_model(std::span<const std::uint8_t> bytes);

}  // namespace facecoder
