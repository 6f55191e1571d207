#pragma once

// Intermediate quantities of the forward pass, shared by the renderer, the
// Jacobian and the adjoint gradient so all three use one formula.

#include <array>
#include <vector>

#include "facecoder/face_model.hpp"
#include "facecoder/formation.hpp"
#include "facecoder/scene.hpp"

namespace facecoder::detail {

using ShRows = Eigen::Matrix<double, Eigen::Dynamic, kShBands, Eigen::RowMajor>;

struct ForwardState {
  Points3 positions;          // world-space V̂(α, δ)
  Points3 reflectance;        // R̂(β)
  Points3 face_cross;         // unnormalized triangle cross products
  Points3 normal_sum;         // one-ring sums m_i
  Eigen::VectorXd normal_len; // ‖m_i‖
  Points3 normals;            // world-space unit normals
  Eigen::Matrix3d rotation;
  std::array<Eigen::Matrix3d, 3> rotation_d;
  Eigen::Vector3d translation;
  Points3 cam;                // Tᵀ(v − t)
  Points3 cam_normals;        // Tᵀ n
  ShRows sh;                  // H_b(Tᵀ n)
  Points3 irradiance;         // Σ_b γ_b H_b per channel
  Points2 screen;
  Points3 color;
  std::vector<std::uint8_t> projectable;
  std::vector<std::uint8_t> visible_mask;
  std::vector<std::uint32_t> visible;
};

/// Evaluates geometry and reflectance from the code, then shades and projects.
ForwardState compute_forward_state(const FaceModel& model, const Camera& camera, const CodeVector& x);

/// Shading and projection from already evaluated geometry and reflectance.
void shade_and_project(const MeshTopology& topology, const Camera& camera, const CodeVector& x,
                       ForwardState& state);

RenderedFace to_rendered(const ForwardState& state);

}  // namespace facecoder::detail
