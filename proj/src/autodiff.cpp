#include "facecoder/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "facecoder/errors.hpp"
#include "forward_state.hpp"

namespace facecoder {
namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

// ∂u/∂p for the perspective divide.
Eigen::Matrix<double, 2, 3> projection_jacobian(double focal, const Eigen::Vector3d& p) {
  const double iz = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> j;
  j << focal * iz, 0.0, -focal * p.x() * iz * iz, 0.0, focal * iz, -focal * p.y() * iz * iz;
  return j;
}

// Γ(b, c) = γ[3b + c].
Eigen::Matrix<double, kShBands, 3> gamma_matrix(const CodeVector& x) {
  return Eigen::Map<const Eigen::Matrix<double, kShBands, 3, Eigen::RowMajor>>(x.gamma.data());
}

// ∂c/∂n̂ for one vertex: diag(r)·Γᵀ·∇H(n̂).
Eigen::Matrix3d color_normal_jacobian(const Eigen::Vector3d& reflectance, const Eigen::Matrix<double, kShBands, 3>& gm,
                                      const Eigen::Vector3d& cam_normal) {
  return reflectance.asDiagonal() * (gm.transpose() * sh_basis_gradient(cam_normal));
}

// ∂n/∂m for n = m/‖m‖.
Eigen::Matrix3d normalize_jacobian(const Eigen::Vector3d& n, double len) {
  return (Eigen::Matrix3d::Identity() - n * n.transpose()) / len;
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward-mode blocks

JacobianResult jacobian(const FaceModel& model, const Camera& camera, const CodeVector& x,
                        std::span<const std::uint32_t> vertices) {
  camera.validate();
  const detail::ForwardState s = detail::compute_forward_state(model, camera, x);
  const Eigen::Matrix3d rt = s.rotation.transpose();
  const auto gm = gamma_matrix(x);
  const auto& topo = model.topology();
  const auto& tris = topo.triangles();
  const auto& es = model.shape_basis();
  const auto& ee = model.expr_basis();
  const auto& er = model.refl_basis();

  JacobianResult out;
  out.blocks.reserve(vertices.size());
  std::vector<std::pair<std::uint32_t, Eigen::Matrix3d>> ring;
  for (auto i : vertices) {
    if (i >= model.n_vertices()) throw_invalid_argument("jacobian: vertex index out of range");
    const Eigen::Vector3d p = s.cam.row(i);
    if (!s.projectable[i] || p.z() < kZNear + kNearPlaneGuard) {
      out.excluded_near_plane.push_back(i);
      continue;
    }
    JacobianBlock blk;
    blk.vertex = i;
    auto& b = blk.matrix;
    b.setZero();

    const Eigen::Vector3d v = s.positions.row(i);
    const Eigen::Vector3d n = s.normals.row(i);
    const Eigen::Vector3d nc = s.cam_normals.row(i);
    const Eigen::Vector3d r = s.reflectance.row(i);
    const Eigen::Vector3d e = s.irradiance.row(i);

    // Screen position.
    const Eigen::Matrix<double, 2, 3> proj = projection_jacobian(camera.focal_length, p);
    const Eigen::Matrix<double, 2, 3> du_dv = proj * rt;
    b.block<2, kShapeDim>(0, kAlphaOffset) = du_dv * es.middleRows<3>(3 * i);
    b.block<2, kExprDim>(0, kDeltaOffset) = du_dv * ee.middleRows<3>(3 * i);
    for (int j = 0; j < 3; ++j) {
      b.block<2, 1>(0, kRotationOffset + j) = proj * (s.rotation_d[j].transpose() * (v - s.translation));
    }
    b.block<2, 3>(0, kTranslationOffset) = -du_dv;

    // Color: reflectance and illumination.
    for (int c = 0; c < 3; ++c) {
      b.block<1, kReflDim>(2 + c, kBetaOffset) = e(c) * er.row(3 * i + c);
      for (int k = 0; k < kShBands; ++k) b(2 + c, kGammaOffset + 3 * k + c) = r(c) * s.sh(i, k);
    }

    // Color through the camera-space normal.
    const Eigen::Matrix3d dc_dn = color_normal_jacobian(r, gm, nc);
    for (int j = 0; j < 3; ++j) {
      b.block<3, 1>(2, kRotationOffset + j) = dc_dn * (s.rotation_d[j].transpose() * n);
    }
    const Eigen::Matrix3d dc_dm = dc_dn * rt * normalize_jacobian(n, s.normal_len(i));

    // ∂m_i/∂v_k summed per one-ring vertex k.
    ring.clear();
    auto add = [&](std::uint32_t k, const Eigen::Matrix3d& m) {
      for (auto& [idx, acc] : ring) {
        if (idx == k) {
          acc += m;
          return;
        }
      }
      ring.emplace_back(k, m);
    };
    for (auto t : topo.incident(i)) {
      const auto& tri = tris[t];
      const Eigen::Vector3d a = s.positions.row(tri[0]);
      const Eigen::Vector3d bb = s.positions.row(tri[1]);
      const Eigen::Vector3d c = s.positions.row(tri[2]);
      add(tri[0], skew(c - bb));
      add(tri[1], skew(a - c));
      add(tri[2], skew(bb - a));
    }
    for (const auto& [k, dm_dv] : ring) {
      const Eigen::Matrix3d w = dc_dm * dm_dv;
      b.block<3, kShapeDim>(2, kAlphaOffset).noalias() += w * es.middleRows<3>(3 * k);
      b.block<3, kExprDim>(2, kDeltaOffset).noalias() += w * ee.middleRows<3>(3 * k);
    }
    out.blocks.push_back(std::move(blk));
  }
  return out;
}

JacobianResult jacobian(const FaceModel& model, const Camera& camera, const CodeVector& x) {
  const RenderedFace rendered = forward(model, camera, x);
  return jacobian(model, camera, x, rendered.visible);
}

// ---------------------------------------------------------------------------
// Reverse mode

OutputAdjoints loss_output_adjoints(const RenderedFace& rendered, const Image& image, const LandmarkSet* landmarks,
                                    const LossWeights& weights) {
  const auto n = static_cast<Eigen::Index>(rendered.n_vertices());
  OutputAdjoints adj{Points2::Zero(n, 2), Points3::Zero(n, 3)};
  if (!rendered.visible.empty() && weights.w_photo != 0.0) {
    const double denom = weights.normalization == PhotoNormalization::TotalVertices
                             ? static_cast<double>(n)
                             : static_cast<double>(rendered.visible.size());
    const double scale = weights.w_photo / denom;
    const double eps2 = weights.l21_epsilon * weights.l21_epsilon;
    for (auto i : rendered.visible) {
      const auto sample = sample_image(image, rendered.screen_pos.row(i).transpose());
      if (!sample) throw_invalid_argument("visible vertex outside the image; camera and image disagree");
      const Eigen::Vector3d res = sample->color - rendered.color.row(i).transpose();
      const double len = std::sqrt(res.squaredNorm() + eps2);
      if (len == 0.0) continue;
      adj.dc.row(i) = (-scale / len) * res.transpose();
      adj.du.row(i) = (scale / len) * (res.transpose() * sample->gradient);
    }
  }
  if (landmarks && weights.w_land != 0) {
    for (const auto& l : *landmarks) {
      const Eigen::Vector2d u = rendered.screen_pos.row(l.vertex);
      if (!u.allFinite()) continue;
      adj.du.row(l.vertex) += (2.0 * weights.w_land * l.confidence) * (u - l.position).transpose();
    }
  }
  return adj;
}

Eigen::VectorXd backpropagate_outputs(const FaceModel& model, const Camera& camera, const CodeVector& x,
                                      const OutputAdjoints& adjoints) {
  camera.validate();
  const detail::ForwardState s = detail::compute_forward_state(model, camera, x);
  const auto nv = model.n_vertices();
  const auto gm = gamma_matrix(x);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(kCodeDim);
  Eigen::VectorXd adj_v = Eigen::VectorXd::Zero(3 * nv);
  Eigen::VectorXd adj_r = Eigen::VectorXd::Zero(3 * nv);
  Points3 adj_m = Points3::Zero(nv, 3);
  Eigen::Vector3d grad_t = Eigen::Vector3d::Zero();
  Eigen::Vector3d grad_rot = Eigen::Vector3d::Zero();
  Eigen::Matrix<double, kShBands, 3> grad_gamma = Eigen::Matrix<double, kShBands, 3>::Zero();
  bool any_normal = false;

  for (std::uint32_t i = 0; i < nv; ++i) {
    const Eigen::Vector2d gu = adjoints.du.row(i);
    const bool color_active = s.visible_mask[i] != 0;
    const Eigen::Vector3d gc = color_active ? Eigen::Vector3d(adjoints.dc.row(i)) : Eigen::Vector3d::Zero();
    if (gu.isZero(0.0) && gc.isZero(0.0)) continue;
    const Eigen::Vector3d v = s.positions.row(i);
    if (!gu.isZero(0.0)) {
      if (!s.projectable[i]) continue;
      const Eigen::Vector3d p = s.cam.row(i);
      const Eigen::Vector3d adj_p = projection_jacobian(camera.focal_length, p).transpose() * gu;
      const Eigen::Vector3d world = s.rotation * adj_p;
      adj_v.segment<3>(3 * i) += world;
      grad_t -= world;
      for (int j = 0; j < 3; ++j) grad_rot(j) += adj_p.dot(s.rotation_d[j].transpose() * (v - s.translation));
    }
    if (!gc.isZero(0.0)) {
      const Eigen::Vector3d r = s.reflectance.row(i);
      const Eigen::Vector3d e = s.irradiance.row(i);
      const Eigen::Vector3d n = s.normals.row(i);
      const Eigen::Vector3d nc = s.cam_normals.row(i);
      const Eigen::Vector3d gcr = gc.cwiseProduct(r);
      grad_gamma.noalias() += s.sh.row(i).transpose() * gcr.transpose();
      adj_r.segment<3>(3 * i) = gc.cwiseProduct(e);
      const Eigen::Vector3d adj_nc = color_normal_jacobian(r, gm, nc).transpose() * gc;
      for (int j = 0; j < 3; ++j) grad_rot(j) += adj_nc.dot(s.rotation_d[j].transpose() * n);
      adj_m.row(i) = (normalize_jacobian(n, s.normal_len(i)) * (s.rotation * adj_nc)).transpose();
      any_normal = true;
    }
  }

  if (any_normal) {
    for (const auto& tri : model.triangles()) {
      const Eigen::Vector3d adj_f =
          (adj_m.row(tri[0]) + adj_m.row(tri[1]) + adj_m.row(tri[2])).transpose();
      if (adj_f.isZero(0.0)) continue;
      const Eigen::Vector3d a = s.positions.row(tri[0]);
      const Eigen::Vector3d b = s.positions.row(tri[1]);
      const Eigen::Vector3d c = s.positions.row(tri[2]);
      adj_v.segment<3>(3 * tri[0]) += adj_f.cross(c - b);
      adj_v.segment<3>(3 * tri[1]) += adj_f.cross(a - c);
      adj_v.segment<3>(3 * tri[2]) += adj_f.cross(b - a);
    }
  }

  grad.segment<kShapeDim>(kAlphaOffset).noalias() = model.shape_basis().transpose() * adj_v;
  grad.segment<kExprDim>(kDeltaOffset).noalias() = model.expr_basis().transpose() * adj_v;
  grad.segment<kReflDim>(kBetaOffset).noalias() = model.refl_basis().transpose() * adj_r;
  grad.segment<3>(kRotationOffset) = grad_rot;
  grad.segment<3>(kTranslationOffset) = grad_t;
  grad.segment<kGammaDim>(kGammaOffset) =
      Eigen::Map<const Eigen::Matrix<double, kGammaDim, 1>>(
          Eigen::Matrix<double, kShBands, 3, Eigen::RowMajor>(grad_gamma).data());
  return grad;
}

Eigen::VectorXd reg_gradient(const CodeVector& x, const LossWeights& weights) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(kCodeDim);
  g.segment<kShapeDim>(kAlphaOffset) = 2.0 * weights.w_reg * x.alpha;
  g.segment<kExprDim>(kDeltaOffset) = 2.0 * weights.w_reg * weights.w_delta * x.delta;
  g.segment<kReflDim>(kBetaOffset) = 2.0 * weights.w_reg * weights.w_beta * x.beta;
  return g;
}

LossGradient loss_gradient(const FaceModel& model, const Camera& camera, const CodeVector& x, const Image& image,
                           const LandmarkSet* landmarks, const LossWeights& weights) {
  weights.validate();
  if (weights.w_land == 1 && landmarks == nullptr) throw_invalid_argument("w_land = 1 requires landmarks");
  if (image.width() != camera.width || image.height() != camera.height) {
    throw_invalid_argument("image size does not match the camera");
  }
  if (landmarks) validate_landmarks(*landmarks, model.n_vertices());
  const RenderedFace rendered = forward(model, camera, x);
  LossGradient out;
  out.loss = total_loss(rendered, x, image, landmarks, weights);
  const OutputAdjoints adj = loss_output_adjoints(rendered, image, landmarks, weights);
  out.gradient = backpropagate_outputs(model, camera, x, adj) + reg_gradient(x, weights);
  if (!out.gradient.allFinite()) throw Error(ErrorKind::Numerical, "non-finite loss gradient");
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

double fd_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step) {
  if (!(step > 0.0)) throw_invalid_argument("finite-difference step must be > 0");
  Eigen::VectorXd probe = x;
  Eigen::MatrixXd jac;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe(k) = x(k) + step;
    const Eigen::VectorXd plus = f(probe);
    probe(k) = x(k) - step;
    const Eigen::VectorXd minus = f(probe);
    probe(k) = x(k);
    if (k == 0) jac.resize(plus.size(), x.size());
    jac.col(k) = (plus - minus) / (2.0 * step);
  }
  return jac;
}

FdReport compare_entries(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw_invalid_argument("fd_check: analytic and numeric shapes differ");
  }
  FdReport rep;
  double sum = 0.0;
  for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
    for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
      const double e = fd_relative_error(analytic(r, c), numeric(r, c));
      sum += e;
      if (e > rep.max_rel_error || rep.worst_row < 0) {
        rep.max_rel_error = e;
        rep.worst_row = r;
        rep.worst_param = c;
        rep.analytic_at_worst = analytic(r, c);
        rep.numeric_at_worst = numeric(r, c);
      }
    }
  }
  rep.entries = static_cast<std::size_t>(analytic.size());
  rep.mean_rel_error = rep.entries ? sum / static_cast<double>(rep.entries) : 0.0;
  return rep;
}

FdReport fd_check(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::MatrixXd& analytic,
                  const Eigen::VectorXd& x, double step) {
  return compare_entries(analytic, numeric_jacobian(f, x, step));
}

FdReport fd_check(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& analytic,
                  const Eigen::VectorXd& x, double step) {
  auto wrapped = [&](const Eigen::VectorXd& p) { return Eigen::VectorXd::Constant(1, f(p)); };
  return compare_entries(analytic.transpose(), numeric_jacobian(wrapped, x, step));
}

}  // namespace facecoder
