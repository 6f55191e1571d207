#include "facecoder/fit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "facecoder/autodiff.hpp"
#include "facecoder/errors.hpp"

namespace facecoder {

// ---------------------------------------------------------------------------
// Framing

double framing_distance(const FaceModel& model, const Camera& camera) {
  camera.validate();
  return 2.0 * camera.focal_length * model.bounding_radius() / (kFramingFraction * camera.height);
}

Eigen::Vector3d pose_pivot(const FaceModel& model) { return model.bounding_center(); }

Eigen::Vector3d pivot_offset(const CodeVector& x, const Eigen::Vector3d& pivot) {
  return euler_to_matrix(x.rotation).transpose() * (pivot - x.translation);
}

void set_pivot_offset(CodeVector& x, const Eigen::Vector3d& pivot, const Eigen::Vector3d& offset) {
  x.translation = pivot - euler_to_matrix(x.rotation) * offset;
}

Eigen::VectorXd to_pivot_coordinates(const CodeVector& x, const Eigen::Vector3d& pivot) {
  Eigen::VectorXd y = x.flatten();
  y.segment<3>(kTranslationOffset) = pivot_offset(x, pivot);
  return y;
}

CodeVector from_pivot_coordinates(const Eigen::VectorXd& y, const Eigen::Vector3d& pivot) {
  CodeVector x = CodeVector::unflatten(y);
  set_pivot_offset(x, pivot, y.segment<3>(kTranslationOffset));
  return x;
}

// t = C − T(θ)s, so ∂t/∂s = −T and ∂t/∂θ_j = −(∂T/∂θ_j)s.
Eigen::VectorXd gradient_to_pivot(const Eigen::VectorXd& grad, const CodeVector& x, const Eigen::Vector3d& pivot) {
  if (grad.size() != kCodeDim) throw_invalid_argument("gradient must have 257 entries");
  const Eigen::Matrix3d rot = euler_to_matrix(x.rotation);
  const auto drot = euler_to_matrix_derivatives(x.rotation);
  const Eigen::Vector3d s = rot.transpose() * (pivot - x.translation);
  const Eigen::Vector3d gt = grad.segment<3>(kTranslationOffset);
  Eigen::VectorXd out = grad;
  for (int j = 0; j < 3; ++j) out(kRotationOffset + j) -= gt.dot(drot[j] * s);
  out.segment<3>(kTranslationOffset) = -rot.transpose() * gt;
  return out;
}

CodeVector init_code(const FaceModel& model, const Camera& camera) {
  CodeVector x;
  set_pivot_offset(x, pose_pivot(model), Eigen::Vector3d(0.0, 0.0, framing_distance(model, camera)));
  for (int c = 0; c < 3; ++c) x.gamma(c) = kAmbientOffset;
  return x;
}

// ---------------------------------------------------------------------------
// Configuration

std::string to_string(Optimizer optimizer) {
  switch (optimizer) {
    case Optimizer::AdaDelta: return "adadelta";
    case Optimizer::GdLineSearch: return "gd_linesearch";
    case Optimizer::Lbfgs: return "lbfgs";
  }
  return "unknown";
}

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "adadelta") return Optimizer::AdaDelta;
  if (name == "gd_linesearch") return Optimizer::GdLineSearch;
  if (name == "lbfgs") return Optimizer::Lbfgs;
  throw_invalid_argument("unknown optimizer '" + name + "' (expected adadelta, gd_linesearch or lbfgs)");
}

void FitConfig::validate() const {
  if (max_iterations < 1) throw_invalid_argument("max_iterations must be >= 1");
  if (!(base_rate > 0.0) || !(z_translation_rate > 0.0)) throw_invalid_argument("rates must be > 0");
  if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0)) throw_invalid_argument("adadelta_rho must be in (0, 1)");
  if (!(adadelta_eps > 0.0)) throw_invalid_argument("adadelta_eps must be > 0");
  if (!(convergence_tol >= 0.0) || convergence_window < 1) throw_invalid_argument("invalid convergence settings");
  if (preconditioner_interval < 1) throw_invalid_argument("preconditioner_interval must be >= 1");
  if (pose_warmup_iterations < 0) throw_invalid_argument("pose_warmup_iterations must be >= 0");
  weights.validate();
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

struct Evaluation {
  LossBreakdown loss;
  Eigen::VectorXd grad;  // pivot coordinates
};

class Objective {
 public:
  Objective(const FaceModel& model, const Camera& camera, const Image& image, const LandmarkSet* landmarks,
            const LossWeights& weights)
      : model_(model), camera_(camera), image_(image), landmarks_(landmarks), weights_(weights),
        pivot_(pose_pivot(model)) {}

  const Eigen::Vector3d& pivot() const { return pivot_; }

  Evaluation evaluate(const Eigen::VectorXd& y) const {
    const CodeVector x = from_pivot_coordinates(y, pivot_);
    LossGradient lg = loss_gradient(model_, camera_, x, image_, landmarks_, weights_);
    return {lg.loss, gradient_to_pivot(lg.gradient, x, pivot_)};
  }

  // An empty V zeroes the photometric term, so such a trial point is
  // rejected rather than taken as an improvement.
  double value(const Eigen::VectorXd& y) const {
    const CodeVector x = from_pivot_coordinates(y, pivot_);
    const LossBreakdown loss = total_loss(model_, camera_, x, image_, landmarks_, weights_);
    return loss.visible_count == 0 ? std::numeric_limits<double>::infinity() : loss.total;
  }

  // Diagonal of a Gauss-Newton approximation of the Hessian in pivot
  // coordinates. The ℓ2,1 term uses reweighted squared residuals with the
  // residual norm floored so the scale stays bounded near a perfect fit.
  Eigen::VectorXd gauss_newton_diagonal(const Eigen::VectorXd& y) const {
    constexpr double kResidualFloor = 0.05;
    const CodeVector x = from_pivot_coordinates(y, pivot_);
    const RenderedFace rendered = forward(model_, camera_, x);
    std::vector<std::uint32_t> verts = rendered.visible;
    const bool use_land = landmarks_ && weights_.w_land != 0;
    if (use_land) {
      for (const auto& l : *landmarks_) verts.push_back(l.vertex);
      std::sort(verts.begin(), verts.end());
      verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    }
    const JacobianResult jr = jacobian(model_, camera_, x, verts);

    // Column map from t coordinates to pivot coordinates.
    const Eigen::Matrix3d rot = euler_to_matrix(x.rotation);
    const auto drot = euler_to_matrix_derivatives(x.rotation);
    const Eigen::Vector3d s = y.segment<3>(kTranslationOffset);

    Eigen::VectorXd h = Eigen::VectorXd::Zero(kCodeDim);
    const double denom = weights_.normalization == PhotoNormalization::TotalVertices
                             ? static_cast<double>(model_.n_vertices())
                             : static_cast<double>(std::max<std::size_t>(rendered.visible.size(), 1));
    const double photo_scale = weights_.w_photo / denom;
    std::vector<double> land_conf(model_.n_vertices(), 0.0);
    if (use_land) {
      for (const auto& l : *landmarks_) land_conf[l.vertex] += l.confidence;
    }
    for (const auto& blk : jr.blocks) {
      JacobianMatrix b = blk.matrix;
      const Eigen::Matrix<double, 5, 3> jt = b.middleCols<3>(kTranslationOffset);
      for (int j = 0; j < 3; ++j) b.col(kRotationOffset + j) -= jt * (drot[j] * s);
      b.middleCols<3>(kTranslationOffset) = -jt * rot;
      const auto i = blk.vertex;
      if (rendered.is_visible[i]) {
        if (const auto sample = sample_image(image_, rendered.screen_pos.row(i).transpose())) {
          const Eigen::Vector3d res = sample->color - rendered.color.row(i).transpose();
          const double w = photo_scale / std::max(res.norm(), kResidualFloor);
          const Eigen::Matrix<double, 3, kCodeDim> jr3 = b.middleRows<3>(2) - sample->gradient * b.topRows<2>();
          h += w * jr3.colwise().squaredNorm().transpose();
        }
      }
      if (land_conf[i] > 0.0) h += 2.0 * land_conf[i] * b.topRows<2>().colwise().squaredNorm().transpose();
    }
    h.segment<kShapeDim>(kAlphaOffset).array() += 2.0 * weights_.w_reg;
    h.segment<kExprDim>(kDeltaOffset).array() += 2.0 * weights_.w_reg * weights_.w_delta;
    h.segment<kReflDim>(kBetaOffset).array() += 2.0 * weights_.w_reg * weights_.w_beta;
    return h;
  }

 private:
  const FaceModel& model_;
  const Camera& camera_;
  const Image& image_;
  const LandmarkSet* landmarks_;
  LossWeights weights_;
  Eigen::Vector3d pivot_;
};

void check_finite(const Evaluation& e, int iteration) {
  if (!e.grad.allFinite() || !std::isfinite(e.loss.total)) {
    throw Error(ErrorKind::Numerical, "non-finite loss or gradient at iteration " + std::to_string(iteration),
                "fit");
  }
}

bool stalled(const std::vector<LossBreakdown>& traj, const FitConfig& config) {
  const auto w = static_cast<std::size_t>(config.convergence_window);
  if (traj.size() <= w) return false;
  const double before = traj[traj.size() - 1 - w].total;
  const double now = traj.back().total;
  return std::abs(before - now) <= config.convergence_tol * std::max(std::abs(before), 1e-300);
}

// 1 for rotation, pivot offset and illumination; 0 for the statistical coefficients.
Eigen::VectorXd pose_mask() {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(kCodeDim);
  m.segment(kRotationOffset, kCodeDim - kRotationOffset).setOnes();
  return m;
}

constexpr std::size_t kLbfgsMemory = 10;

// Two-loop recursion with a diagonal initial inverse Hessian.
Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& grad, const Eigen::VectorXd& h0,
                                const std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& memory) {
  Eigen::VectorXd q = grad;
  std::vector<double> a(memory.size());
  for (std::size_t k = memory.size(); k-- > 0;) {
    const auto& [sk, yk] = memory[k];
    a[k] = sk.dot(q) / yk.dot(sk);
    q -= a[k] * yk;
  }
  Eigen::VectorXd r = h0.cwiseProduct(q);
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const auto& [sk, yk] = memory[k];
    const double b = yk.dot(r) / yk.dot(sk);
    r += (a[k] - b) * sk;
  }
  return r;
}

Eigen::VectorXd rate_vector(const FitConfig& config) {
  Eigen::VectorXd rate = Eigen::VectorXd::Constant(kCodeDim, config.base_rate);
  rate(kTranslationOffset + 2) = config.z_translation_rate;
  return rate;
}

}  // namespace

FitReport fit(const FaceModel& model, const Camera& camera, const Image& image, const LandmarkSet* landmarks,
              const FitConfig& config) {
  return fit_from(model, camera, image, landmarks, config, init_code(model, camera));
}

FitReport fit_from(const FaceModel& model, const Camera& camera, const Image& image, const LandmarkSet* landmarks,
                   const FitConfig& config, const CodeVector& start) {
  config.validate();
  camera.validate();
  if (image.width() != camera.width || image.height() != camera.height) {
    throw_invalid_argument("image size does not match the camera");
  }
  if (config.weights.w_land == 1 && landmarks == nullptr) throw_invalid_argument("w_land = 1 requires landmarks");
  if (landmarks) validate_landmarks(*landmarks, model.n_vertices());

  const Objective objective(model, camera, image, landmarks, config.weights);
  const Eigen::Vector3d pivot = objective.pivot();
  Eigen::VectorXd y = to_pivot_coordinates(start, pivot);

  Evaluation cur = objective.evaluate(y);
  if (cur.loss.visible_count == 0) {
    throw Error(ErrorKind::InitializationFailure, "no vertex is visible from the initial code", "fit");
  }
  check_finite(cur, 0);

  FitReport report;
  report.trajectory.push_back(cur.loss);
  report.visible_counts.push_back(cur.loss.visible_count);
  Eigen::VectorXd best_y = y;
  double best = cur.loss.total;

  if (config.optimizer == Optimizer::AdaDelta) {
    const Eigen::VectorXd rate = rate_vector(config);
    Eigen::VectorXd hist_g = Eigen::VectorXd::Zero(kCodeDim);
    Eigen::VectorXd hist_u = Eigen::VectorXd::Zero(kCodeDim);
    const double rho = config.adadelta_rho, eps = config.adadelta_eps;
    for (int it = 1; it <= config.max_iterations; ++it) {
      const Eigen::VectorXd grad =
          it <= config.pose_warmup_iterations ? Eigen::VectorXd(cur.grad.cwiseProduct(pose_mask())) : cur.grad;
      hist_g = rho * hist_g + (1.0 - rho) * grad.cwiseAbs2();
      const Eigen::VectorXd step =
          ((hist_u.array() + eps).sqrt() / (hist_g.array() + eps).sqrt() * grad.array()).matrix();
      hist_u = rho * hist_u + (1.0 - rho) * step.cwiseAbs2();
      y -= rate.cwiseProduct(step);
      cur = objective.evaluate(y);
      check_finite(cur, it);
      report.trajectory.push_back(cur.loss);
      report.visible_counts.push_back(cur.loss.visible_count);
      if (cur.loss.total < best) {
        best = cur.loss.total;
        best_y = y;
        report.best_iteration = static_cast<int>(report.trajectory.size()) - 1;
      }
      if (stalled(report.trajectory, config)) {
        report.converged = true;
        break;
      }
    }
  } else {
    // Descent with Armijo backtracking. Only decreasing steps are accepted, so
    // the trajectory is non-increasing. gd_linesearch scales the gradient by
    // the inverse Gauss-Newton diagonal; lbfgs starts its two-loop recursion
    // from the same diagonal.
    constexpr double kArmijo = 1e-4;
    constexpr int kMaxHalvings = 40;
    const bool quasi_newton = config.optimizer == Optimizer::Lbfgs;
    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s_k, y_k)
    Eigen::VectorXd precond;
    double step = 1.0;
    for (int it = 1; it <= config.max_iterations; ++it) {
      const bool warmup = it <= config.pose_warmup_iterations;
      if ((it - 1) % config.preconditioner_interval == 0) {
        const Eigen::VectorXd h = objective.gauss_newton_diagonal(y);
        const double floor = 1e-12 * std::max(h.maxCoeff(), 1e-300);
        precond = (h.array().max(floor)).inverse().matrix();
      }
      if (it == config.pose_warmup_iterations + 1) memory.clear();
      const Eigen::VectorXd grad = warmup ? Eigen::VectorXd(cur.grad.cwiseProduct(pose_mask())) : cur.grad;
      Eigen::VectorXd dir = quasi_newton ? Eigen::VectorXd(-lbfgs_direction(grad, precond, memory))
                                         : Eigen::VectorXd(-precond.cwiseProduct(grad));
      if (warmup) dir = dir.cwiseProduct(pose_mask());
      double slope = cur.grad.dot(dir);
      if (quasi_newton && !(slope < 0.0)) {
        memory.clear();
        dir = -precond.cwiseProduct(grad);
        slope = cur.grad.dot(dir);
      }
      bool accepted = false;
      double trial = quasi_newton ? 1.0 : std::min(1.0, 2.0 * step);
      Evaluation next;
      Eigen::VectorXd y_next;
      if (slope < 0.0) {
        for (int k = 0; k < kMaxHalvings; ++k, trial *= 0.5) {
          y_next = y + trial * dir;
          const double value = objective.value(y_next);
          if (std::isfinite(value) && value <= cur.loss.total + kArmijo * trial * slope) {
            next = objective.evaluate(y_next);
            accepted = next.loss.visible_count > 0 && next.loss.total <= cur.loss.total;
            if (accepted) break;
          }
        }
      }
      if (!accepted) {
        if (warmup) {
          it = config.pose_warmup_iterations;
          continue;
        }
        report.converged = true;
        break;
      }
      step = trial;
      check_finite(next, it);
      if (quasi_newton) {
        Eigen::VectorXd sk = y_next - y;
        Eigen::VectorXd yk = next.grad - cur.grad;
        if (warmup) {
          sk = sk.cwiseProduct(pose_mask());
          yk = yk.cwiseProduct(pose_mask());
        }
        if (sk.dot(yk) > 1e-12 * sk.norm() * yk.norm()) {
          memory.emplace_back(std::move(sk), std::move(yk));
          if (memory.size() > kLbfgsMemory) memory.pop_front();
        }
      }
      y = y_next;
      cur = std::move(next);
      report.trajectory.push_back(cur.loss);
      report.visible_counts.push_back(cur.loss.visible_count);
      if (cur.loss.total < best) {
        best = cur.loss.total;
        best_y = y;
        report.best_iteration = static_cast<int>(report.trajectory.size()) - 1;
      }
      if (!warmup && stalled(report.trajectory, config)) {
        report.converged = true;
        break;
      }
    }
  }

  // The start point only served the convergence window.
  report.initial_loss = report.trajectory.front();
  report.trajectory.erase(report.trajectory.begin());
  report.visible_counts.erase(report.visible_counts.begin());
  report.iterations = static_cast<int>(report.trajectory.size());

  report.code = from_pivot_coordinates(best_y, pivot);
  const RenderedFace rendered = forward(model, camera, report.code);
  report.final_loss = total_loss(rendered, report.code, image, landmarks, config.weights);
  report.photometric_rgb = mean_rgb_distance(rendered, image);
  if (landmarks) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& l : *landmarks) {
      const Eigen::Vector2d u = rendered.screen_pos.row(l.vertex);
      if (!u.allFinite()) continue;
      sum += (u - l.position).norm();
      ++count;
    }
    if (count) report.landmark_error = sum / static_cast<double>(count);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Evaluation

double compensated_point_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& ground_truth) {
  if (estimate.rows() != ground_truth.rows() || estimate.cols() != ground_truth.cols()) {
    throw_invalid_argument("point sets differ in size");
  }
  const Eigen::MatrixXd a = estimate.rowwise() - estimate.colwise().mean();
  const Eigen::MatrixXd b = ground_truth.rowwise() - ground_truth.colwise().mean();
  const double aa = a.squaredNorm();
  const double scale = aa > 0.0 ? a.cwiseProduct(b).sum() / aa : 1.0;
  return (scale * a - b).rowwise().norm().mean();
}

double compensated_geometric_error(const FaceModel& model, const CodeVector& estimate,
                                   const CodeVector& ground_truth) {
  // Rows are (Tᵀ v)ᵀ, so rotation stays in the comparison.
  auto rotated = [&](const CodeVector& x) -> Eigen::MatrixXd {
    return evaluate_shape(model, x.alpha, x.delta) * euler_to_matrix(x.rotation);
  };
  return compensated_point_error(rotated(estimate), rotated(ground_truth));
}

double landmark_pixel_error(const FaceModel& model, const Camera& camera, const CodeVector& estimate,
                            const CodeVector& ground_truth) {
  const RenderedFace a = forward(model, camera, estimate);
  const RenderedFace b = forward(model, camera, ground_truth);
  double sum = 0.0;
  std::size_t count = 0;
  for (auto k : model.landmark_indices()) {
    const Eigen::Vector2d ua = a.screen_pos.row(k), ub = b.screen_pos.row(k);
    if (!ua.allFinite() || !ub.allFinite()) continue;
    sum += (ua - ub).norm();
    ++count;
  }
  return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::infinity();
}

FitMetrics evaluate_fit(const FaceModel& model, const Camera& camera, const CodeVector& estimate,
                        const CodeVector& ground_truth, const Image& image) {
  if (image.width() != camera.width || image.height() != camera.height) {
    throw_invalid_argument("image size does not match the camera");
  }
  FitMetrics m;
  m.geometric_error = compensated_geometric_error(model, estimate, ground_truth);
  m.photometric_rgb = mean_rgb_distance(forward(model, camera, estimate), image);
  m.landmark_error = landmark_pixel_error(model, camera, estimate, ground_truth);
  return m;
}

}  // namespace facecoder
