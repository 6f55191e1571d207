#include "facecoder/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "facecoder/dataset.hpp"
#include "facecoder/errors.hpp"
#include "facecoder/loss.hpp"
#include "facecoder/random.hpp"

namespace facecoder {

namespace {

using L = long double;
using V3 = std::array<L, 3>;
using M3 = std::array<L, 9>;  // row-major

M3 mul(const M3& a, const M3& b) {
  M3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[3 * i + j] += a[3 * i + k] * b[3 * k + j];
  return c;
}

M3 euler_ld(L ax, L ay, L az) {
  const L cx = std::cos(ax), sx = std::sin(ax), cy = std::cos(ay), sy = std::sin(ay);
  const L cz = std::cos(az), sz = std::sin(az);
  const M3 rx{1, 0, 0, 0, cx, -sx, 0, sx, cx};
  const M3 ry{cy, 0, sy, 0, 1, 0, -sy, 0, cy};
  const M3 rz{cz, -sz, 0, sz, cz, 0, 0, 0, 1};
  return mul(rz, mul(ry, rx));
}

// Long-double scene state. Only the parts a coordinate touches are rebuilt
// for its two probes.
struct Scene {
  std::vector<V3> pos;
  std::vector<V3> refl;
  std::vector<V3> normal_sum;  // unnormalized one-ring sums
  M3 rot{};
  V3 t{};
  std::array<L, kGammaDim> gamma{};
};

class Reference {
 public:
  Reference(const FaceModel& model, const Camera& camera, std::span<const std::uint32_t> vertices)
      : model_(model), camera_(camera), vertices_(vertices.begin(), vertices.end()) {}

  Scene base(const std::vector<L>& x) const {
    const auto n = model_.n_vertices();
    Scene s;
    s.pos.resize(n);
    s.refl.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        const Eigen::Index r = 3 * i + c;
        L p = model_.avg_shape()(r);
        for (int k = 0; k < kShapeDim; ++k) p += L(model_.shape_basis()(r, k)) * x[kAlphaOffset + k];
        for (int k = 0; k < kExprDim; ++k) p += L(model_.expr_basis()(r, k)) * x[kDeltaOffset + k];
        L q = model_.avg_reflectance()(r);
        for (int k = 0; k < kReflDim; ++k) q += L(model_.refl_basis()(r, k)) * x[kBetaOffset + k];
        s.pos[i][c] = p;
        s.refl[i][c] = q;
      }
    }
    s.normal_sum = normal_sums(s.pos);
    s.rot = euler_ld(x[kRotationOffset], x[kRotationOffset + 1], x[kRotationOffset + 2]);
    for (int c = 0; c < 3; ++c) s.t[c] = x[kTranslationOffset + c];
    for (int k = 0; k < kGammaDim; ++k) s.gamma[k] = x[kGammaOffset + k];
    return s;
  }

  std::vector<V3> normal_sums(const std::vector<V3>& pos) const {
    std::vector<V3> sums(pos.size(), V3{0, 0, 0});
    for (const auto& tri : model_.triangles()) {
      const V3 &a = pos[tri[0]], &b = pos[tri[1]], &c = pos[tri[2]];
      const V3 e1{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
      const V3 e2{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
      const V3 f{e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]};
      for (int v = 0; v < 3; ++v)
        for (int k = 0; k < 3; ++k) sums[tri[v]][k] += f[k];
    }
    return sums;
  }

  // Outputs of every listed vertex, 5 per vertex.
  void outputs(const Scene& s, std::vector<L>& out) const {
    out.resize(5 * vertices_.size());
    for (std::size_t j = 0; j < vertices_.size(); ++j) {
      const std::uint32_t i = vertices_[j];
      const V3& m = s.normal_sum[i];
      const L len = std::sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
      const V3 nw{m[0] / len, m[1] / len, m[2] / len};
      const V3 d{s.pos[i][0] - s.t[0], s.pos[i][1] - s.t[1], s.pos[i][2] - s.t[2]};
      V3 p{0, 0, 0}, n{0, 0, 0};
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          p[a] += s.rot[3 * b + a] * d[b];
          n[a] += s.rot[3 * b + a] * nw[b];
        }
      }
      L* o = &out[5 * j];
      o[0] = L(camera_.principal_point.x()) + L(camera_.focal_length) * p[0] / p[2];
      o[1] = L(camera_.principal_point.y()) + L(camera_.focal_length) * p[1] / p[2];
      const L x = n[0], y = n[1], z = n[2];
      const std::array<L, 9> h{L(sh::kBand0),          L(sh::kBand1) * y,     L(sh::kBand1) * z,
                               L(sh::kBand1) * x,      L(sh::kBand2) * x * y, L(sh::kBand2) * y * z,
                               L(sh::kBand2Zonal) * (3 * z * z - 1), L(sh::kBand2) * x * z,
                               L(sh::kBand2Sym) * (x * x - y * y)};
      for (int c = 0; c < 3; ++c) {
        L irr = 0;
        for (int b = 0; b < kShBands; ++b) irr += s.gamma[3 * b + c] * h[b];
        o[2 + c] = s.refl[i][c] * irr;
      }
    }
  }

  Eigen::MatrixXd jacobian(const CodeVector& code, double step) const {
    const Eigen::VectorXd flat = code.flatten();
    std::vector<L> x(flat.data(), flat.data() + flat.size());
    const Scene s0 = base(x);
    const L h = step;
    Eigen::MatrixXd jac(5 * vertices_.size(), kCodeDim);
    std::vector<L> plus, minus;

    for (int k = 0; k < kCodeDim; ++k) {
      Scene sp = s0, sm = s0;
      if (k < kBetaOffset) {
        const Eigen::MatrixXd& basis = k < kDeltaOffset ? model_.shape_basis() : model_.expr_basis();
        const int col = k < kDeltaOffset ? k - kAlphaOffset : k - kDeltaOffset;
        // Positions are linear in the coefficient, so the probes shift them by
        // ±h times the basis column; normals are rebuilt from scratch.
        for (std::size_t i = 0; i < sp.pos.size(); ++i) {
          for (int c = 0; c < 3; ++c) {
            const L e = basis(3 * static_cast<Eigen::Index>(i) + c, col);
            sp.pos[i][c] = s0.pos[i][c] + h * e;
            sm.pos[i][c] = s0.pos[i][c] - h * e;
          }
        }
        sp.normal_sum = normal_sums(sp.pos);
        sm.normal_sum = normal_sums(sm.pos);
      } else if (k < kRotationOffset) {
        const int col = k - kBetaOffset;
        for (std::size_t i = 0; i < sp.refl.size(); ++i) {
          for (int c = 0; c < 3; ++c) {
            const L e = model_.refl_basis()(3 * static_cast<Eigen::Index>(i) + c, col);
            sp.refl[i][c] = s0.refl[i][c] + h * e;
            sm.refl[i][c] = s0.refl[i][c] - h * e;
          }
        }
      } else if (k < kTranslationOffset) {
        std::vector<L> xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        sp.rot = euler_ld(xp[kRotationOffset], xp[kRotationOffset + 1], xp[kRotationOffset + 2]);
        sm.rot = euler_ld(xm[kRotationOffset], xm[kRotationOffset + 1], xm[kRotationOffset + 2]);
      } else if (k < kGammaOffset) {
        sp.t[k - kTranslationOffset] += h;
        sm.t[k - kTranslationOffset] -= h;
      } else {
        sp.gamma[k - kGammaOffset] += h;
        sm.gamma[k - kGammaOffset] -= h;
      }
      outputs(sp, plus);
      outputs(sm, minus);
      for (std::size_t r = 0; r < plus.size(); ++r) {
        jac(static_cast<Eigen::Index>(r), k) = static_cast<double>((plus[r] - minus[r]) / (2 * h));
      }
    }
    return jac;
  }

 private:
  const FaceModel& model_;
  const Camera& camera_;
  std::vector<std::uint32_t> vertices_;
};

constexpr double kResidualFraction = 0.02;
constexpr double kMinResidual = 1e-3;

// Loss terms with V taken from `frozen` instead of the probe's own pass.
LossBreakdown frozen_loss(const FaceModel& model, const Camera& camera, const CodeVector& x, const Image& image,
                          const LandmarkSet* landmarks, const LossWeights& weights, const RenderedFace& frozen) {
  RenderedFace r = forward(model, camera, x);
  r.visible = frozen.visible;
  r.is_visible = frozen.is_visible;
  return total_loss(r, x, image, landmarks, weights);
}

}  // namespace

Eigen::MatrixXd reference_jacobian(const FaceModel& model, const Camera& camera, const CodeVector& x,
                                   std::span<const std::uint32_t> vertices, double step) {
  if (!(step > 0.0)) throw_invalid_argument("finite-difference step must be > 0");
  for (auto v : vertices) {
    if (v >= model.n_vertices()) throw_invalid_argument("vertex index out of range");
  }
  return Reference(model, camera, vertices).jacobian(x, step);
}

JacobianCheck check_jacobian(const FaceModel& model, const Camera& camera, const CodeVector& x, double step) {
  const JacobianResult analytic = jacobian(model, camera, x);
  std::vector<std::uint32_t> vertices;
  vertices.reserve(analytic.blocks.size());
  for (const auto& b : analytic.blocks) vertices.push_back(b.vertex);
  JacobianCheck out;
  if (vertices.empty()) return out;
  const Eigen::MatrixXd numeric = reference_jacobian(model, camera, x, vertices, step);
  Eigen::MatrixXd stacked(numeric.rows(), numeric.cols());
  for (std::size_t j = 0; j < analytic.blocks.size(); ++j) {
    stacked.middleRows(5 * static_cast<Eigen::Index>(j), 5) = analytic.blocks[j].matrix;
  }
  out.report = compare_entries(stacked, numeric);
  for (Eigen::Index r = 0; r < stacked.rows(); ++r) {
    for (Eigen::Index k = 0; k < stacked.cols(); ++k) {
      if (fd_relative_error(stacked(r, k), numeric(r, k)) >= kJacobianTolerance) ++out.entries_over;
    }
  }
  if (out.report.worst_row >= 0) out.worst_vertex = vertices[static_cast<std::size_t>(out.report.worst_row / 5)];
  return out;
}

bool near_pixel_grid(const RenderedFace& rendered, double margin) {
  for (auto i : rendered.visible) {
    for (int c = 0; c < 2; ++c) {
      const double u = rendered.screen_pos(i, c);
      if (std::abs(u - std::round(u)) < margin) return true;
    }
  }
  return false;
}

GradientCheck check_loss_gradient(const FaceModel& model, const Camera& camera, const CodeVector& x,
                                  const Image& image, const LandmarkSet* landmarks, const LossWeights& weights,
                                  double max_step) {
  if (!(max_step > 0.0)) throw_invalid_argument("finite-difference step must be > 0");
  GradientCheck out;
  out.analytic = loss_gradient(model, camera, x, image, landmarks, weights).gradient;
  const RenderedFace base = forward(model, camera, x);
  const JacobianResult jac = jacobian(model, camera, x);
  const Eigen::VectorXd flat = x.flatten();
  out.numeric.resize(kCodeDim);
  // Residuals r_i = I(u_i) − c_i and their rates of change dr_i/dx.
  std::vector<Eigen::Vector3d> residual(jac.blocks.size());
  std::vector<Eigen::Matrix<double, 3, kCodeDim>> residual_rate(jac.blocks.size());
  for (std::size_t j = 0; j < jac.blocks.size(); ++j) {
    const auto& b = jac.blocks[j];
    const auto sample = sample_image(image, base.screen_pos.row(b.vertex).transpose());
    if (!sample) continue;
    residual[j] = sample->color - base.color.row(b.vertex).transpose();
    residual_rate[j] = sample->gradient * b.matrix.topRows<2>() - b.matrix.bottomRows<3>();
  }
  for (int k = 0; k < kCodeDim; ++k) {
    double h = max_step;
    for (std::size_t j = 0; j < jac.blocks.size(); ++j) {
      const auto& b = jac.blocks[j];
      const double motion = std::max(std::abs(b.matrix(0, k)), std::abs(b.matrix(1, k)));
      if (motion > 0.0) h = std::min(h, 0.5 * kGridMargin / motion);
      // The smoothed norm bends sharply near zero residual; keep each probe's
      // residual change small against the residual itself.
      const double rate = residual_rate[j].col(k).norm();
      if (rate > 0.0) h = std::min(h, kResidualFraction * std::max(residual[j].norm(), kMinResidual) / rate);
    }
    // Central differences at h and h/2, combined by one Richardson step.
    // Entries that are near-cancelling sums over many vertices are small
    // against the curvature of their terms, and the plain O(h²) truncation
    // error shows up in their relative error. The caps above only concern the
    // photometric term. The landmark and prior terms are smooth and can be
    // large against their derivatives, so a wider step keeps rounding down.
    auto central = [&](double scale) {
      auto difference = [&](double step) {
        Eigen::VectorXd xp = flat, xm = flat;
        xp(k) += step;
        xm(k) -= step;
        const LossBreakdown lp =
            frozen_loss(model, camera, CodeVector::unflatten(xp), image, landmarks, weights, base);
        const LossBreakdown lm =
            frozen_loss(model, camera, CodeVector::unflatten(xm), image, landmarks, weights, base);
        return std::array<double, 3>{(lp.photo - lm.photo) / (2.0 * step), (lp.land - lm.land) / (2.0 * step),
                                     (lp.reg - lm.reg) / (2.0 * step)};
      };
      const auto small = difference(scale * h);
      const auto wide = difference(scale * kSmoothTermStep);
      // Differencing the terms separately keeps the small photometric changes
      // from being rounded away against a large landmark term.
      return weights.w_photo * small[0] + weights.w_land * wide[1] + weights.w_reg * wide[2];
    };
    out.numeric(k) = (4.0 * central(0.5) - central(1.0)) / 3.0;
  }
  out.report = compare_entries(out.analytic.transpose(), out.numeric.transpose());
  return out;
}

namespace {

void merge(FdReport& into, const FdReport& r, std::size_t& total_entries, double& mean_sum) {
  if (r.entries == 0) return;
  if (r.max_rel_error >= into.max_rel_error || into.entries == 0) {
    into.max_rel_error = r.max_rel_error;
    into.worst_row = r.worst_row;
    into.worst_param = r.worst_param;
    into.analytic_at_worst = r.analytic_at_worst;
    into.numeric_at_worst = r.numeric_at_worst;
  }
  total_entries += r.entries;
  mean_sum += r.mean_rel_error * static_cast<double>(r.entries);
  into.entries = total_entries;
  into.mean_rel_error = mean_sum / static_cast<double>(total_entries);
}

}  // namespace

GradCheckSummary run_grad_check(std::span<const FaceModel> models, const Camera& camera,
                                const GradCheckOptions& options) {
  if (models.empty()) throw_invalid_argument("grad check needs at least one model");
  camera.validate();
  const SamplerConfig sampler;
  GradCheckSummary out;
  using clock = std::chrono::steady_clock;

  auto t0 = clock::now();
  std::size_t entries = 0;
  double mean_sum = 0.0;
  for (std::size_t k = 0; k < options.jacobian_configs; ++k) {
    const FaceModel& model = models[k % models.size()];
    auto rng = make_stream(options.seed, kStreamGradCheck + k);
    const CodeVector x = sample_code(model, camera, sampler, rng);
    const JacobianCheck c = check_jacobian(model, camera, x, options.step);
    merge(out.jacobian, c.report, entries, mean_sum);
    out.jacobian_entries_over += c.entries_over;
    ++out.jacobian_configs;
  }
  out.jacobian_seconds = std::chrono::duration<double>(clock::now() - t0).count();

  t0 = clock::now();
  std::size_t g_entries[2] = {0, 0};
  double g_mean[2] = {0.0, 0.0};
  for (std::size_t k = 0; k < options.gradient_configs; ++k) {
    const FaceModel& model = models[k % models.size()];
    // Disjoint from the Jacobian streams.
    auto rng = make_stream(options.seed, kStreamGradCheck + (1ull << 24) + k);
    CodeVector x, target;
    RenderedFace rendered;
    std::size_t attempts = 0;
    do {
      if (attempts++ > options.max_redraws) {
        throw Error(ErrorKind::Numerical, "no grad-check configuration away from the pixel grid");
      }
      target = sample_code(model, camera, sampler, rng);
      x = sample_code(model, camera, sampler, rng);
      rendered = forward(model, camera, x);
    } while (rendered.visible.empty() || near_pixel_grid(rendered));
    out.redraws += attempts - 1;
    const Image image = render_scene(model, camera, target, Background{});
    const LandmarkSet landmarks = project_landmarks(model, camera, target);
    for (int w_land = 0; w_land <= 1; ++w_land) {
      LossWeights weights;
      weights.w_land = w_land;
      const GradientCheck g =
          check_loss_gradient(model, camera, x, image, w_land ? &landmarks : nullptr, weights, options.step);
      merge(out.gradient[w_land], g.report, g_entries[w_land], g_mean[w_land]);
    }
    ++out.gradient_configs;
  }
  out.gradient_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return out;
}

}  // namespace facecoder
