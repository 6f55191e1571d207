#include "facecoder/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "binary_io.hpp"
#include "facecoder/autodiff.hpp"
#include "facecoder/errors.hpp"
#include "facecoder/fit.hpp"
#include "facecoder/random.hpp"

namespace facecoder {

// ---------------------------------------------------------------------------
// Weights

TinyEncoder TinyEncoder::create(const FaceModel& model, const Camera& camera, std::uint64_t seed) {
  TinyEncoder enc;
  auto rng = make_stream(seed, kStreamEncoderInit);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(kEncoderInputDim)));
  enc.w1.resize(kEncoderHidden, kEncoderInputDim);
  // Column-major fill order is part of the seed contract. Values are rounded
  // to float so a fresh encoder survives an ENC1 round trip unchanged.
  for (Eigen::Index j = 0; j < enc.w1.cols(); ++j) {
    for (Eigen::Index i = 0; i < enc.w1.rows(); ++i) enc.w1(i, j) = static_cast<float>(normal(rng));
  }
  enc.b1 = Eigen::VectorXd::Zero(kEncoderHidden);
  enc.w2 = Eigen::MatrixXd::Zero(kCodeDim, kEncoderHidden);
  enc.b2 = Eigen::VectorXd::Zero(kCodeDim);
  enc.attach(model, camera);
  return enc;
}

void TinyEncoder::attach(const FaceModel& model, const Camera& camera) {
  pivot = pose_pivot(model);
  offsets = to_pivot_coordinates(init_code(model, camera), pivot);
}

std::size_t TinyEncoder::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

namespace {

template <typename Fn>
void for_each_block(Fn&& fn, Eigen::MatrixXd& w1, Eigen::VectorXd& b1, Eigen::MatrixXd& w2, Eigen::VectorXd& b2) {
  fn(w1.data(), w1.size());
  fn(b1.data(), b1.size());
  fn(w2.data(), w2.size());
  fn(b2.data(), b2.size());
}

Eigen::VectorXd flatten_blocks(const Eigen::MatrixXd& w1, const Eigen::VectorXd& b1, const Eigen::MatrixXd& w2,
                               const Eigen::VectorXd& b2) {
  Eigen::VectorXd flat(w1.size() + b1.size() + w2.size() + b2.size());
  Eigen::Index at = 0;
  flat.segment(at, w1.size()) = Eigen::Map<const Eigen::VectorXd>(w1.data(), w1.size());
  at += w1.size();
  flat.segment(at, b1.size()) = b1;
  at += b1.size();
  flat.segment(at, w2.size()) = Eigen::Map<const Eigen::VectorXd>(w2.data(), w2.size());
  at += w2.size();
  flat.segment(at, b2.size()) = b2;
  return flat;
}

}  // namespace

Eigen::VectorXd TinyEncoder::flatten_parameters() const { return flatten_blocks(w1, b1, w2, b2); }

void TinyEncoder::set_parameters(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw_invalid_argument("parameter vector has the wrong length");
  }
  Eigen::Index at = 0;
  for_each_block(
      [&](double* p, Eigen::Index n) {
        std::copy(flat.data() + at, flat.data() + at + n, p);
        at += n;
      },
      w1, b1, w2, b2);
}

bool TinyEncoder::same_weights(const TinyEncoder& other) const {
  return w1 == other.w1 && b1 == other.b1 && w2 == other.w2 && b2 == other.b2;
}

void EncoderGradient::set_zero_like(const TinyEncoder& enc) {
  w1 = Eigen::MatrixXd::Zero(enc.w1.rows(), enc.w1.cols());
  b1 = Eigen::VectorXd::Zero(enc.b1.size());
  w2 = Eigen::MatrixXd::Zero(enc.w2.rows(), enc.w2.cols());
  b2 = Eigen::VectorXd::Zero(enc.b2.size());
}

Eigen::VectorXd EncoderGradient::flatten() const { return flatten_blocks(w1, b1, w2, b2); }

// ---------------------------------------------------------------------------
// Forward and backward

namespace {

// Overlap of source cells with each of `out` equal-width target cells.
struct AxisWeights {
  std::vector<int> first;             // first source index per target
  std::vector<std::vector<double>> w;  // weights summing to 1
};

AxisWeights area_weights(int in, int out) {
  AxisWeights a;
  a.first.resize(out);
  a.w.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int k = 0; k < out; ++k) {
    const double lo = k * scale, hi = (k + 1) * scale;
    const int s0 = static_cast<int>(std::floor(lo));
    const int s1 = std::min(in, static_cast<int>(std::ceil(hi)));
    a.first[k] = s0;
    for (int s = s0; s < s1; ++s) {
      const double overlap = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
      a.w[k].push_back(overlap / scale);
    }
  }
  return a;
}

}  // namespace

Eigen::VectorXd encoder_input(const Image& image) {
  if (image.empty()) throw_invalid_argument("encoder input image is empty");
  const AxisWeights ax = area_weights(image.width(), kEncoderInputSide);
  const AxisWeights ay = area_weights(image.height(), kEncoderInputSide);
  const auto px = image.pixels();
  Eigen::VectorXd in(kEncoderInputDim);
  for (int ty = 0; ty < kEncoderInputSide; ++ty) {
    for (int tx = 0; tx < kEncoderInputSide; ++tx) {
      double acc[3] = {0.0, 0.0, 0.0};
      for (std::size_t j = 0; j < ay.w[ty].size(); ++j) {
        const std::size_t row = static_cast<std::size_t>(ay.first[ty] + static_cast<int>(j)) * image.width();
        for (std::size_t i = 0; i < ax.w[tx].size(); ++i) {
          const double w = ay.w[ty][j] * ax.w[tx][i];
          const float* p = &px[3 * (row + ax.first[tx] + i)];
          for (int c = 0; c < 3; ++c) acc[c] += w * p[c];
        }
      }
      for (int c = 0; c < 3; ++c) in(3 * (ty * kEncoderInputSide + tx) + c) = acc[c];
    }
  }
  return in;
}

EncoderActivations encoder_activations(const TinyEncoder& enc, const Eigen::VectorXd& input) {
  if (input.size() != enc.w1.cols()) throw_invalid_argument("encoder input has the wrong length");
  if (enc.offsets.size() != kCodeDim) throw_invalid_argument("encoder is not attached to a model");
  EncoderActivations act;
  act.input = input;
  act.hidden = (enc.w1 * input + enc.b1).array().tanh().matrix();
  act.output = enc.offsets + (enc.w2 * act.hidden + enc.b2);
  return act;
}

CodeVector encoder_forward(const TinyEncoder& enc, const Image& image) {
  const EncoderActivations act = encoder_activations(enc, encoder_input(image));
  return from_pivot_coordinates(act.output, enc.pivot);
}

void encoder_backward(const TinyEncoder& enc, const EncoderActivations& act, const Eigen::VectorXd& d_output,
                      EncoderGradient& acc) {
  acc.w2.noalias() += d_output * act.hidden.transpose();
  acc.b2 += d_output;
  const Eigen::VectorXd d_pre =
      ((enc.w2.transpose() * d_output).array() * (1.0 - act.hidden.array().square())).matrix();
  acc.w1.noalias() += d_pre * act.input.transpose();
  acc.b1 += d_pre;
}

SampleLoss sample_loss(const TinyEncoder& enc, const EncoderActivations& act, const FaceModel& model,
                       const Camera& camera, const Image& image, const LandmarkSet* landmarks,
                       const LossWeights& weights) {
  const CodeVector x = from_pivot_coordinates(act.output, enc.pivot);
  const LossGradient lg = loss_gradient(model, camera, x, image, landmarks, weights);
  return {lg.loss, gradient_to_pivot(lg.gradient, x, enc.pivot)};
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (batch_size < 1) throw_invalid_argument("batch_size must be >= 1");
  if (iterations < 0) throw_invalid_argument("iterations must be >= 0");
  if (!(base_rate > 0.0) || !(z_translation_rate > 0.0)) throw_invalid_argument("rates must be > 0");
  if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0)) throw_invalid_argument("adadelta_rho must be in (0, 1)");
  if (!(adadelta_eps > 0.0)) throw_invalid_argument("adadelta_eps must be > 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw_invalid_argument("validation_fraction must be in [0, 1)");
  }
  if (log_interval < 1) throw_invalid_argument("log_interval must be >= 1");
  if (validation_interval < 1) throw_invalid_argument("validation_interval must be >= 1");
  if (threads < 1) throw_invalid_argument("threads must be >= 1");
  weights.validate();
}

std::size_t validation_start(std::size_t n_samples, double fraction) {
  const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n_samples)));
  // Keep at least one training sample.
  return n_samples - std::min(n_val, n_samples > 0 ? n_samples - 1 : 0);
}

namespace {

const LandmarkSet* landmarks_of(const LoadedSample& s) { return s.landmarks.empty() ? nullptr : &s.landmarks; }

double sample_landmark_error(const FaceModel& model, const Camera& camera, const CodeVector& x,
                             const LoadedSample& s) {
  if (s.landmarks.empty()) return landmark_pixel_error(model, camera, x, s.code);
  const RenderedFace r = forward(model, camera, x);
  double sum = 0.0;
  for (const Landmark& lm : s.landmarks) {
    const Eigen::Vector2d u = r.screen_pos.row(lm.vertex).transpose();
    // An unprojectable landmark has no meaningful pixel distance; report it
    // as the image diagonal so it still counts as a large error.
    sum += u.allFinite() ? (u - lm.position).norm() : std::hypot(camera.width, camera.height);
  }
  return sum / static_cast<double>(s.landmarks.size());
}

// Runs fn(k) for k in [0, n) on up to `threads` workers. Results are written
// to per-k slots by fn, so accumulation order stays fixed.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < n; k += workers) fn(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Caffe-style AdaDelta on one weight block, updated in place.
class AdaDeltaBlock {
 public:
  AdaDeltaBlock(Eigen::Index n, double rho, double eps)
      : rho_(rho), eps_(eps), g2_(Eigen::ArrayXd::Zero(n)), d2_(Eigen::ArrayXd::Zero(n)), delta_(n) {}

  // `rate` is a scalar or a per-entry array.
  template <typename Rate>
  void step(double* weights, const double* grad, const Rate& rate) {
    step_range(0, g2_.size(), weights, grad, rate);
  }

  // Updates entries [begin, begin + n) of the block; `weights` and `grad`
  // point at entry `begin`.
  template <typename Rate>
  void step_range(Eigen::Index begin, Eigen::Index n, double* weights, const double* grad, const Rate& rate) {
    Eigen::Map<Eigen::ArrayXd> w(weights, n);
    Eigen::Map<const Eigen::ArrayXd> g(grad, n);
    auto g2 = g2_.segment(begin, n);
    auto d2 = d2_.segment(begin, n);
    auto delta = delta_.head(n);
    g2 = rho_ * g2 + (1.0 - rho_) * g.square();
    delta = ((d2 + eps_) / (g2 + eps_)).sqrt() * g;
    d2 = rho_ * d2 + (1.0 - rho_) * delta.square();
    w -= rate * delta;
  }

 private:
  double rho_, eps_;
  Eigen::ArrayXd g2_, d2_, delta_;
};

}  // namespace

ValidationRow evaluate_encoder(const TinyEncoder& enc, const FaceModel& model, const LoadedDataset& dataset,
                               std::size_t begin, std::size_t end, const LossWeights& weights) {
  if (begin >= end || end > dataset.samples.size()) throw_invalid_argument("empty evaluation range");
  ValidationRow row;
  for (std::size_t i = begin; i < end; ++i) {
    const Image image = dataset.image(i);
    const CodeVector x = encoder_forward(enc, image);
    const RenderedFace r = forward(model, dataset.camera, x);
    row.photometric_rgb += mean_rgb_distance(r, image);
    row.photo_loss += photometric_loss(r, image, weights.l21_epsilon, weights.normalization).value;
    row.landmark_px += sample_landmark_error(model, dataset.camera, x, dataset.samples[i]);
  }
  const double n = static_cast<double>(end - begin);
  row.photometric_rgb /= n;
  row.photo_loss /= n;
  row.landmark_px /= n;
  return row;
}

TrainResult train(TinyEncoder encoder, const FaceModel& model, const LoadedDataset& dataset,
                  const TrainConfig& config, const std::function<void(const CurveRow&)>& on_log) {
  config.validate();
  if (dataset.samples.empty()) throw_invalid_argument("training dataset is empty");
  dataset.camera.validate();
  if (config.weights.w_land == 1) {
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      if (dataset.samples[i].landmarks.empty()) {
        throw_invalid_argument("w_land = 1 needs landmarks for every sample; sample " + std::to_string(i) +
                               " has none");
      }
    }
  }
  encoder.attach(model, dataset.camera);

  const std::size_t n_train = validation_start(dataset.samples.size(), config.validation_fraction);
  const bool has_validation = n_train < dataset.samples.size();

  // Encoder inputs of the training part are reused every epoch.
  std::vector<Eigen::VectorXd> inputs(n_train);
  for (std::size_t i = 0; i < n_train; ++i) inputs[i] = encoder_input(dataset.image(i));

  TrainResult result;
  auto validate_now = [&](int iteration) {
    if (!has_validation) return;
    ValidationRow row =
        evaluate_encoder(encoder, model, dataset, n_train, dataset.samples.size(), config.weights);
    row.iteration = iteration;
    result.validation.push_back(row);
  };
  validate_now(0);

  auto order_rng = make_stream(config.seed, kStreamTrainOrder);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n_train;  // forces a shuffle on first use

  // The output row driving the head's camera-space depth gets its own rate.
  const int z_row = kTranslationOffset + 2;
  Eigen::ArrayXXd w2_rate = Eigen::ArrayXXd::Constant(kCodeDim, kEncoderHidden, config.base_rate);
  w2_rate.row(z_row).setConstant(config.z_translation_rate);
  const Eigen::ArrayXd w2_rate_flat = w2_rate.reshaped();
  Eigen::ArrayXd b2_rate = Eigen::ArrayXd::Constant(kCodeDim, config.base_rate);
  b2_rate(z_row) = config.z_translation_rate;
  const double rho = config.adadelta_rho, eps = config.adadelta_eps;
  AdaDeltaBlock opt_w1(encoder.w1.size(), rho, eps), opt_b1(encoder.b1.size(), rho, eps);
  AdaDeltaBlock opt_w2(encoder.w2.size(), rho, eps), opt_b2(encoder.b2.size(), rho, eps);

  const auto batch = static_cast<std::size_t>(config.batch_size);
  const double inv = 1.0 / static_cast<double>(batch);
  std::vector<std::size_t> members(batch);
  std::vector<EncoderActivations> acts(batch);
  std::vector<SampleLoss> losses(batch);
  EncoderGradient grad;  // w1 stays empty, see below
  grad.b1 = Eigen::VectorXd::Zero(kEncoderHidden);
  grad.w2 = Eigen::MatrixXd::Zero(kCodeDim, kEncoderHidden);
  grad.b2 = Eigen::VectorXd::Zero(kCodeDim);
  Eigen::MatrixXd d_pre(kEncoderHidden, static_cast<Eigen::Index>(batch));
  Eigen::MatrixXd batch_inputs(kEncoderInputDim, static_cast<Eigen::Index>(batch));
  Eigen::VectorXd w1_column(kEncoderHidden);
  Eigen::MatrixXd pre_hidden(kEncoderHidden, static_cast<Eigen::Index>(batch));
  CurveRow window;
  int window_count = 0;

  for (int it = 1; it <= config.iterations; ++it) {
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == n_train) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      members[b] = order[cursor++];
    }
    // One product for the whole batch instead of a pass over W1 per sample.
    for (std::size_t b = 0; b < batch; ++b) batch_inputs.col(static_cast<Eigen::Index>(b)) = inputs[members[b]];
    pre_hidden.noalias() = encoder.w1 * batch_inputs;
    for (std::size_t b = 0; b < batch; ++b) {
      auto& act = acts[b];
      act.input = inputs[members[b]];
      act.hidden = (pre_hidden.col(static_cast<Eigen::Index>(b)) + encoder.b1).array().tanh().matrix();
      act.output = encoder.offsets + (encoder.w2 * act.hidden + encoder.b2);
    }
    parallel_for(batch, config.threads, [&](std::size_t b) {
      const std::size_t i = members[b];
      try {
        losses[b] = sample_loss(encoder, acts[b], model, dataset.camera, dataset.image(i),
                                landmarks_of(dataset.samples[i]), config.weights);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numerical) throw;
        throw Error(ErrorKind::Numerical, "training diverged at iteration " + std::to_string(it) + ", sample " +
                                              std::to_string(i) + ": " + e.what());
      }
    });

    // Batch-mean gradient, the arithmetic of encoder_backward with the
    // first-layer outer products gathered into one product.
    grad.w2.setZero();
    grad.b2.setZero();
    grad.b1.setZero();
    CurveRow mean;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto col = static_cast<Eigen::Index>(b);
      const Eigen::VectorXd d_out = losses[b].d_output * inv;
      grad.w2.noalias() += d_out * acts[b].hidden.transpose();
      grad.b2 += d_out;
      d_pre.col(col) = ((encoder.w2.transpose() * d_out).array() * (1.0 - acts[b].hidden.array().square())).matrix();
      grad.b1 += d_pre.col(col);
      mean.photo += losses[b].loss.photo;
      mean.land += losses[b].loss.land;
      mean.reg += losses[b].loss.reg;
      mean.total += losses[b].loss.total;
    }
    if (!std::isfinite(mean.total)) {
      throw Error(ErrorKind::Numerical, "non-finite training loss at iteration " + std::to_string(it));
    }
    // The first-layer gradient d_pre·inputsᵀ is formed one column at a time
    // and consumed at once; the full matrix never goes through memory.
    for (Eigen::Index j = 0; j < encoder.w1.cols(); ++j) {
      w1_column.noalias() = d_pre * batch_inputs.row(j).transpose();
      opt_w1.step_range(j * kEncoderHidden, kEncoderHidden, encoder.w1.col(j).data(), w1_column.data(),
                        config.base_rate);
    }
    opt_b1.step(encoder.b1.data(), grad.b1.data(), config.base_rate);
    opt_w2.step(encoder.w2.data(), grad.w2.data(), w2_rate_flat);
    opt_b2.step(encoder.b2.data(), grad.b2.data(), b2_rate);
    if (!encoder.w2.allFinite() || !encoder.b1.allFinite()) {
      throw Error(ErrorKind::Numerical, "non-finite encoder weights after iteration " + std::to_string(it));
    }

    window.photo += mean.photo * inv;
    window.land += mean.land * inv;
    window.reg += mean.reg * inv;
    window.total += mean.total * inv;
    ++window_count;
    if (it % config.log_interval == 0) {
      const double w = 1.0 / window_count;
      CurveRow row{it, window.photo * w, window.land * w, window.reg * w, window.total * w};
      result.curve.push_back(row);
      if (on_log) on_log(row);
      window = CurveRow{};
      window_count = 0;
    }
    if (it % config.validation_interval == 0 && it != config.iterations) validate_now(it);
  }
  if (config.iterations > 0) validate_now(config.iterations);
  result.encoder = std::move(encoder);
  return result;
}

// ---------------------------------------------------------------------------
// ENC1

namespace {
constexpr std::uint32_t kEnc1Version = 1;
}

std::vector<std::uint8_t> encode_encoder(const TinyEncoder& enc) {
  if (enc.w1.rows() != enc.b1.size() || enc.w2.cols() != enc.w1.rows() || enc.w2.rows() != enc.b2.size()) {
    throw_invalid_argument("encoder weight shapes are inconsistent");
  }
  detail::ByteWriter w;
  w.magic("ENC1");
  w.u32(kEnc1Version);
  w.u32(static_cast<std::uint32_t>(enc.w1.cols()));
  w.u32(static_cast<std::uint32_t>(enc.w1.rows()));
  w.u32(static_cast<std::uint32_t>(enc.w2.rows()));
  // Matrices are written row-major.
  for (Eigen::Index i = 0; i < enc.w1.rows(); ++i) w.f32_array(enc.w1.row(i));
  w.f32_array(enc.b1);
  for (Eigen::Index i = 0; i < enc.w2.rows(); ++i) w.f32_array(enc.w2.row(i));
  w.f32_array(enc.b2);
  return w.take();
}

TinyEncoder decode_encoder(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("ENC1");
  const std::uint32_t version = r.u32("header");
  if (version != kEnc1Version) {
    throw Error(ErrorKind::Parse, "unsupported ENC1 version " + std::to_string(version), "header");
  }
  const std::uint32_t n_in = r.u32("header");
  const std::uint32_t n_hidden = r.u32("header");
  const std::uint32_t n_out = r.u32("header");
  if (n_in != kEncoderInputDim || n_hidden != kEncoderHidden || n_out != kCodeDim) {
    throw Error(ErrorKind::InvariantViolation,
                "ENC1 layer sizes " + std::to_string(n_in) + "/" + std::to_string(n_hidden) + "/" +
                    std::to_string(n_out) + " do not match the encoder architecture",
                "header");
  }
  const std::size_t floats = std::size_t{n_hidden} * n_in + n_hidden + std::size_t{n_out} * n_hidden + n_out;
  r.require(4 * floats, "weights");
  TinyEncoder enc;
  enc.w1.resize(n_hidden, n_in);
  enc.b1.resize(n_hidden);
  enc.w2.resize(n_out, n_hidden);
  enc.b2.resize(n_out);
  for (Eigen::Index i = 0; i < enc.w1.rows(); ++i) {
    for (Eigen::Index j = 0; j < enc.w1.cols(); ++j) enc.w1(i, j) = r.f32("weights");
  }
  for (Eigen::Index i = 0; i < enc.b1.size(); ++i) enc.b1(i) = r.f32("weights");
  for (Eigen::Index i = 0; i < enc.w2.rows(); ++i) {
    for (Eigen::Index j = 0; j < enc.w2.cols(); ++j) enc.w2(i, j) = r.f32("weights");
  }
  for (Eigen::Index i = 0; i < enc.b2.size(); ++i) enc.b2(i) = r.f32("weights");
  if (r.remaining() != 0) {
    throw Error(ErrorKind::Parse, std::to_string(r.remaining()) + " trailing bytes after ENC1 weights", "weights");
  }
  const Eigen::VectorXd flat = enc.flatten_parameters();
  if (!flat.allFinite()) throw Error(ErrorKind::InvariantViolation, "ENC1 weights are not finite", "weights");
  return enc;
}

void save_encoder(const TinyEncoder& enc, const std::filesystem::path& path) {
  detail::write_file_bytes(path.string(), encode_encoder(enc));
}

TinyEncoder load_encoder(const std::filesystem::path& path) {
  return decode_encoder(detail::read_file_bytes(path.string()));
}

// ---------------------------------------------------------------------------
// CSV

namespace {
std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}
}  // namespace

std::string curves_csv(const std::vector<CurveRow>& rows) {
  std::string out = "iteration,E_photo,E_land,E_reg,total\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + fmt(r.photo) + "," + fmt(r.land) + "," + fmt(r.reg) + "," +
           fmt(r.total) + "\n";
  }
  return out;
}

std::string validation_csv(const std::vector<ValidationRow>& rows) {
  std::string out = "iteration,photometric_rgb,landmark_px,E_photo\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + fmt(r.photometric_rgb) + "," + fmt(r.landmark_px) + "," +
           fmt(r.photo_loss) + "\n";
  }
  return out;
}

}  // namespace facecoder
