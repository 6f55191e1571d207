#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "facecoder/dataset.hpp"
#include "facecoder/face_model.hpp"
#include "facecoder/formation.hpp"
#include "facecoder/loss.hpp"
#include "facecoder/scene.hpp"

namespace facecoder {

inline constexpr int kEncoderInputSide = 48;
inline constexpr int kEncoderInputDim = kEncoderInputSide * kEncoderInputSide * 3;
inline constexpr int kEncoderHidden = 256;

/// Two-layer perceptron image → code.
///
///   a = W1·in + b1,  h = tanh(a),  out = W2·h + b2
///
/// `out` is a delta in head-centric coordinates (translation replaced by the
/// camera-space head center, see fit.hpp) added to the fixed offsets of
/// init_code. With W2 = 0 and b2 = 0 every input maps to init_code.
struct TinyEncoder {
  Eigen::MatrixXd w1;  // hidden × input
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // 257 × hidden
  Eigen::VectorXd b2;

  // Fixed, derived from the model and camera; not stored in ENC1.
  Eigen::VectorXd offsets;  // init_code in head-centric coordinates
  Eigen::Vector3d pivot = Eigen::Vector3d::Zero();

  /// Random first layer, zero output layer.
  static TinyEncoder create(const FaceModel& model, const Camera& camera, std::uint64_t seed);

  /// Recomputes offsets and pivot for a model and camera.
  void attach(const FaceModel& model, const Camera& camera);

  std::size_t parameter_count() const;
  Eigen::VectorXd flatten_parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  /// Equality of the stored weights (offsets are not compared).
  bool same_weights(const TinyEncoder& other) const;
};

/// Area-averaged 48×48 RGB input in [0, 1], flattened row-major (x fastest,
/// channels interleaved).
Eigen::VectorXd encoder_input(const Image& image);

struct EncoderActivations {
  Eigen::VectorXd input;
  Eigen::VectorXd hidden;
  Eigen::VectorXd output;  // head-centric code = offsets + W2·h + b2
};

EncoderActivations encoder_activations(const TinyEncoder& enc, const Eigen::VectorXd& input);
CodeVector encoder_forward(const TinyEncoder& enc, const Image& image);

/// Gradients of a scalar objective with respect to every weight, given
/// ∂E/∂output in head-centric coordinates.
struct EncoderGradient {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  void set_zero_like(const TinyEncoder& enc);
  Eigen::VectorXd flatten() const;
};

void encoder_backward(const TinyEncoder& enc, const EncoderActivations& act, const Eigen::VectorXd& d_output,
                      EncoderGradient& accumulate);

/// E_loss of one sample and its gradient with respect to the weights.
struct SampleLoss {
  LossBreakdown loss;
  Eigen::VectorXd d_output;  // ∂E/∂output
};

SampleLoss sample_loss(const TinyEncoder& enc, const EncoderActivations& act, const FaceModel& model,
                       const Camera& camera, const Image& image, const LandmarkSet* landmarks,
                       const LossWeights& weights);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int batch_size = 5;
  int iterations = 20000;
  double base_rate = 0.1;
  double z_translation_rate = 0.0005;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  LossWeights weights;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  int log_interval = 100;
  int validation_interval = 1000;
  int threads = 1;

  void validate() const;
};

struct CurveRow {
  int iteration = 0;
  double photo = 0.0;  // means over the batches since the previous row
  double land = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

struct ValidationRow {
  int iteration = 0;
  double photometric_rgb = 0.0;  // mean per-vertex RGB distance
  double landmark_px = 0.0;      // mean landmark pixel distance
  double photo_loss = 0.0;       // mean E_photo
};

struct TrainResult {
  TinyEncoder encoder;
  std::vector<CurveRow> curve;
  std::vector<ValidationRow> validation;
};

/// Splits the dataset into training and validation parts (validation is the
/// tail) and runs AdaDelta over shuffled batches. Validation runs at
/// iteration 0, every validation_interval iterations and at the end.
TrainResult train(TinyEncoder encoder, const FaceModel& model, const LoadedDataset& dataset,
                  const TrainConfig& config, const std::function<void(const CurveRow&)>& on_log = {});

/// Metrics of an encoder over dataset samples [begin, end).
ValidationRow evaluate_encoder(const TinyEncoder& enc, const FaceModel& model, const LoadedDataset& dataset,
                               std::size_t begin, std::size_t end, const LossWeights& weights);

std::size_t validation_start(std::size_t n_samples, double fraction);

// ENC1 binary format; see docs/formats.md.
std::vector<std::uint8_t> encode_encoder(const TinyEncoder& enc);
TinyEncoder decode_encoder(std::span<const std::uint8_t> bytes);
void save_encoder(const TinyEncoder& enc, const std::filesystem::path& path);
TinyEncoder load_encoder(const std::filesystem::path& path);

std::string curves_csv(const std::vector<CurveRow>& rows);
std::string validation_csv(const std::vector<ValidationRow>& rows);

}  // namespace facecoder
