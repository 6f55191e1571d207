#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "facecoder/autodiff.hpp"
#include "facecoder/config.hpp"
#include "facecoder/dataset.hpp"
#include "facecoder/encoder.hpp"
#include "facecoder/face_model.hpp"
#include "facecoder/fit.hpp"
#include "facecoder/formation.hpp"
#include "facecoder/gradcheck.hpp"
#include "facecoder/io.hpp"

namespace facecoder::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return kExitUsage;
    case ErrorKind::Numerical:
    case ErrorKind::InitializationFailure: return kExitNumerical;
    default: return kExitData;
  }
}

namespace {

// Values shared by every subcommand.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

Config resolve_config(const Common& common) {
  Config c = common.config_path.empty() ? Config{} : load_config(common.config_path);
  if (common.seed) c.seed = *common.seed;
  if (common.threads) c.threads = *common.threads;
  if (c.threads < 1) throw_invalid_argument("--threads must be >= 1");
  c.fit.seed = c.seed;
  c.fit.weights = c.loss;
  c.train.seed = c.seed;
  c.train.weights = c.loss;
  c.train.threads = c.threads;
  return c;
}

std::string require_path(const std::string& flag_value, const std::string& config_value, const char* flag) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  throw_invalid_argument(std::string(flag) + " is required");
}

json loss_json(const LossBreakdown& l) {
  return {{"photo", l.photo}, {"land", l.land},   {"reg", l.reg},
          {"total", l.total}, {"visible", l.visible_count}};
}

json fd_json(const FdReport& r, double tolerance) {
  return {{"max_rel_error", r.max_rel_error},
          {"mean_rel_error", r.mean_rel_error},
          {"entries", r.entries},
          {"worst_row", r.worst_row},
          {"worst_param", r.worst_param},
          {"analytic_at_worst", r.analytic_at_worst},
          {"numeric_at_worst", r.numeric_at_worst},
          {"tolerance", tolerance},
          {"pass", r.max_rel_error < tolerance}};
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Gray Lambertian shading of the fitted geometry, lit from the camera.
Image geometry_shading(const FaceModel& model, const Camera& camera, const CodeVector& code) {
  RenderedFace r = forward(model, camera, code);
  const Points3 pos = evaluate_shape(model, code.alpha, code.delta);
  const Points3 normals = vertex_normals(model, pos);
  const Eigen::Matrix3d rt = euler_to_matrix(code.rotation).transpose();
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const Eigen::Vector3d n = rt * normals.row(i).transpose();
    const double shade = 0.15 + 0.75 * std::max(0.0, -n.z());
    r.color.row(i).setConstant(shade);
  }
  return rasterize(model, r, Image(camera.width, camera.height));
}

Image side_by_side(const std::vector<Image>& panels) {
  const int w = panels.front().width(), h = panels.front().height();
  Image out(w * static_cast<int>(panels.size()), h);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.set(static_cast<int>(p) * w + x, y, panels[p].at(x, y));
  }
  return out;
}

json fit_report_json(const FitReport& r, const FitConfig& config, bool with_landmarks) {
  json traj = json::array();
  for (const auto& l : r.trajectory) traj.push_back(l.total);
  json j;
  j["optimizer"] = to_string(config.optimizer);
  j["w_land"] = with_landmarks ? 1 : 0;
  j["iterations"] = r.iterations;
  j["best_iteration"] = r.best_iteration;
  j["converged"] = r.converged;
  j["initial_loss"] = loss_json(r.initial_loss);
  j["final_loss"] = loss_json(r.final_loss);
  j["photometric_rgb"] = r.photometric_rgb;
  j["landmark_error_px"] = r.landmark_error ? json(*r.landmark_error) : json(nullptr);
  j["loss_trajectory"] = traj;
  j["visible_counts"] = r.visible_counts;
  j["code"] = json::parse(encode_code_json(r.code));
  return j;
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenModelArgs {
  std::uint64_t seed = 0;
  std::uint32_t vertices = 1000;
  std::string out;
};

int gen_model(const GenModelArgs& a, std::ostream& out) {
  const FaceModel model = generate_synthetic_model(a.seed, a.vertices);
  save_model(model, a.out);
  out << "wrote " << a.out << " (" << model.n_vertices() << " vertices, " << model.triangles().size()
      << " triangles)\n";
  return kExitOk;
}

struct GenDatasetArgs {
  std::string model;
  std::size_t count = 100;
  std::string out;
};

int gen_dataset(const GenDatasetArgs& a, const Common& common, std::ostream& out) {
  const Config c = resolve_config(common);
  const FaceModel model = load_model(require_path(a.model, c.paths.model, "--model"));
  const std::string dir = require_path(a.out, c.paths.output, "--out");
  const Manifest m = generate_dataset(model, c.camera, c.sampler, a.count, c.seed, dir);
  out << "wrote " << m.entries.size() << " samples to " << dir << "\n";
  return kExitOk;
}

struct RenderArgs {
  std::string model;
  std::string code;
  std::string out;
  std::string manifest;
  std::optional<std::size_t> index;
};

int render(const RenderArgs& a, const Common& common, std::ostream& out) {
  const Config c = resolve_config(common);
  const FaceModel model = load_model(require_path(a.model, c.paths.model, "--model"));
  Camera camera = c.camera;
  Background background;
  CodeVector code;
  if (!a.manifest.empty()) {
    if (!a.index) throw_invalid_argument("--manifest needs --index");
    const Manifest m = read_manifest(a.manifest);
    if (*a.index >= m.entries.size()) throw_invalid_argument("--index beyond the manifest");
    camera = m.camera;
    background = m.entries[*a.index].background;
    const fs::path entry_code = fs::path(a.manifest).parent_path() / m.entries[*a.index].code;
    code = read_code_json(a.code.empty() ? entry_code : fs::path(a.code));
  } else {
    if (a.code.empty()) throw_invalid_argument("--code is required");
    code = read_code_json(a.code);
  }
  const std::string dest = require_path(a.out, c.paths.output, "--out");
  write_ppm(render_scene(model, camera, code, background), dest);
  out << "wrote " << dest << "\n";
  return kExitOk;
}

struct FitArgs {
  std::string model;
  std::string image;
  std::string landmarks;
  std::string report;
  std::string overlay;
};

int fit_command(const FitArgs& a, const Common& common, std::ostream& out) {
  Config c = resolve_config(common);
  const FaceModel model = load_model(require_path(a.model, c.paths.model, "--model"));
  const Image image = read_ppm(a.image);
  if (image.width() != c.camera.width || image.height() != c.camera.height) {
    throw Error(ErrorKind::InvariantViolation, "image is " + std::to_string(image.width()) + "x" +
                                                   std::to_string(image.height()) +
                                                   " but the camera expects " + std::to_string(c.camera.width) +
                                                   "x" + std::to_string(c.camera.height),
                "image");
  }
  std::optional<LandmarkSet> landmarks;
  if (!a.landmarks.empty()) landmarks = read_landmarks_json(a.landmarks);
  c.fit.weights.w_land = landmarks ? 1 : 0;
  const FitReport r = fit(model, c.camera, image, landmarks ? &*landmarks : nullptr, c.fit);
  const std::string dest = require_path(a.report, c.paths.output, "--out-report");
  write_text_file(dest, fit_report_json(r, c.fit, landmarks.has_value()).dump(1) + "\n");
  if (!a.overlay.empty()) {
    const Image rendered = rasterize(model, forward(model, c.camera, r.code), image);
    write_ppm(side_by_side({image, rendered, geometry_shading(model, c.camera, r.code)}), a.overlay);
  }
  out << "fit: " << r.iterations << " iterations, loss " << r.initial_loss.total << " -> "
      << r.final_loss.total << ", photometric " << r.photometric_rgb << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string model;
  std::string dataset;
  std::string weights_out;
  std::string curves;
  std::string validation_curves;
  std::string init_weights;
};

int train_command(const TrainArgs& a, const Common& common, std::ostream& out) {
  const Config c = resolve_config(common);
  const FaceModel model = load_model(require_path(a.model, c.paths.model, "--model"));
  const LoadedDataset data = load_dataset(require_path(a.dataset, c.paths.dataset, "--dataset"));
  const std::string weights_out = require_path(a.weights_out, c.paths.weights, "--out-weights");
  if (c.train.weights.w_land == 1) {
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      if (data.samples[i].landmarks.empty()) {
        throw Error(ErrorKind::InvalidArgument,
                    "loss.w_land = 1 but sample " + std::to_string(i) + " has no landmark file", "landmarks");
      }
    }
  }
  TinyEncoder enc = a.init_weights.empty() ? TinyEncoder::create(model, data.camera, c.seed)
                                           : load_encoder(a.init_weights);
  enc.attach(model, data.camera);
  const TrainResult r = train(enc, model, data, c.train, [&](const CurveRow& row) {
    out << "iteration " << row.iteration << " E_photo " << row.photo << " E_land " << row.land << " total "
        << row.total << "\n";
  });
  save_encoder(r.encoder, weights_out);
  if (!a.curves.empty()) write_text_file(a.curves, curves_csv(r.curve));
  if (!a.validation_curves.empty()) write_text_file(a.validation_curves, validation_csv(r.validation));
  if (!r.validation.empty()) {
    out << "validation photometric " << r.validation.front().photometric_rgb << " -> "
        << r.validation.back().photometric_rgb << ", landmark px " << r.validation.front().landmark_px << " -> "
        << r.validation.back().landmark_px << "\n";
  }
  out << "wrote " << weights_out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model;
  std::string dataset;
  std::string weights;
  std::string mode;
  std::string out;
  bool grad_check = false;
  std::size_t grad_configs = 10;
  std::size_t limit = 0;
};

int eval_grad_check(const EvalArgs& a, const Config& c, std::ostream& out) {
  const FaceModel model = load_model(require_path(a.model, c.paths.model, "--model"));
  GradCheckOptions o;
  o.seed = c.seed;
  o.jacobian_configs = a.grad_configs;
  o.gradient_configs = a.grad_configs;
  const FaceModel models[] = {model};
  const GradCheckSummary s = run_grad_check(models, c.camera, o);
  json j;
  j["configs"] = s.jacobian_configs;
  j["step"] = o.step;
  j["jacobian"] = fd_json(s.jacobian, kJacobianTolerance);
  j["jacobian"]["entries_over_tolerance"] = s.jacobian_entries_over;
  j["gradient_w_land0"] = fd_json(s.gradient[0], kGradientTolerance);
  j["gradient_w_land1"] = fd_json(s.gradient[1], kGradientTolerance);
  j["grid_redraws"] = s.redraws;
  j["pass"] = s.jacobian_pass() && s.gradient_pass();
  const std::string text = j.dump(1) + "\n";
  if (a.out.empty()) out << text;
  else write_text_file(a.out, text);
  return j["pass"].get<bool>() ? kExitOk : kExitNumerical;
}

int eval_command(const EvalArgs& a, const Common& common, std::ostream& out) {
  const Config c = resolve_config(common);
  if (a.grad_check) return eval_grad_check(a, c, out);

  std::string mode = a.mode.empty() ? (a.weights.empty() ? "fit" : "encoder") : a.mode;
  if (mode != "fit" && mode != "encoder" && mode != "truth" && mode != "init") {
    throw_invalid_argument("--mode must be fit, encoder, truth or init");
  }
  const std::string weights_path = a.weights.empty() ? c.paths.weights : a.weights;
  if (mode == "encoder" && weights_path.empty()) throw_invalid_argument("encoder mode needs --weights");
  const FaceModel model = load_model(require_path(a.model, c.paths.model, "--model"));
  const LoadedDataset data = load_dataset(require_path(a.dataset, c.paths.dataset, "--dataset"));
  std::optional<TinyEncoder> enc;
  if (mode == "encoder") {
    enc = load_encoder(weights_path);
    enc->attach(model, data.camera);
  }
  const std::size_t n = a.limit ? std::min(a.limit, data.samples.size()) : data.samples.size();
  if (n == 0) throw_invalid_argument("dataset is empty");

  std::vector<double> geo, photo, land;
  for (std::size_t i = 0; i < n; ++i) {
    const Image image = data.image(i);
    const LoadedSample& s = data.samples[i];
    CodeVector estimate;
    if (mode == "truth") {
      estimate = s.code;
    } else if (mode == "init") {
      estimate = init_code(model, data.camera);
    } else if (mode == "encoder") {
      estimate = encoder_forward(*enc, image);
    } else {
      FitConfig fc = c.fit;
      fc.weights.w_land = s.landmarks.empty() ? 0 : 1;
      estimate = fit(model, data.camera, image, s.landmarks.empty() ? nullptr : &s.landmarks, fc).code;
    }
    const FitMetrics m = evaluate_fit(model, data.camera, estimate, s.code, image);
    geo.push_back(m.geometric_error);
    photo.push_back(m.photometric_rgb);
    land.push_back(m.landmark_error);
  }
  json j;
  j["mode"] = mode;
  j["samples"] = n;
  j["geometric_error_mm"] = {{"mean", mean_of(geo)}, {"median", median_of(geo)}};
  j["photometric_rgb"] = {{"mean", mean_of(photo)}, {"median", median_of(photo)}};
  j["landmark_error_px"] = {{"mean", mean_of(land)}, {"median", median_of(land)}};
  const std::string text = j.dump(1) + "\n";
  if (a.out.empty()) out << text;
  else write_text_file(a.out, text);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parametric face decoder: model generation, rendering, fitting and encoder training"};
  app.name(args.empty() ? "facecoder" : args.front());
  app.require_subcommand(1);

  Common common;
  app.add_option("--threads", common.threads, "Cap on worker threads")->check(CLI::PositiveNumber);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key = value configuration file");
    sub->add_option("--seed", common.seed, "Root seed (overrides the config)");
  };

  GenModelArgs gm;
  auto* s_gen_model = app.add_subcommand("gen-model", "Write a synthetic MFM1 face model");
  s_gen_model->add_option("--seed", gm.seed, "Generator seed");
  s_gen_model->add_option("--vertices", gm.vertices, "Vertex count (>= 46)");
  s_gen_model->add_option("--out", gm.out, "Output .mfm path")->required();

  GenDatasetArgs gd;
  auto* s_gen_dataset = app.add_subcommand("gen-dataset", "Render a synthetic dataset with known codes");
  add_common(s_gen_dataset);
  s_gen_dataset->add_option("--model", gd.model, "MFM1 model");
  s_gen_dataset->add_option("--count", gd.count, "Number of images");
  s_gen_dataset->add_option("--out", gd.out, "Output directory");

  RenderArgs ra;
  auto* s_render = app.add_subcommand("render", "Render a code vector to PPM");
  add_common(s_render);
  s_render->add_option("--model", ra.model, "MFM1 model");
  s_render->add_option("--code", ra.code, "Code JSON");
  s_render->add_option("--out", ra.out, "Output .ppm");
  s_render->add_option("--manifest", ra.manifest, "Take camera and background from a dataset manifest");
  s_render->add_option("--index", ra.index, "Manifest entry");

  FitArgs fa;
  auto* s_fit = app.add_subcommand("fit", "Fit the model to one image");
  add_common(s_fit);
  s_fit->add_option("--model", fa.model, "MFM1 model");
  s_fit->add_option("--image", fa.image, "Input PPM")->required();
  s_fit->add_option("--landmarks", fa.landmarks, "Landmark JSON; enables the landmark term");
  s_fit->add_option("--out-report", fa.report, "FitReport JSON");
  s_fit->add_option("--overlay", fa.overlay, "Side-by-side PPM: input | model | geometry");

  TrainArgs ta;
  auto* s_train = app.add_subcommand("train", "Train the tiny encoder without supervision");
  add_common(s_train);
  s_train->add_option("--model", ta.model, "MFM1 model");
  s_train->add_option("--dataset", ta.dataset, "Dataset manifest.json");
  s_train->add_option("--out-weights", ta.weights_out, "ENC1 output");
  s_train->add_option("--curves", ta.curves, "Training curve CSV");
  s_train->add_option("--validation-curves", ta.validation_curves, "Validation curve CSV");
  s_train->add_option("--init-weights", ta.init_weights, "Resume from ENC1 weights");

  EvalArgs ea;
  auto* s_eval = app.add_subcommand("eval", "Dataset metrics, or the finite-difference suite");
  add_common(s_eval);
  s_eval->add_option("--model", ea.model, "MFM1 model");
  s_eval->add_option("--dataset", ea.dataset, "Dataset manifest.json");
  s_eval->add_option("--weights", ea.weights, "ENC1 weights (encoder mode)");
  s_eval->add_option("--mode", ea.mode, "fit, encoder, truth or init (default: encoder with --weights, else fit)");
  s_eval->add_option("--limit", ea.limit, "Evaluate only the first N samples");
  s_eval->add_flag("--grad-check", ea.grad_check, "Run the finite-difference suite instead");
  s_eval->add_option("--grad-configs", ea.grad_configs, "Random configurations for --grad-check");
  s_eval->add_option("--out", ea.out, "Output JSON (stdout when omitted)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s_gen_model->parsed()) return gen_model(gm, out);
    if (s_gen_dataset->parsed()) return gen_dataset(gd, common, out);
    if (s_render->parsed()) return render(ra, common, out);
    if (s_fit->parsed()) return fit_command(fa, common, out);
    if (s_train->parsed()) return train_command(ta, common, out);
    if (s_eval->parsed()) return eval_command(ea, common, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << (e.section().empty() ? "" : " [" + e.section() + "]") << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace facecoder::cli
