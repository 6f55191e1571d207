#include "facecoder/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include <json.hpp>

#include "binary_io.hpp"
#include "facecoder/errors.hpp"
#include "facecoder/fit.hpp"
#include "facecoder/io.hpp"
#include "facecoder/random.hpp"

namespace facecoder {

using nlohmann::json;

void SamplerConfig::validate() const {
  if (!(coefficient_std >= 0.0) || !(max_angle_deg >= 0.0) || !(translation_jitter >= 0.0) ||
      !(ambient_jitter >= 0.0) || !(band1_noise >= 0.0) || !(band2_noise >= 0.0)) {
    throw_invalid_argument("sampler ranges must be non-negative");
  }
  if (!(translation_jitter < 1.0)) throw_invalid_argument("translation_jitter must be < 1");
}

Image Background::render(int width, int height) const {
  Image img(width, height);
  const double sx = width > 1 ? 1.0 / (width - 1) : 0.0;
  const double sy = height > 1 ? 1.0 / (height - 1) : 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) img.set(x, y, base + dx * (x * sx) + dy * (y * sy));
  }
  return img;
}

CodeVector sample_code(const FaceModel& model, const Camera& camera, const SamplerConfig& config,
                       std::mt19937_64& rng) {
  config.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  CodeVector x;
  for (auto& v : x.alpha) v = config.coefficient_std * normal(rng);
  for (auto& v : x.delta) v = config.coefficient_std * normal(rng);
  for (auto& v : x.beta) v = config.coefficient_std * normal(rng);
  const double max_angle = config.max_angle_deg * std::numbers::pi / 180.0;
  for (auto& v : x.rotation) v = max_angle * unit(rng);

  const double d = framing_distance(model, camera);
  const double r = model.bounding_radius();
  const double j = config.translation_jitter;
  const Eigen::Vector3d offset(j * r * unit(rng), j * r * unit(rng), d * (1.0 + j * unit(rng)));
  set_pivot_offset(x, pose_pivot(model), offset);

  for (int c = 0; c < 3; ++c) x.gamma(c) = config.ambient + config.ambient_jitter * unit(rng);
  // Higher bands share one light across channels, scaled by each channel's ambient.
  for (int b = 1; b < kShBands; ++b) {
    const double amp = b < 4 ? config.band1_noise : config.band2_noise;
    const double v = amp * unit(rng);
    for (int c = 0; c < 3; ++c) x.gamma(3 * b + c) = v * x.gamma(c) / config.ambient;
  }
  return x;
}

Image render_scene(const FaceModel& model, const Camera& camera, const CodeVector& code,
                   const Background& background) {
  const RenderedFace rendered = forward(model, camera, code);
  return quantize_8bit(rasterize(model, rendered, background.render(camera.width, camera.height)));
}

LandmarkSet project_landmarks(const FaceModel& model, const Camera& camera, const CodeVector& code) {
  const RenderedFace rendered = forward(model, camera, code);
  LandmarkSet out;
  out.reserve(kLandmarkCount);
  for (auto k : model.landmark_indices()) {
    Landmark l;
    l.vertex = k;
    l.confidence = 1.0;
    l.position = rendered.screen_pos.row(k).transpose();
    out.push_back(l);
  }
  return out;
}

SyntheticSample make_sample(const FaceModel& model, const Camera& camera, const SamplerConfig& config,
                            std::uint64_t seed, std::uint64_t index) {
  auto rng = make_stream(seed, kStreamDataset + index);
  SyntheticSample s;
  s.code = sample_code(model, camera, config, rng);
  if (config.gradient_background) {
    std::uniform_real_distribution<double> base(0.1, 0.6), slope(-0.2, 0.2);
    for (int c = 0; c < 3; ++c) s.background.base(c) = base(rng);
    for (int c = 0; c < 3; ++c) s.background.dx(c) = slope(rng);
    for (int c = 0; c < 3; ++c) s.background.dy(c) = slope(rng);
  }
  s.image = render_scene(model, camera, s.code, s.background);
  s.landmarks = project_landmarks(model, camera, s.code);
  for (const auto& l : s.landmarks) {
    if (!l.position.allFinite() || !in_sample_domain(camera, l.position)) {
      throw Error(ErrorKind::InvariantViolation,
                  "sample " + std::to_string(index) + ": landmark on vertex " + std::to_string(l.vertex) +
                      " falls outside the image",
                  "landmarks");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d json_vec(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 3) {
    throw Error(ErrorKind::Parse, std::string("'") + key + "' must be an array of 3 numbers", key);
  }
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j.at(key)[i].is_number()) throw Error(ErrorKind::Parse, std::string("'") + key + "' holds a non-number", key);
    v(i) = j.at(key)[i].get<double>();
  }
  return v;
}

const json& member(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorKind::Parse, std::string("missing key '") + key + "'", key);
  return j.at(key);
}

std::string entry_name(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu.%s", prefix, i, ext);
  return buf;
}

}  // namespace

std::string encode_manifest_json(const Manifest& manifest) {
  json j;
  j["format"] = "facecoder-dataset";
  j["version"] = 1;
  j["seed"] = manifest.seed;
  j["camera"] = {{"focal_length", manifest.camera.focal_length},
                 {"principal_point", {manifest.camera.principal_point.x(), manifest.camera.principal_point.y()}},
                 {"width", manifest.camera.width},
                 {"height", manifest.camera.height}};
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"image", e.image},
                       {"code", e.code},
                       {"landmarks", e.landmarks},
                       {"background",
                        {{"base", vec_json(e.background.base)},
                         {"dx", vec_json(e.background.dx)},
                         {"dy", vec_json(e.background.dy)}}}});
  }
  j["entries"] = std::move(entries);
  return j.dump(1) + "\n";
}

Manifest decode_manifest_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("manifest JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "facecoder-dataset") {
    throw Error(ErrorKind::Parse, "not a facecoder dataset manifest", "format");
  }
  if (member(j, "version") != 1) throw Error(ErrorKind::Parse, "unsupported manifest version", "version");
  Manifest m;
  try {
    m.seed = member(j, "seed").get<std::uint64_t>();
    const json& cam = member(j, "camera");
    m.camera.focal_length = member(cam, "focal_length").get<double>();
    const json& pp = member(cam, "principal_point");
    if (!pp.is_array() || pp.size() != 2) throw Error(ErrorKind::Parse, "bad principal_point", "principal_point");
    m.camera.principal_point = {pp[0].get<double>(), pp[1].get<double>()};
    m.camera.width = member(cam, "width").get<int>();
    m.camera.height = member(cam, "height").get<int>();
    for (const auto& e : member(j, "entries")) {
      ManifestEntry me;
      me.image = member(e, "image").get<std::string>();
      me.code = member(e, "code").get<std::string>();
      me.landmarks = member(e, "landmarks").get<std::string>();
      const json& bg = member(e, "background");
      me.background.base = json_vec(bg, "base");
      me.background.dx = json_vec(bg, "dx");
      me.background.dy = json_vec(bg, "dy");
      m.entries.push_back(std::move(me));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("manifest JSON: ") + e.what());
  }
  m.camera.validate();
  return m;
}

Manifest read_manifest(const std::filesystem::path& path) { return decode_manifest_json(read_text_file(path)); }

Manifest generate_dataset(const FaceModel& model, const Camera& camera, const SamplerConfig& config,
                          std::size_t count, std::uint64_t seed, const std::filesystem::path& out_dir) {
  camera.validate();
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  Manifest m;
  m.seed = seed;
  m.camera = camera;
  for (std::size_t i = 0; i < count; ++i) {
    const SyntheticSample s = make_sample(model, camera, config, seed, i);
    ManifestEntry e{entry_name("image", i, "ppm"), entry_name("code", i, "json"),
                    entry_name("landmarks", i, "json"), s.background};
    write_ppm(s.image, out_dir / e.image);
    write_code_json(s.code, out_dir / e.code);
    write_landmarks_json(s.landmarks, out_dir / e.landmarks);
    m.entries.push_back(std::move(e));
  }
  write_text_file(out_dir / "manifest.json", encode_manifest_json(m));
  return m;
}

// ---------------------------------------------------------------------------
// In-memory datasets

namespace {

std::vector<std::uint8_t> to_bytes(const Image& image) {
  std::vector<std::uint8_t> out;
  out.reserve(image.pixels().size());
  for (float v : image.pixels()) out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
  return out;
}

}  // namespace

Image LoadedDataset::image(std::size_t i) const {
  Image img(camera.width, camera.height);
  auto px = img.mutable_pixels();
  const auto& src = samples.at(i).pixels;
  for (std::size_t k = 0; k < src.size(); ++k) px[k] = static_cast<float>(src[k]) / 255.0f;
  return img;
}

LoadedDataset load_dataset(const std::filesystem::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  const auto dir = manifest_path.parent_path();
  LoadedDataset d;
  d.camera = m.camera;
  for (const auto& e : m.entries) {
    LoadedSample s;
    const Image img = read_ppm(dir / e.image);
    if (img.width() != m.camera.width || img.height() != m.camera.height) {
      throw Error(ErrorKind::Parse, e.image + " does not match the manifest camera size", "image");
    }
    s.pixels = to_bytes(img);
    s.code = read_code_json(dir / e.code);
    if (!e.landmarks.empty() && std::filesystem::exists(dir / e.landmarks)) {
      s.landmarks = read_landmarks_json(dir / e.landmarks);
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

LoadedDataset synthesize_dataset(const FaceModel& model, const Camera& camera, const SamplerConfig& config,
                                 std::size_t count, std::uint64_t seed) {
  LoadedDataset d;
  d.camera = camera;
  d.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticSample s = make_sample(model, camera, config, seed, i);
    d.samples.push_back({to_bytes(s.image), s.code, std::move(s.landmarks)});
  }
  return d;
}

}  // namespace facecoder
