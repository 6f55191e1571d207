#include "facecoder/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "facecoder/errors.hpp"

namespace facecoder {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// PPM

namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

class PpmHeaderReader {
 public:
  explicit PpmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int number(const char* field) {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > 1 << 20) throw Error(ErrorKind::Parse, std::string("PPM ") + field + " too large", "header");
      ++digits;
    }
    if (digits == 0) {
      if (pos_ >= bytes_.size()) throw Error(ErrorKind::Truncated, std::string("PPM missing ") + field, "header");
      throw Error(ErrorKind::Parse, std::string("PPM ") + field + " is not a number", "header");
    }
    return static_cast<int>(value);
  }

  std::size_t& pos() { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  if (image.empty()) throw_invalid_argument("cannot encode an empty image");
  const std::string header =
      "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixels().size());
  for (float v : image.pixels()) out.push_back(to_byte(v));
  return out;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) throw Error(ErrorKind::Truncated, "PPM shorter than its magic", "header");
  if (bytes[0] != 'P' || bytes[1] != '6') throw Error(ErrorKind::MagicMismatch, "not a binary PPM (P6)", "header");
  PpmHeaderReader r(bytes.subspan(2));
  const int width = r.number("width");
  const int height = r.number("height");
  const int maxval = r.number("maxval");
  if (width <= 0 || height <= 0) throw Error(ErrorKind::Parse, "PPM dimensions must be positive", "header");
  if (maxval != 255) throw Error(ErrorKind::Parse, "only maxval 255 is supported", "header");
  std::size_t pos = 2 + r.pos();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorKind::Truncated, "PPM header not terminated", "header");
  }
  ++pos;
  const std::size_t need = 3 * static_cast<std::size_t>(width) * height;
  if (bytes.size() - pos < need) throw Error(ErrorKind::Truncated, "PPM pixel data truncated", "pixels");
  if (bytes.size() - pos > need) throw Error(ErrorKind::Parse, "trailing bytes after PPM pixel data", "pixels");
  Image img(width, height);
  auto px = img.mutable_pixels();
  for (std::size_t i = 0; i < need; ++i) px[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
  return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_ppm(image));
}

Image read_ppm(const std::filesystem::path& path) { return decode_ppm(detail::read_file_bytes(path)); }

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (float& v : out.mutable_pixels()) v = static_cast<float>(to_byte(v)) / 255.0f;
  return out;
}

// ---------------------------------------------------------------------------
// Code vector JSON

namespace {

template <class Vec>
json to_array(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <class Vec>
void from_array(const json& obj, const char* key, Vec& out) {
  if (!obj.contains(key)) throw Error(ErrorKind::Parse, std::string("missing key '") + key + "'", key);
  const json& a = obj.at(key);
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != out.size()) {
    throw Error(ErrorKind::Parse,
                std::string("'") + key + "' must be an array of " + std::to_string(out.size()) + " numbers", key);
  }
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const json& v = a[static_cast<std::size_t>(i)];
    if (!v.is_number()) throw Error(ErrorKind::Parse, std::string("'") + key + "' holds a non-number", key);
    out(i) = v.get<double>();
  }
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string encode_code_json(const CodeVector& code) {
  json j;
  j["alpha"] = to_array(code.alpha);
  j["delta"] = to_array(code.delta);
  j["beta"] = to_array(code.beta);
  j["rotation"] = to_array(code.rotation);
  j["translation"] = to_array(code.translation);
  j["gamma"] = to_array(code.gamma);
  return j.dump(1) + "\n";
}

CodeVector decode_code_json(const std::string& text) {
  const json j = parse_json(text, "code JSON");
  if (!j.is_object()) throw Error(ErrorKind::Parse, "code JSON must be an object");
  static const char* kKeys[] = {"alpha", "delta", "beta", "rotation", "translation", "gamma"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) ==
        std::end(kKeys)) {
      throw Error(ErrorKind::Parse, "unknown key '" + key + "'", key);
    }
  }
  CodeVector x;
  from_array(j, "alpha", x.alpha);
  from_array(j, "delta", x.delta);
  from_array(j, "beta", x.beta);
  from_array(j, "rotation", x.rotation);
  from_array(j, "translation", x.translation);
  from_array(j, "gamma", x.gamma);
  return x;
}

void write_code_json(const CodeVector& code, const std::filesystem::path& path) {
  write_text_file(path, encode_code_json(code));
}

CodeVector read_code_json(const std::filesystem::path& path) { return decode_code_json(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Landmark JSON

std::string encode_landmarks_json(const LandmarkSet& landmarks) {
  json a = json::array();
  for (std::size_t j = 0; j < landmarks.size(); ++j) {
    const auto& l = landmarks[j];
    a.push_back({{"index", j},
                 {"x", l.position.x()},
                 {"y", l.position.y()},
                 {"confidence", l.confidence},
                 {"vertex_index", l.vertex}});
  }
  return a.dump(1) + "\n";
}

LandmarkSet decode_landmarks_json(const std::string& text) {
  const json a = parse_json(text, "landmark JSON");
  if (!a.is_array()) throw Error(ErrorKind::Parse, "landmark JSON must be an array");
  LandmarkSet out(a.size());
  std::vector<bool> seen(a.size(), false);
  for (const auto& e : a) {
    auto number = [&](const char* key) {
      if (!e.is_object() || !e.contains(key) || !e.at(key).is_number()) {
        throw Error(ErrorKind::Parse, std::string("landmark entry needs numeric '") + key + "'", key);
      }
      return e.at(key);
    };
    const json& idx = number("index");
    const json& vtx = number("vertex_index");
    if (!idx.is_number_unsigned() && !(idx.is_number_integer() && idx.get<long long>() >= 0)) {
      throw Error(ErrorKind::Parse, "'index' must be a non-negative integer", "index");
    }
    if (!vtx.is_number_unsigned() && !(vtx.is_number_integer() && vtx.get<long long>() >= 0)) {
      throw Error(ErrorKind::Parse, "'vertex_index' must be a non-negative integer", "vertex_index");
    }
    const auto j = idx.get<std::size_t>();
    if (j >= out.size() || seen[j]) throw Error(ErrorKind::Parse, "landmark indices must be 0..n-1", "index");
    seen[j] = true;
    out[j].position = {number("x").get<double>(), number("y").get<double>()};
    out[j].confidence = number("confidence").get<double>();
    const auto v = vtx.get<std::uint64_t>();
    if (v > 0xffffffffu) throw Error(ErrorKind::Parse, "'vertex_index' out of range", "vertex_index");
    out[j].vertex = static_cast<std::uint32_t>(v);
  }
  return out;
}

void write_landmarks_json(const LandmarkSet& landmarks, const std::filesystem::path& path) {
  write_text_file(path, encode_landmarks_json(landmarks));
}

LandmarkSet read_landmarks_json(const std::filesystem::path& path) {
  return decode_landmarks_json(read_text_file(path));
}

}  // namespace facecoder
