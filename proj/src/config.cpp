#include "facecoder/config.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "facecoder/errors.hpp"
#include "facecoder/io.hpp"

namespace facecoder {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorKind::Parse, "value '" + value + "' of " + key + " is not " + expected, key);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "true or false");
}

// Shortest text that parses back to the same double.
std::string show(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct Key {
  std::string name;
  std::string doc;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::vector<Key> registry(Config& c) {
  std::vector<Key> keys;
  auto num = [&](std::string name, std::string doc, double& field) {
    keys.push_back({name, std::move(doc), [&field, name](const std::string& v) { field = parse_double(name, v); },
                    [&field] { return show(field); }});
  };
  auto integer = [&](std::string name, std::string doc, int& field) {
    keys.push_back({name, std::move(doc), [&field, name](const std::string& v) { field = parse_int<int>(name, v); },
                    [&field] { return std::to_string(field); }});
  };
  auto flag = [&](std::string name, std::string doc, bool& field) {
    keys.push_back({name, std::move(doc), [&field, name](const std::string& v) { field = parse_bool(name, v); },
                    [&field] { return std::string(field ? "true" : "false"); }});
  };
  auto text = [&](std::string name, std::string doc, std::string& field) {
    keys.push_back({name, std::move(doc), [&field](const std::string& v) { field = v; }, [&field] { return field; }});
  };

  keys.push_back({"seed", "root seed of every random stream",
                  [&c](const std::string& v) { c.seed = parse_int<std::uint64_t>("seed", v); },
                  [&c] { return std::to_string(c.seed); }});
  integer("threads", "worker cap for per-sample work inside a training batch", c.threads);

  num("camera.focal_length", "pixels", c.camera.focal_length);
  num("camera.principal_x", "pixels", c.camera.principal_point.x());
  num("camera.principal_y", "pixels", c.camera.principal_point.y());
  integer("camera.width", "pixels", c.camera.width);
  integer("camera.height", "pixels", c.camera.height);

  num("loss.w_photo", "photometric weight", c.loss.w_photo);
  num("loss.w_reg", "regularizer weight", c.loss.w_reg);
  integer("loss.w_land", "0 or 1; training only, fit sets it from --landmarks", c.loss.w_land);
  num("loss.w_beta", "reflectance weight inside the regularizer", c.loss.w_beta);
  num("loss.w_delta", "expression weight inside the regularizer", c.loss.w_delta);
  num("loss.l21_epsilon", "smoothing of the per-vertex residual norm", c.loss.l21_epsilon);
  keys.push_back({"loss.normalization", "total (divide by all vertices) or visible (divide by |V|)",
                  [&c](const std::string& v) {
                    if (v == "total") c.loss.normalization = PhotoNormalization::TotalVertices;
                    else if (v == "visible") c.loss.normalization = PhotoNormalization::VisibleVertices;
                    else bad_value("loss.normalization", v, "total or visible");
                  },
                  [&c] {
                    return std::string(c.loss.normalization == PhotoNormalization::TotalVertices ? "total"
                                                                                                  : "visible");
                  }});

  keys.push_back({"fit.optimizer", "lbfgs, gd_linesearch or adadelta",
                  [&c](const std::string& v) {
                    try {
                      c.fit.optimizer = optimizer_from_string(v);
                    } catch (const Error&) {
                      bad_value("fit.optimizer", v, "lbfgs, gd_linesearch or adadelta");
                    }
                  },
                  [&c] { return to_string(c.fit.optimizer); }});
  integer("fit.max_iterations", "", c.fit.max_iterations);
  num("fit.base_rate", "adadelta rate of every coordinate but depth", c.fit.base_rate);
  num("fit.z_translation_rate", "adadelta rate of the head depth", c.fit.z_translation_rate);
  num("fit.adadelta_rho", "", c.fit.adadelta_rho);
  num("fit.adadelta_eps", "", c.fit.adadelta_eps);
  num("fit.convergence_tol", "relative loss change over the window", c.fit.convergence_tol);
  integer("fit.convergence_window", "iterations", c.fit.convergence_window);
  integer("fit.preconditioner_interval", "iterations between Gauss-Newton diagonal refreshes",
          c.fit.preconditioner_interval);
  integer("fit.pose_warmup_iterations", "leading iterations that move only pose and light",
          c.fit.pose_warmup_iterations);

  integer("train.batch_size", "", c.train.batch_size);
  integer("train.iterations", "batch iterations", c.train.iterations);
  num("train.base_rate", "adadelta rate of every weight but the depth output row", c.train.base_rate);
  num("train.z_translation_rate", "adadelta rate of the depth output row", c.train.z_translation_rate);
  num("train.adadelta_rho", "", c.train.adadelta_rho);
  num("train.adadelta_eps", "", c.train.adadelta_eps);
  num("train.validation_fraction", "tail of the dataset held out", c.train.validation_fraction);
  integer("train.log_interval", "iterations per curve row", c.train.log_interval);
  integer("train.validation_interval", "iterations between validation passes", c.train.validation_interval);

  num("sampler.coefficient_std", "std of shape, expression and reflectance coefficients",
      c.sampler.coefficient_std);
  num("sampler.max_angle_deg", "each Euler angle uniform in +-max", c.sampler.max_angle_deg);
  num("sampler.translation_jitter", "head center offset as a fraction of radius and distance",
      c.sampler.translation_jitter);
  num("sampler.ambient", "band-0 light per channel", c.sampler.ambient);
  num("sampler.ambient_jitter", "uniform +- around the ambient level", c.sampler.ambient_jitter);
  num("sampler.band1_noise", "uniform +- on band-1 light", c.sampler.band1_noise);
  num("sampler.band2_noise", "uniform +- on band-2 light", c.sampler.band2_noise);
  flag("sampler.gradient_background", "random color ramp behind the face instead of black",
       c.sampler.gradient_background);

  text("paths.model", "used when --model is not given", c.paths.model);
  text("paths.dataset", "used when --dataset is not given", c.paths.dataset);
  text("paths.weights", "used when --weights is not given", c.paths.weights);
  text("paths.output", "used when the output flag is not given", c.paths.output);
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void Config::validate() const {
  if (threads < 1) throw_invalid_argument("threads must be >= 1");
  camera.validate();
  loss.validate();
  fit.validate();
  train.validate();
  sampler.validate();
}

Config parse_config(const std::string& text) {
  Config c;
  auto keys = registry(c);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected key = value", "line " +
                  std::to_string(line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = std::find_if(keys.begin(), keys.end(), [&](const Key& k) { return k.name == key; });
    if (it == keys.end()) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": unknown key '" + key + "'", key);
    }
    if (!seen.insert(key).second) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": key '" + key + "' repeated", key);
    }
    it->set(value);
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Parse, std::string("invalid configuration: ") + e.what(), "config");
  }
  return c;
}

Config load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

std::string default_config_text() {
  Config c;
  const auto keys = registry(c);
  std::string out;
  std::string section;
  for (const auto& k : keys) {
    const auto dot = k.name.find('.');
    const std::string sec = dot == std::string::npos ? "" : k.name.substr(0, dot);
    if (sec != section && !out.empty()) out += "\n";
    section = sec;
    const std::string value = k.get();
    out += k.name + " =" + (value.empty() ? "" : " " + value);
    if (!k.doc.empty()) out += "  # " + k.doc;
    out += "\n";
  }
  return out;
}

}  // namespace facecoder
