#include <string>

#include <doctest.h>

#include "facecoder/config.hpp"
#include "facecoder/io.hpp"
#include "support/testing.hpp"

using namespace facecoder;

namespace {

std::string section_of_parse_error(const std::string& text) {
  const auto e = testing::error_of([&] { parse_config(text); });
  REQUIRE(e.has_value());
  CHECK(e->kind() == ErrorKind::Parse);
  return e->section();
}

// The first fenced block after the "Defaults" heading.
std::string documented_defaults() {
  const std::string doc = read_text_file(std::string(FACECODER_SOURCE_DIR) + "/docs/config.md");
  const auto heading = doc.find("## Defaults");
  REQUIRE(heading != std::string::npos);
  const auto open = doc.find("```\n", heading);
  const auto close = doc.find("```", open + 4);
  REQUIRE(close != std::string::npos);
  return doc.substr(open + 4, close - open - 4);
}

}  // namespace

TEST_CASE("documented defaults match the library") { CHECK(documented_defaults() == default_config_text()); }

TEST_CASE("default text parses back to the defaults") {
  const Config c = parse_config(default_config_text());
  const Config d;
  CHECK(c.seed == d.seed);
  CHECK(c.camera == d.camera);
  CHECK(c.loss.w_photo == 1.92);
  CHECK(c.loss.w_reg == 2.9e-5);
  CHECK(c.loss.w_beta == 1.7e-3);
  CHECK(c.loss.w_delta == 0.8);
  CHECK(c.loss.w_land == 0);
  CHECK(c.fit.optimizer == d.fit.optimizer);
  CHECK(c.fit.max_iterations == d.fit.max_iterations);
  CHECK(c.train.base_rate == 0.1);
  CHECK(c.train.z_translation_rate == 0.0005);
  CHECK(c.train.iterations == d.train.iterations);
  CHECK(c.sampler.max_angle_deg == d.sampler.max_angle_deg);
  CHECK(c.paths.model.empty());
  CHECK(parse_config("").train.batch_size == d.train.batch_size);
}

TEST_CASE("values, comments and whitespace") {
  const Config c = parse_config(
      "# header comment\n"
      "seed = 42\n"
      "  camera.focal_length=450.5   # trailing comment\n"
      "\n"
      "loss.normalization = visible\n"
      "fit.optimizer = adadelta\n"
      "sampler.gradient_background = true\n"
      "paths.model = /tmp/m.mfm\r\n");
  CHECK(c.seed == 42u);
  CHECK(c.camera.focal_length == 450.5);
  CHECK(c.loss.normalization == PhotoNormalization::VisibleVertices);
  CHECK(c.fit.optimizer == Optimizer::AdaDelta);
  CHECK(c.sampler.gradient_background);
  CHECK(c.paths.model == "/tmp/m.mfm");
}

TEST_CASE("bad keys and values are parse errors naming the key") {
  CHECK(section_of_parse_error("camera.focal = 3\n") == "camera.focal");
  CHECK(section_of_parse_error("seed = 1\nseed = 2\n") == "seed");
  CHECK(section_of_parse_error("train.batch_size = five\n") == "train.batch_size");
  CHECK(section_of_parse_error("train.batch_size = 5.5\n") == "train.batch_size");
  CHECK(section_of_parse_error("loss.w_photo = 1.9x\n") == "loss.w_photo");
  CHECK(section_of_parse_error("sampler.gradient_background = yes\n") == "sampler.gradient_background");
  CHECK(section_of_parse_error("loss.normalization = mean\n") == "loss.normalization");
  CHECK(section_of_parse_error("fit.optimizer = sgd\n") == "fit.optimizer");
  CHECK(section_of_parse_error("seed = -1\n") == "seed");
  CHECK(section_of_parse_error("seed 1\n") == "line 1");
  CHECK(section_of_parse_error("train.batch_size = 0\n") == "config");
  CHECK(section_of_parse_error("camera.width = -3\n") == "config");
}

TEST_CASE("load_config reads files") {
  const auto dir = testing::scratch_dir("config_load");
  write_text_file(dir / "run.cfg", "threads = 3\ntrain.iterations = 7\n");
  const Config c = load_config(dir / "run.cfg");
  CHECK(c.threads == 3);
  CHECK(c.train.iterations == 7);
  CHECK_ERROR_KIND(load_config(dir / "missing.cfg"), ErrorKind::Io);
}
