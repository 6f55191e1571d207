#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "facecoder/dataset.hpp"
#include "facecoder/encoder.hpp"
#include "facecoder/fit.hpp"
#include "facecoder/loss.hpp"
#include "facecoder/scene.hpp"

namespace facecoder {

/// Run configuration read from a flat `key = value` file with dotted
/// sections (`camera.focal_length = 500`). `#` starts a comment. Unknown keys,
/// repeated keys and malformed values are Parse errors naming the key.
struct Config {
  std::uint64_t seed = 0;
  int threads = 1;
  Camera camera;
  LossWeights loss;  // copied into fit and train by the CLI
  FitConfig fit;
  TrainConfig train;
  SamplerConfig sampler;
  struct Paths {
    std::string model;
    std::string dataset;
    std::string weights;
    std::string output;
  } paths;

  void validate() const;
};

Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

/// Every key with its default value, in the file format.
std::string default_config_text();

}  // namespace facecoder
