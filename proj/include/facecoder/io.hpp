#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "facecoder/face_model.hpp"
#include "facecoder/formation.hpp"
#include "facecoder/loss.hpp"

namespace facecoder {

// Binary PPM (P6, maxval 255). Channel values are stored as round(255·v)
// with no gamma curve; reading yields v = byte / 255.
std::vector<std::uint8_t> encode_ppm(const Image& image);
Image decode_ppm(std::span<const std::uint8_t> bytes);
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

/// Rounds every channel to the nearest 8-bit level, so the result survives a
/// PPM round trip unchanged.
Image quantize_8bit(const Image& image);

// Code vector JSON: {"alpha": [...], "delta": [...], "beta": [...],
// "rotation": [...], "translation": [...], "gamma": [...]}.
std::string encode_code_json(const CodeVector& code);
CodeVector decode_code_json(const std::string& text);
void write_code_json(const CodeVector& code, const std::filesystem::path& path);
CodeVector read_code_json(const std::filesystem::path& path);

// Landmark JSON: [{"index": j, "x": .., "y": .., "confidence": .., "vertex_index": k}, ...].
std::string encode_landmarks_json(const LandmarkSet& landmarks);
LandmarkSet decode_landmarks_json(const std::string& text);
void write_landmarks_json(const LandmarkSet& landmarks, const std::filesystem::path& path);
LandmarkSet read_landmarks_json(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace facecoder
