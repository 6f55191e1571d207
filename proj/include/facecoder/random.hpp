#pragma once

#include <cstdint>
#include <random>

namespace facecoder {

/// Derives an independent generator for one consumer of a seeded run.
///
/// Every invocation has one seed. Each consumer (a dataset image, a training
/// shuffle, weight initialization) asks for its own numbered stream, so adding
/// a consumer never shifts the draws of another. Stream numbers in use:
///   dataset image k          -> kStreamDataset + k
///   encoder initialization   -> kStreamEncoderInit
///   training batch order     -> kStreamTrainOrder
///   gradient-check configs   -> kStreamGradCheck + k
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

inline constexpr std::uint64_t kStreamEncoderInit = 1;
inline constexpr std::uint64_t kStreamTrainOrder = 2;
inline constexpr std::uint64_t kStreamGradCheck = 1ull << 32;
inline constexpr std::uint64_t kStreamDataset = 1ull << 40;

}  // namespace facecoder
