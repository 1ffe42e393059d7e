#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rcd/tensor.hpp"

namespace rcd {

/// Loads an 8-bit PNG (gray, gray+alpha, RGB, RGBA or palette) or a binary
/// PGM. Values are scaled to [0, 1]; alpha is dropped. Gray files load as one
/// channel, colour files as three.
FeatureMaps load_image(const std::filesystem::path& path);

/// Saves 1- or 3-channel maps as an 8-bit PNG (or PGM for a .pgm suffix),
/// clamping to [0, 1] and rounding to the nearest level.
void save_image(const std::filesystem::path& path, const FeatureMaps& maps);

/// Image files (.png, .pgm) directly inside `dir`, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Gaussian white noise blurred with a gaussian of standard deviation
/// `smoothness` pixels (0 = no blur), min-max normalised to [0, 1].
FeatureMaps synthetic_image(int size, double smoothness, std::uint64_t seed, int channels = 1);

/// Writes `count` synthetic PNGs named img_0000.png ... into `dir`. Image i
/// uses substream (seed, i).
std::vector<std::filesystem::path> generate_synthetic(const std::filesystem::path& dir, int count,
                                                      int size, double smoothness,
                                                      std::uint64_t seed, int channels = 1);

}  // namespace rcd
