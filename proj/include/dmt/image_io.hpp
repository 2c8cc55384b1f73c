#pragma once

#include <filesystem>

#include "dmt/tensor.hpp"

namespace dmt {

/// Binary PGM (1 channel) or PPM (3 channels), maxval 255; [-1, 1] maps
/// linearly onto [0, 255] with clamping. Accepts [c, h, w] or [h, w].
void write_pnm(const Tensor& image, const std::filesystem::path& path);
/// Returns [c, h, w] with values in [-1, 1].
Tensor read_pnm(const std::filesystem::path& path);

}  // namespace dmt
