#pragma once

#include <cstddef>
#include <cstdint>

#include "et/data.hpp"

namespace et {

/// Procedurally rendered handwritten-style digits 0-9 on a side x side grid.
/// Each sample jitters the stroke skeleton, applies a small random affine
/// map and renders anti-aliased strokes with supersampling. Pixels in [0, 1].
LabeledDataset gen_digits(std::size_t per_class, std::size_t side, std::uint64_t seed);

/// Rotates square images about their centre (bilinear resampling, zero
/// outside), adds Gaussian pixel noise and clamps to [0, 1].
LabeledDataset rotate_images(const LabeledDataset& d, std::size_t side, double degrees,
                             double noise_sigma, std::uint64_t seed);

}  // namespace et
