#pragma once

#include "vnca/dataset.hpp"

namespace vnca {

// Deterministic corpus of binary 28x28 digit glyphs with random scale,
// stroke thickness and placement. A stand-in when no handwritten digit file
// is available; same layout and value set as a binarized digit dataset.
Dataset synth_digits(std::int64_t n, std::uint64_t seed);

}  // namespace vnca
