#pragma once

#include "markush/convnet.hpp"
#include "markush/rng.hpp"

namespace markush {

/// Document-style augmentations, each applied independently with the given
/// probability: perspective warp (corner jitter up to 10% of the side,
/// bilinear, white fill), posterization to 3..7 bits, and an even-odds
/// sharpen (unsharp mask, amount 0.5) or 3x3 Gaussian blur.
/// Deterministic for a given rng state.
Tensor3 augment(const Tensor3& tensor, double probability, Rng& rng);

/// Quantize 8-bit-derived [0,1] values down to `bits` significant bits.
/// 8 bits is the identity.
void posterize_bits(Tensor3& tensor, int bits);

}  // namespace markush
