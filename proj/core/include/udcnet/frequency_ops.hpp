#pragma once

#include <torch/torch.h>

#include <string_view>

namespace udcnet::freq {

/// Complex-valued 2-D spectrum stored as two real planes of identical shape
/// [B, C, H, W] (or any shape whose last two axes are the spatial grid).
struct ComplexSpectrum {
  torch::Tensor real;
  torch::Tensor imag;

  ComplexSpectrum() = default;
  ComplexSpectrum(torch::Tensor re, torch::Tensor im);

  /// Packs the planes into a native complex tensor (autograd-aware).
  torch::Tensor as_complex() const;
  static ComplexSpectrum from_complex(const torch::Tensor& z);

  at::IntArrayRef sizes() const { return real.sizes(); }
};

enum class ComplexSoftmax { kSplit, kMagnitude };

ComplexSoftmax parse_complex_softmax(std::string_view name);
std::string_view to_string(ComplexSoftmax policy);

/// Full (not half-spectrum) 2-D DFT over the last two axes. Unnormalized;
/// the inverse carries the 1/(HW) factor. Throws Error("non_finite") on
/// NaN/Inf input.
ComplexSpectrum fft2d(const torch::Tensor& x);

/// Inverse transform of a complex spectrum, keeping the complex result.
ComplexSpectrum ifft2d_complex(const ComplexSpectrum& spectrum);

/// Real part of the inverse transform. With `strict`, throws when the
/// imaginary residue exceeds 1e-4 (the spectrum did not come from a real
/// signal).
torch::Tensor ifft2d(const ComplexSpectrum& spectrum, bool strict = false);

/// Elementwise modulus sqrt(re^2 + im^2). Gradient at the origin is zero.
torch::Tensor magnitude(const ComplexSpectrum& spectrum);

/// kSplit: independent softmax over `dim` on the real and on the imaginary
/// plane. kMagnitude: softmax over the moduli, original phase re-applied.
ComplexSpectrum complex_softmax(const ComplexSpectrum& x, int64_t dim,
                                ComplexSoftmax policy = ComplexSoftmax::kSplit);

/// Batched complex matrix product [*, m, k] x [*, k, n] -> [*, m, n]
/// computed as (Ar Br - Ai Bi) + i (Ar Bi + Ai Br).
ComplexSpectrum complex_matmul(const ComplexSpectrum& a, const ComplexSpectrum& b);

/// Swaps the last two axes of both planes (no conjugation).
ComplexSpectrum transpose_last(const ComplexSpectrum& x);

}  // namespace udcnet::freq
