#include "udcnet/frequency_ops.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "udcnet/error.hpp"

namespace udcnet::freq {

ComplexSpectrum::ComplexSpectrum(torch::Tensor re, torch::Tensor im)
    : real(std::move(re)), imag(std::move(im)) {
  if (real.sizes() != imag.sizes()) {
    throw Error("shape_mismatch",
                fmt::format("complex planes differ in shape: {} vs {}",
                            fmt::join(real.sizes(), "x"), fmt::join(imag.sizes(), "x")));
  }
}

torch::Tensor ComplexSpectrum::as_complex() const { return torch::complex(real, imag); }

ComplexSpectrum ComplexSpectrum::from_complex(const torch::Tensor& z) {
  return {torch::real(z), torch::imag(z)};
}

ComplexSoftmax parse_complex_softmax(std::string_view name) {
  if (name == "split") return ComplexSoftmax::kSplit;
  if (name == "magnitude") return ComplexSoftmax::kMagnitude;
  throw Error("invalid_config",
              fmt::format("unknown complex_softmax policy '{}' (expected split|magnitude)", name));
}

std::string_view to_string(ComplexSoftmax policy) {
  return policy == ComplexSoftmax::kSplit ? "split" : "magnitude";
}

ComplexSpectrum fft2d(const torch::Tensor& x) {
  if (x.dim() < 2 || x.size(-1) < 1 || x.size(-2) < 1) {
    throw Error("shape_mismatch", "fft2d expects at least two non-empty spatial axes");
  }
  if (!torch::isfinite(x.detach()).all().item<bool>()) {
    throw Error("non_finite", "fft2d input contains NaN or Inf (corrupted activations)");
  }
  // Explicit dims keep batched [*, H, W] inputs of any rank working.
  return ComplexSpectrum::from_complex(torch::fft::fft2(x, c10::nullopt, {-2, -1}));
}

ComplexSpectrum ifft2d_complex(const ComplexSpectrum& spectrum) {
  return ComplexSpectrum::from_complex(
      torch::fft::ifft2(spectrum.as_complex(), c10::nullopt, {-2, -1}));
}

torch::Tensor ifft2d(const ComplexSpectrum& spectrum, bool strict) {
  auto z = ifft2d_complex(spectrum);
  if (strict) {
    const double residue = z.imag.detach().abs().max().item<double>();
    if (residue > 1e-4) {
      throw Error("non_real_spectrum",
                  fmt::format("inverse transform has imaginary residue {:.3g} > 1e-4", residue));
    }
  }
  return z.real;
}

torch::Tensor magnitude(const ComplexSpectrum& spectrum) {
  // torch::abs on complex input uses sgn() in backward, which is 0 at 0.
  return torch::abs(spectrum.as_complex());
}

ComplexSpectrum complex_softmax(const ComplexSpectrum& x, int64_t dim, ComplexSoftmax policy) {
  if (policy == ComplexSoftmax::kSplit) {
    return {torch::softmax(x.real, dim), torch::softmax(x.imag, dim)};
  }
  auto mod = magnitude(x);
  auto weights = torch::softmax(mod, dim);
  // Unit phasor; points at the origin keep phase 0.
  auto safe = torch::where(mod > 0, mod, torch::ones_like(mod));
  auto cos_phase = torch::where(mod > 0, x.real / safe, torch::ones_like(mod));
  auto sin_phase = torch::where(mod > 0, x.imag / safe, torch::zeros_like(mod));
  return {weights * cos_phase, weights * sin_phase};
}

ComplexSpectrum complex_matmul(const ComplexSpectrum& a, const ComplexSpectrum& b) {
  if (a.real.dim() < 2 || b.real.dim() < 2 || a.real.size(-1) != b.real.size(-2)) {
    throw Error("shape_mismatch",
                fmt::format("complex_matmul inner dimensions differ: [{}] x [{}]",
                            fmt::join(a.sizes(), ","), fmt::join(b.sizes(), ",")));
  }
  auto re = torch::matmul(a.real, b.real) - torch::matmul(a.imag, b.imag);
  auto im = torch::matmul(a.real, b.imag) + torch::matmul(a.imag, b.real);
  return {re, im};
}

ComplexSpectrum transpose_last(const ComplexSpectrum& x) {
  return {x.real.transpose(-2, -1), x.imag.transpose(-2, -1)};
}

}  // namespace udcnet::freq
