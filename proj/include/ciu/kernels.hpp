#pragma once

// Data-parallel inner loops of the explainer: dense affine prediction over a
// probe batch, and min/max reduction with earliest-index tie breaking.
//
// Every kernel has a scalar reference and, on x86-64, an AVX2 variant chosen
// at runtime. Variants accumulate in the same order without FMA contraction,
// so they agree bit for bit.

#include <cstddef>
#include <span>
#include <string_view>

namespace ciu::kernels {

enum class Isa { kScalar, kAvx2 };

// Best ISA supported by this CPU and build. CIU_FORCE_SCALAR=1 in the
// environment pins the scalar path.
Isa active_isa();
bool isa_available(Isa isa);
std::string_view isa_name(Isa isa);

struct MinMax {
  double min = 0.0;
  double max = 0.0;
  std::size_t argmin = 0;
  std::size_t argmax = 0;
};

// out[p * n_out + o] = bias[o] + sum_k weights[o * n_in + k] * inputs[p * n_in + k]
// summed in ascending k.
void affine_batch(std::span<const double> weights, std::span<const double> bias, std::span<const double> inputs,
                  std::size_t n_in, std::size_t n_out, std::span<double> out);

// values must be non-empty and free of NaN. Ties resolve to the lowest index.
MinMax min_max(std::span<const double> values);

namespace scalar {
void affine_batch(std::span<const double> weights, std::span<const double> bias, std::span<const double> inputs,
                  std::size_t n_in, std::size_t n_out, std::span<double> out);
MinMax min_max(std::span<const double> values);
}  // namespace scalar

namespace avx2 {
// Only callable when isa_available(Isa::kAvx2).
void affine_batch(std::span<const double> weights, std::span<const double> bias, std::span<const double> inputs,
                  std::size_t n_in, std::size_t n_out, std::span<double> out);
MinMax min_max(std::span<const double> values);
}  // namespace avx2

}  // namespace ciu::kernels
