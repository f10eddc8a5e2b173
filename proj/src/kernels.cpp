#include "ciu/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace ciu::kernels {

namespace scalar {

void affine_batch(std::span<const double> weights, std::span<const double> bias, std::span<const double> inputs,
                  std::size_t n_in, std::size_t n_out, std::span<double> out) {
  const std::size_t rows = n_in == 0 ? 0 : inputs.size() / n_in;
  for (std::size_t p = 0; p < rows; ++p) {
    const double* x = inputs.data() + p * n_in;
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* w = weights.data() + o * n_in;
      double acc = bias[o];
      for (std::size_t k = 0; k < n_in; ++k) acc += w[k] * x[k];
      out[p * n_out + o] = acc;
    }
  }
}

MinMax min_max(std::span<const double> values) {
  MinMax r{values[0], values[0], 0, 0};
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < r.min) {
      r.min = values[i];
      r.argmin = i;
    }
    if (values[i] > r.max) {
      r.max = values[i];
      r.argmax = i;
    }
  }
  return r;
}

}  // namespace scalar

#if !defined(CIU_HAVE_AVX2)
namespace avx2 {
void affine_batch(std::span<const double> weights, std::span<const double> bias, std::span<const double> inputs,
                  std::size_t n_in, std::size_t n_out, std::span<double> out) {
  scalar::affine_batch(weights, bias, inputs, n_in, n_out, out);
}
MinMax min_max(std::span<const double> values) { return scalar::min_max(values); }
}  // namespace avx2
#endif

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(CIU_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() {
  static const Isa isa = [] {
    const char* force = std::getenv("CIU_FORCE_SCALAR");
    if (force != nullptr && std::strcmp(force, "0") != 0 && *force != '\0') return Isa::kScalar;
    return isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
  }();
  return isa;
}

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

void affine_batch(std::span<const double> weights, std::span<const double> bias, std::span<const double> inputs,
                  std::size_t n_in, std::size_t n_out, std::span<double> out) {
  if (active_isa() == Isa::kAvx2)
    avx2::affine_batch(weights, bias, inputs, n_in, n_out, out);
  else
    scalar::affine_batch(weights, bias, inputs, n_in, n_out, out);
}

MinMax min_max(std::span<const double> values) {
  return active_isa() == Isa::kAvx2 ? avx2::min_max(values) : scalar::min_max(values);
}

}  // namespace ciu::kernels
