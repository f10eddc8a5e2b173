// Compiled with -mavx2 (see src/CMakeLists.txt); only entered after a
// runtime CPU check.

#include <immintrin.h>

#include <cstdint>

#include "ciu/kernels.hpp"

namespace ciu::kernels::avx2 {

void affine_batch(std::span<const double> weights, std::span<const double> bias, std::span<const double> inputs,
                  std::size_t n_in, std::size_t n_out, std::span<double> out) {
  if (n_in == 0) return;
  const std::size_t rows = inputs.size() / n_in;
  const std::size_t blocks = rows / 4;

  // Four probes at a time, one probe per lane. Each lane sees the same
  // bias + w0*x0 + w1*x1 + ... sequence as the scalar loop.
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t p = b * 4;
    const double* x0 = inputs.data() + (p + 0) * n_in;
    const double* x1 = inputs.data() + (p + 1) * n_in;
    const double* x2 = inputs.data() + (p + 2) * n_in;
    const double* x3 = inputs.data() + (p + 3) * n_in;
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* w = weights.data() + o * n_in;
      __m256d acc = _mm256_set1_pd(bias[o]);
      for (std::size_t k = 0; k < n_in; ++k) {
        const __m256d xv = _mm256_set_pd(x3[k], x2[k], x1[k], x0[k]);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(w[k]), xv));
      }
      alignas(32) double lanes[4];
      _mm256_store_pd(lanes, acc);
      for (std::size_t l = 0; l < 4; ++l) out[(p + l) * n_out + o] = lanes[l];
    }
  }

  const std::size_t done = blocks * 4;
  if (done < rows) {
    scalar::affine_batch(weights, bias, inputs.subspan(done * n_in), n_in, n_out, out.subspan(done * n_out));
  }
}

MinMax min_max(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 8) return scalar::min_max(values);

  __m256d vmin = _mm256_loadu_pd(values.data());
  __m256d vmax = vmin;
  __m256i idx = _mm256_set_epi64x(3, 2, 1, 0);
  __m256i imin = idx;
  __m256i imax = idx;
  const __m256i step = _mm256_set1_epi64x(4);

  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) {
    idx = _mm256_add_epi64(idx, step);
    const __m256d v = _mm256_loadu_pd(values.data() + i);
    // Strict comparisons keep the earliest index within each lane.
    const __m256d lt = _mm256_cmp_pd(v, vmin, _CMP_LT_OQ);
    const __m256d gt = _mm256_cmp_pd(v, vmax, _CMP_GT_OQ);
    vmin = _mm256_blendv_pd(vmin, v, lt);
    vmax = _mm256_blendv_pd(vmax, v, gt);
    imin = _mm256_castpd_si256(_mm256_blendv_pd(_mm256_castsi256_pd(imin), _mm256_castsi256_pd(idx), lt));
    imax = _mm256_castpd_si256(_mm256_blendv_pd(_mm256_castsi256_pd(imax), _mm256_castsi256_pd(idx), gt));
  }

  alignas(32) double mins[4];
  alignas(32) double maxs[4];
  alignas(32) std::int64_t amin[4];
  alignas(32) std::int64_t amax[4];
  _mm256_store_pd(mins, vmin);
  _mm256_store_pd(maxs, vmax);
  _mm256_store_si256(reinterpret_cast<__m256i*>(amin), imin);
  _mm256_store_si256(reinterpret_cast<__m256i*>(amax), imax);

  MinMax r{mins[0], maxs[0], static_cast<std::size_t>(amin[0]), static_cast<std::size_t>(amax[0])};
  for (int l = 1; l < 4; ++l) {
    const auto li = static_cast<std::size_t>(amin[l]);
    if (mins[l] < r.min || (mins[l] == r.min && li < r.argmin)) {
      r.min = mins[l];
      r.argmin = li;
    }
    const auto ai = static_cast<std::size_t>(amax[l]);
    if (maxs[l] > r.max || (maxs[l] == r.max && ai < r.argmax)) {
      r.max = maxs[l];
      r.argmax = ai;
    }
  }
  // Tail indices exceed every lane index, so only strict improvements count.
  for (; i < n; ++i) {
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

}  // namespace ciu::kernels::avx2
