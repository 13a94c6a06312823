#include "cblue/simd.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cmath>

namespace cblue::simd::avx2 {

namespace {

// exp(x) for x <= 0, Cephes-style: 2^n * expansion of exp(r), |r| <= ln2/2.
constexpr double kLog2E = 1.4426950408889634073599;
constexpr double kLn2Hi = 6.93145751953125e-1;
constexpr double kLn2Lo = 1.42860682030941723212e-6;
constexpr double kExpP0 = 1.26177193074810590878e-4;
constexpr double kExpP1 = 3.02994407707441961300e-2;
constexpr double kExpP2 = 9.99999999999999999910e-1;
constexpr double kExpQ0 = 3.00198505138664455042e-6;
constexpr double kExpQ1 = 2.52448340349684104192e-3;
constexpr double kExpQ2 = 2.27265548208155028766e-1;
constexpr double kExpQ3 = 2.00000000000000000005e0;
constexpr double kExpMin = -708.39;

__attribute__((target("avx2,fma"))) inline __m256d exp_pd(__m256d x) {
  x = _mm256_max_pd(x, _mm256_set1_pd(kExpMin));
  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2E)),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Hi), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Lo), r);
  __m256d rr = _mm256_mul_pd(r, r);
  __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(kExpP0), rr, _mm256_set1_pd(kExpP1));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(kExpP2));
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_fmadd_pd(_mm256_set1_pd(kExpQ0), rr, _mm256_set1_pd(kExpQ1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(kExpQ2));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(kExpQ3));
  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));
  __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(e, _mm256_castsi256_pd(bits));
}

}  // namespace

__attribute__((target("avx2,fma"))) void exp_neg(const double* u, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x = _mm256_sub_pd(_mm256_setzero_pd(), _mm256_loadu_pd(u + i));
    _mm256_storeu_pd(out + i, exp_pd(x));
  }
  for (; i < n; ++i) out[i] = std::exp(-u[i]);
}

__attribute__((target("avx2,fma"))) void matern32_rho(double lambda, const double* u,
                                                      std::size_t n, double* r0, double* r1,
                                                      double* r2) {
  const __m256d vl = _mm256_set1_pd(lambda);
  const __m256d vl2 = _mm256_set1_pd(lambda * lambda);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_loadu_pd(u + i);
    __m256d x = _mm256_mul_pd(vl, t);
    __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), x));
    _mm256_storeu_pd(r0 + i, _mm256_mul_pd(e, _mm256_add_pd(one, x)));
    _mm256_storeu_pd(r1 + i,
                     _mm256_mul_pd(_mm256_sub_pd(_mm256_setzero_pd(), _mm256_mul_pd(vl2, t)), e));
    _mm256_storeu_pd(r2 + i, _mm256_mul_pd(_mm256_mul_pd(vl2, _mm256_sub_pd(x, one)), e));
  }
  if (i < n) matern32_rho_scalar(lambda, u + i, n - i, r0 + i, r1 + i, r2 + i);
}

__attribute__((target("avx2,fma"))) void expexp_rho(double l1, double l2, const double* u,
                                                    std::size_t n, double* r0, double* r1,
                                                    double* r2) {
  const double a = l2 / (l2 - l1);
  const double b = -l1 / (l2 - l1);
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  const __m256d val1 = _mm256_set1_pd(a * l1);
  const __m256d vbl2 = _mm256_set1_pd(b * l2);
  const __m256d val1q = _mm256_set1_pd(a * l1 * l1);
  const __m256d vbl2q = _mm256_set1_pd(b * l2 * l2);
  const __m256d vml1 = _mm256_set1_pd(-l1);
  const __m256d vml2 = _mm256_set1_pd(-l2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_loadu_pd(u + i);
    __m256d e1 = exp_pd(_mm256_mul_pd(vml1, t));
    __m256d e2 = exp_pd(_mm256_mul_pd(vml2, t));
    _mm256_storeu_pd(r0 + i, _mm256_fmadd_pd(va, e1, _mm256_mul_pd(vb, e2)));
    __m256d d1 = _mm256_fmadd_pd(val1, e1, _mm256_mul_pd(vbl2, e2));
    _mm256_storeu_pd(r1 + i, _mm256_sub_pd(_mm256_setzero_pd(), d1));
    _mm256_storeu_pd(r2 + i, _mm256_fmadd_pd(val1q, e1, _mm256_mul_pd(vbl2q, e2)));
  }
  if (i < n) expexp_rho_scalar(l1, l2, u + i, n - i, r0 + i, r1 + i, r2 + i);
}

__attribute__((target("avx2,fma"))) void car3equal_rho(double lambda, const double* u,
                                                       std::size_t n, double* const out[5]) {
  const double l = lambda;
  const double l2 = l * l, l4 = l2 * l2, l5 = l4 * l, l6 = l5 * l;
  const __m256d vl = _mm256_set1_pd(l);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d third = _mm256_set1_pd(1.0 / 3.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_loadu_pd(u + i);
    __m256d x = _mm256_mul_pd(vl, t);
    __m256d xx = _mm256_mul_pd(x, x);
    __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), x));
    __m256d p0 = _mm256_add_pd(one, _mm256_fmadd_pd(xx, third, x));
    _mm256_storeu_pd(out[0] + i, _mm256_mul_pd(e, p0));
    __m256d p1 = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(-l2 / 3.0), t),
                               _mm256_add_pd(one, x));
    _mm256_storeu_pd(out[1] + i, _mm256_mul_pd(e, p1));
    __m256d p2 = _mm256_mul_pd(_mm256_set1_pd(l2 / 3.0),
                               _mm256_sub_pd(xx, _mm256_add_pd(one, x)));
    _mm256_storeu_pd(out[2] + i, _mm256_mul_pd(e, p2));
    __m256d p3 = _mm256_mul_pd(t, _mm256_fnmadd_pd(_mm256_set1_pd(l5 / 3.0), t,
                                                   _mm256_set1_pd(l4)));
    _mm256_storeu_pd(out[3] + i, _mm256_mul_pd(e, p3));
    __m256d p4 = _mm256_fmadd_pd(
        t, _mm256_fmadd_pd(t, _mm256_set1_pd(l6 / 3.0), _mm256_set1_pd(-5.0 / 3.0 * l5)),
        _mm256_set1_pd(l4));
    _mm256_storeu_pd(out[4] + i, _mm256_mul_pd(e, p4));
  }
  if (i < n) {
    double* tail[5] = {out[0] + i, out[1] + i, out[2] + i, out[3] + i, out[4] + i};
    car3equal_rho_scalar(lambda, u + i, n - i, tail);
  }
}

}  // namespace cblue::simd::avx2

#else  // non-x86 fallback keeps the dispatch table linkable

namespace cblue::simd::avx2 {

void exp_neg(const double* u, double* out, std::size_t n) { exp_neg_scalar(u, out, n); }
void matern32_rho(double lambda, const double* u, std::size_t n, double* r0, double* r1,
                  double* r2) {
  matern32_rho_scalar(lambda, u, n, r0, r1, r2);
}
void expexp_rho(double l1, double l2, const double* u, std::size_t n, double* r0, double* r1,
                double* r2) {
  expexp_rho_scalar(l1, l2, u, n, r0, r1, r2);
}
void car3equal_rho(double lambda, const double* u, std::size_t n, double* const out[5]) {
  car3equal_rho_scalar(lambda, u, n, out);
}

}  // namespace cblue::simd::avx2

#endif
