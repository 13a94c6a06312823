#include "cblue/simd.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace cblue::simd {

namespace avx2 {
void exp_neg(const double* u, double* out, std::size_t n);
void matern32_rho(double lambda, const double* u, std::size_t n, double* r0, double* r1,
                  double* r2);
void expexp_rho(double l1, double l2, const double* u, std::size_t n, double* r0, double* r1,
                double* r2);
void car3equal_rho(double lambda, const double* u, std::size_t n, double* const out[5]);
}  // namespace avx2

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

std::atomic<int> g_isa{-1};

Isa detect() {
  if (const char* env = std::getenv("CBLUE_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
  }
  return avx2_supported() ? Isa::avx2 : Isa::scalar;
}

}  // namespace

Isa active_isa() {
  int v = g_isa.load(std::memory_order_relaxed);
  if (v < 0) {
    v = static_cast<int>(detect());
    g_isa.store(v, std::memory_order_relaxed);
  }
  return static_cast<Isa>(v);
}

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && !avx2_supported()) isa = Isa::scalar;
  g_isa.store(static_cast<int>(isa), std::memory_order_relaxed);
}

void exp_neg_scalar(const double* u, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(-u[i]);
}

void matern32_rho_scalar(double lambda, const double* u, std::size_t n, double* r0, double* r1,
                         double* r2) {
  const double l2 = lambda * lambda;
  for (std::size_t i = 0; i < n; ++i) {
    double x = lambda * u[i];
    double e = std::exp(-x);
    r0[i] = e * (1.0 + x);
    r1[i] = -l2 * u[i] * e;
    r2[i] = l2 * (x - 1.0) * e;
  }
}

void expexp_rho_scalar(double l1, double l2, const double* u, std::size_t n, double* r0,
                       double* r1, double* r2) {
  const double a = l2 / (l2 - l1);
  const double b = -l1 / (l2 - l1);
  for (std::size_t i = 0; i < n; ++i) {
    double e1 = std::exp(-l1 * u[i]);
    double e2 = std::exp(-l2 * u[i]);
    r0[i] = a * e1 + b * e2;
    r1[i] = -a * l1 * e1 - b * l2 * e2;
    r2[i] = a * l1 * l1 * e1 + b * l2 * l2 * e2;
  }
}

void car3equal_rho_scalar(double lambda, const double* u, std::size_t n, double* const out[5]) {
  const double l = lambda;
  const double l2 = l * l, l3 = l2 * l, l4 = l3 * l, l5 = l4 * l, l6 = l5 * l;
  for (std::size_t i = 0; i < n; ++i) {
    double t = u[i];
    double x = l * t;
    double e = std::exp(-x);
    out[0][i] = e * (1.0 + x + x * x / 3.0);
    out[1][i] = e * (-(l2 * t / 3.0) * (1.0 + x));
    out[2][i] = e * ((l2 / 3.0) * (-1.0 - x + x * x));
    out[3][i] = e * (l4 * t - l5 * t * t / 3.0);
    out[4][i] = e * (l4 - (5.0 / 3.0) * l5 * t + (l6 / 3.0) * t * t);
  }
}

void exp_neg(const double* u, double* out, std::size_t n) {
  if (active_isa() == Isa::avx2) {
    avx2::exp_neg(u, out, n);
  } else {
    exp_neg_scalar(u, out, n);
  }
}

void matern32_rho(double lambda, const double* u, std::size_t n, double* r0, double* r1,
                  double* r2) {
  if (active_isa() == Isa::avx2) {
    avx2::matern32_rho(lambda, u, n, r0, r1, r2);
  } else {
    matern32_rho_scalar(lambda, u, n, r0, r1, r2);
  }
}

void expexp_rho(double l1, double l2, const double* u, std::size_t n, double* r0, double* r1,
                double* r2) {
  if (active_isa() == Isa::avx2) {
    avx2::expexp_rho(l1, l2, u, n, r0, r1, r2);
  } else {
    expexp_rho_scalar(l1, l2, u, n, r0, r1, r2);
  }
}

void car3equal_rho(double lambda, const double* u, std::size_t n, double* const out[5]) {
  if (active_isa() == Isa::avx2) {
    avx2::car3equal_rho(lambda, u, n, out);
  } else {
    car3equal_rho_scalar(lambda, u, n, out);
  }
}

}  // namespace cblue::simd
