#pragma once

#include <cstddef>

namespace cblue::simd {

enum class Isa { scalar, avx2 };

// ISA picked at startup from CPUID (and the CBLUE_SIMD env override).
Isa active_isa();
bool avx2_supported();
// Testing hook; requesting avx2 on unsupported hardware falls back to scalar.
void force_isa(Isa isa);

// Batched e^{-u} for u >= 0.
void exp_neg(const double* u, double* out, std::size_t n);
void exp_neg_scalar(const double* u, double* out, std::size_t n);

// Correlation e^{-l u}(1 + l u) and its first two derivatives at lags u >= 0.
void matern32_rho(double lambda, const double* u, std::size_t n, double* r0, double* r1,
                  double* r2);
void matern32_rho_scalar(double lambda, const double* u, std::size_t n, double* r0, double* r1,
                         double* r2);

// Two-exponential correlation (l2 e^{-l1 u} - l1 e^{-l2 u})/(l2 - l1), orders 0..2.
void expexp_rho(double l1, double l2, const double* u, std::size_t n, double* r0, double* r1,
                double* r2);
void expexp_rho_scalar(double l1, double l2, const double* u, std::size_t n, double* r0,
                       double* r1, double* r2);

// Equal-rate triple-exponential correlation e^{-l u}(1 + l u + l^2 u^2 / 3),
// orders 0..4 (out[k] receives the k-th derivative).
void car3equal_rho(double lambda, const double* u, std::size_t n, double* const out[5]);
void car3equal_rho_scalar(double lambda, const double* u, std::size_t n, double* const out[5]);

}  // namespace cblue::simd
