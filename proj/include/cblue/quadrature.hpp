#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "cblue/common.hpp"

namespace cblue {

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kGk15WeightsK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGk15WeightsG[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double quad_norm(double v) { return std::abs(v); }
inline double quad_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}
inline double quad_norm(const Eigen::MatrixXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

template <class T>
struct GkPanel {
  double a, b;
  T value;
  double error;
};

template <class F, class T = std::decay_t<decltype(std::declval<F>()(0.0))>>
GkPanel<T> gk15_panel(F&& f, double a, double b) {
  const double h = 0.5 * (b - a);
  const double c = 0.5 * (a + b);
  T fc = f(c);
  T sum_k = fc * kGk15WeightsK[7];
  T sum_g = fc * kGk15WeightsG[3];
  for (int i = 0; i < 7; ++i) {
    double x = h * kGk15Nodes[i];
    T lo = f(c - x);
    T hi = f(c + x);
    T pair = lo + hi;
    sum_k = sum_k + pair * kGk15WeightsK[i];
    if (i % 2 == 1) sum_g = sum_g + pair * kGk15WeightsG[i / 2];
  }
  GkPanel<T> p;
  p.a = a;
  p.b = b;
  p.value = sum_k * h;
  T coarse = sum_g * h;
  T delta = p.value - coarse;
  double diff = quad_norm(delta);
  // Scaled error estimate as in QUADPACK.
  p.error = std::pow(200.0 * diff, 1.5);
  if (!(p.error < diff)) p.error = diff;
  return p;
}

}  // namespace detail

// Adaptive Gauss-Kronrod integration to absolute tolerance. Throws
// NumericalFailureError if the error estimate cannot be brought under
// tolerance within the panel budget.
template <class F, class T = std::decay_t<decltype(std::declval<F>()(0.0))>>
T integrate_gk15(F&& f, double a, double b, double abs_tol = 1e-12, int max_panels = 4000) {
  if (a == b) return detail::gk15_panel(f, a, b).value * 0.0;
  auto worse = [](const detail::GkPanel<T>& x, const detail::GkPanel<T>& y) {
    return x.error < y.error;
  };
  std::vector<detail::GkPanel<T>> heap;
  heap.push_back(detail::gk15_panel(f, a, b));
  double total_err = heap[0].error;
  int evals = 1;
  while (total_err > abs_tol && evals < max_panels) {
    std::pop_heap(heap.begin(), heap.end(), worse);
    detail::GkPanel<T> top = heap.back();
    heap.pop_back();
    double mid = 0.5 * (top.a + top.b);
    if (mid <= top.a || mid >= top.b) {
      // Interval has collapsed to machine precision; keep its estimate.
      heap.push_back(top);
      std::push_heap(heap.begin(), heap.end(), worse);
      break;
    }
    auto left = detail::gk15_panel(f, top.a, mid);
    auto right = detail::gk15_panel(f, mid, top.b);
    total_err += left.error + right.error - top.error;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end(), worse);
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end(), worse);
    evals += 2;
  }
  if (total_err > std::max(abs_tol * 16.0, 1e-10)) {
    throw NumericalFailureError("quadrature did not converge: error estimate " +
                                std::to_string(total_err));
  }
  T acc = heap[0].value * 0.0;
  for (const auto& p : heap) acc = acc + p.value;
  return acc;
}

// Integration with mandatory breakpoints (atom locations, kernel diagonal).
template <class F, class T = std::decay_t<decltype(std::declval<F>()(0.0))>>
T integrate_with_splits(F&& f, double a, double b, std::vector<double> splits,
                        double abs_tol = 1e-12) {
  splits.push_back(a);
  splits.push_back(b);
  std::sort(splits.begin(), splits.end());
  splits.erase(std::unique(splits.begin(), splits.end()), splits.end());
  T acc = f(0.5 * (a + b)) * 0.0;
  int segments = 0;
  for (size_t i = 0; i + 1 < splits.size(); ++i) {
    if (splits[i] < a || splits[i + 1] > b) continue;
    if (splits[i + 1] - splits[i] <= 0.0) continue;
    ++segments;
  }
  if (segments == 0) return acc;
  double seg_tol = abs_tol / segments;
  for (size_t i = 0; i + 1 < splits.size(); ++i) {
    double lo = splits[i], hi = splits[i + 1];
    if (lo < a || hi > b || hi - lo <= 0.0) continue;
    acc = acc + integrate_gk15(f, lo, hi, seg_tol);
  }
  return acc;
}

// Fixed-order Gauss-Legendre nodes/weights on [-1, 1], cached per order.
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre_rule(int n);

template <class F, class T = std::decay_t<decltype(std::declval<F>()(0.0))>>
T gauss_legendre(F&& f, double a, double b, int n = 32) {
  const auto& [x, w] = gauss_legendre_rule(n);
  const double h = 0.5 * (b - a);
  const double c = 0.5 * (a + b);
  T acc = f(c) * 0.0;
  for (int i = 0; i < n; ++i) acc = acc + f(c + h * x[i]) * (h * w[i]);
  return acc;
}

}  // namespace cblue
