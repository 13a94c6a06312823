#include "cblue/quadrature.hpp"

#include <map>
#include <mutex>
#include <numbers>

namespace cblue {

namespace {

// Newton iteration on Legendre polynomials; nodes symmetric about zero.
std::pair<std::vector<double>, std::vector<double>> build_rule(int n) {
  std::vector<double> x(n), w(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
  return {x, w};
}

}  // namespace

const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre_rule(int n) {
  static std::mutex mu;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
  return it->second;
}

std::vector<double> chebyshev_nodes(int n, const Interval& iv) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = iv.midpoint();
    return out;
  }
  for (int k = 0; k < n; ++k) {
    double c = std::cos(std::numbers::pi * k / (n - 1));
    out[n - 1 - k] = iv.midpoint() + 0.5 * iv.length() * c;
  }
  out.front() = iv.a;
  out.back() = iv.b;
  return out;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (int k = 0; k < n; ++k) out[k] = a + (b - a) * k / (n - 1);
  return out;
}

}  // namespace cblue
