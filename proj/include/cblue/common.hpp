#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cblue {

// Closed time interval [a, b] on which a model lives.
struct Interval {
  double a = 0.0;
  double b = 1.0;

  double length() const { return b - a; }
  double midpoint() const { return 0.5 * (a + b); }
  bool contains(double t, double slack = 0.0) const {
    return t >= a - slack && t <= b + slack;
  }
  bool valid() const { return std::isfinite(a) && std::isfinite(b) && a < b; }
};

// One-sided limit selector for derivative evaluation on the kernel diagonal.
enum class Side { left, right };

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside the declared domain (time outside interval, bad origin, ...).
struct DomainError : Error {
  using Error::Error;
};

// Derivative order beyond what a family or drift provides in closed form.
struct UnsupportedOrderError : Error {
  using Error::Error;
};

// Kernel parameters violating the family's validity constraints.
struct InvalidKernelError : Error {
  using Error::Error;
};

struct InvalidParameterError : Error {
  using Error::Error;
};

// A model whose information matrix is singular or nearly so.
struct DegenerateModelError : Error {
  using Error::Error;
};

// Quadrature non-convergence, failed factorizations, residuals above tolerance.
struct NumericalFailureError : Error {
  using Error::Error;
};

// Inputs that cannot be represented in the supported closure (drift spans, ...).
struct RepresentationError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct UnsupportedError : Error {
  using Error::Error;
};

// Chebyshev-Lobatto nodes on [iv.a, iv.b], endpoints included, sorted ascending.
std::vector<double> chebyshev_nodes(int n, const Interval& iv);

std::vector<double> linspace(double a, double b, int n);

}  // namespace cblue
