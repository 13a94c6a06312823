#include "cblue/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "cblue/quadrature.hpp"
#include "cblue/simd.hpp"

namespace cblue {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Bivariate polynomial sum c[i][j] t^i s^j, degree < kDeg in each variable.
struct Poly2 {
  static constexpr int kDeg = 8;
  double c[kDeg][kDeg] = {};

  double eval(double t, double s) const {
    double acc = 0.0;
    for (int i = kDeg - 1; i >= 0; --i) {
      double row = 0.0;
      for (int j = kDeg - 1; j >= 0; --j) row = row * s + c[i][j];
      acc = acc * t + row;
    }
    return acc;
  }

  Poly2 dt() const {
    Poly2 out;
    for (int i = 1; i < kDeg; ++i)
      for (int j = 0; j < kDeg; ++j) out.c[i - 1][j] = c[i][j] * i;
    return out;
  }

  Poly2 ds() const {
    Poly2 out;
    for (int i = 0; i < kDeg; ++i)
      for (int j = 1; j < kDeg; ++j) out.c[i][j - 1] = c[i][j] * j;
    return out;
  }
};

double parity(int k) { return (k % 2 == 0) ? 1.0 : -1.0; }

// ---------------------------------------------------------------------------
// Piecewise-polynomial kernels: one polynomial branch for t <= s, mirrored by
// symmetry for t > s.

class PolyKernel final : public Kernel {
 public:
  PolyKernel(KernelInfo info, Interval iv, int q, const Poly2& low, double clamp_radius)
      : Kernel(info, iv, q), clamp_radius_(clamp_radius) {
    d_[0][0] = low;
    for (int i = 0; i < kMaxOrder; ++i) d_[i + 1][0] = d_[i][0].dt();
    for (int i = 0; i <= kMaxOrder; ++i)
      for (int j = 0; j < kMaxOrder; ++j) d_[i][j + 1] = d_[i][j].ds();
  }

  std::shared_ptr<const Kernel> with_interval(const Interval& iv) const override {
    auto copy = std::make_shared<PolyKernel>(*this);
    copy->interval_ = iv;
    return copy;
  }

 protected:
  double partial_impl(int i, double t, double s, Side side) const override {
    if (i > kMaxOrder) return 0.0;
    if (outside_support(t, s)) return 0.0;
    if (lower_branch(t, s, side)) return d_[i][0].eval(t, s);
    return d_[0][i].eval(s, t);
  }

  double cross_impl(int i, int j, double t, double s) const override {
    if (i > kMaxOrder || j > kMaxOrder) return 0.0;
    if (outside_support(t, s)) return 0.0;
    if (t <= s) return d_[i][j].eval(t, s);
    return d_[j][i].eval(s, t);
  }

 private:
  static constexpr int kMaxOrder = 7;

  bool outside_support(double t, double s) const {
    return std::isfinite(clamp_radius_) && std::abs(t - s) > clamp_radius_;
  }

  static bool lower_branch(double t, double s, Side side) {
    if (t < s) return true;
    if (t > s) return false;
    return side == Side::left;
  }

  Poly2 d_[kMaxOrder + 1][kMaxOrder + 1];
  double clamp_radius_;
};

// ---------------------------------------------------------------------------
// Stationary kernels K(t, s) = rho(t - s) with rho even.

class StationaryKernel : public Kernel {
 public:
  using Kernel::Kernel;
  bool stationary() const override { return true; }

 protected:
  double partial_impl(int i, double t, double s, Side side) const override {
    double u = t - s;
    if (u > 0.0) return rho_deriv(i, u);
    if (u < 0.0) return parity(i) * rho_deriv(i, -u);
    return (side == Side::right) ? rho_deriv(i, 0.0) : parity(i) * rho_deriv(i, 0.0);
  }

  double cross_impl(int i, int j, double t, double s) const override {
    int k = i + j;
    double u = t - s;
    double sign = parity(j);
    if (u >= 0.0) return sign * rho_deriv(k, u);
    return sign * parity(k) * rho_deriv(k, -u);
  }
};

class Car2ExpExpKernel final : public StationaryKernel {
 public:
  Car2ExpExpKernel(KernelInfo info, Interval iv)
      : StationaryKernel(info, iv, 1), l1_(info.l1), l2_(info.l2) {}

  double rho_deriv(int order, double u) const override {
    double a = l2_ / (l2_ - l1_);
    double b = -l1_ / (l2_ - l1_);
    return a * std::pow(-l1_, order) * std::exp(-l1_ * u) +
           b * std::pow(-l2_, order) * std::exp(-l2_ * u);
  }

  void rho_batch(const double* u, std::size_t n, int max_order,
                 double* const* outs) const override {
    if (max_order <= 2) {
      double* r1 = max_order >= 1 ? outs[1] : scratch(n, 0);
      double* r2 = max_order >= 2 ? outs[2] : scratch(n, 1);
      simd::expexp_rho(l1_, l2_, u, n, outs[0], r1, r2);
      return;
    }
    StationaryKernel::rho_batch(u, n, max_order, outs);
  }

  std::shared_ptr<const Kernel> with_interval(const Interval& iv) const override {
    return std::make_shared<Car2ExpExpKernel>(info_, iv);
  }

 private:
  static double* scratch(std::size_t n, int which) {
    thread_local std::vector<double> buf[2];
    buf[which].resize(n);
    return buf[which].data();
  }
  double l1_, l2_;
};

class Car2ExpCosKernel final : public StationaryKernel {
 public:
  Car2ExpCosKernel(KernelInfo info, Interval iv)
      : StationaryKernel(info, iv, 1), l_(info.lambda), w_(info.omega) {}

  double rho_deriv(int order, double u) const override {
    std::complex<double> z(-l_, w_);
    std::complex<double> amp(1.0, -l_ / w_);
    std::complex<double> zk(1.0, 0.0);
    for (int k = 0; k < order; ++k) zk *= z;
    return (amp * zk * std::exp(z * u)).real();
  }

  std::shared_ptr<const Kernel> with_interval(const Interval& iv) const override {
    return std::make_shared<Car2ExpCosKernel>(info_, iv);
  }

 private:
  double l_, w_;
};

// rho(u) = exp(-l u) P0(u) with P0 polynomial; derivatives follow the
// recurrence P_{k+1} = P_k' - l P_k. Covers the once- and twice-
// differentiable exponential-polynomial families.
class ExpPolyKernel final : public StationaryKernel {
 public:
  ExpPolyKernel(KernelInfo info, Interval iv, int q, std::vector<double> p0)
      : StationaryKernel(info, iv, q) {
    p_.push_back(std::move(p0));
    for (int k = 0; k < 10; ++k) {
      const std::vector<double>& p = p_.back();
      std::vector<double> next(std::max<size_t>(p.size(), 1), 0.0);
      for (size_t i = 1; i < p.size(); ++i) next[i - 1] += p[i] * static_cast<double>(i);
      for (size_t i = 0; i < p.size(); ++i) next[i] -= info_.lambda * p[i];
      p_.push_back(std::move(next));
    }
  }

  double rho_deriv(int order, double u) const override {
    const std::vector<double>& p = p_.at(order);
    double poly = 0.0;
    for (size_t i = p.size(); i-- > 0;) poly = poly * u + p[i];
    return poly * std::exp(-info_.lambda * u);
  }

  void rho_batch(const double* u, std::size_t n, int max_order,
                 double* const* outs) const override {
    if (q_ == 1 && max_order <= 2) {
      double* r1 = max_order >= 1 ? outs[1] : scratch(n, 0);
      double* r2 = max_order >= 2 ? outs[2] : scratch(n, 1);
      simd::matern32_rho(info_.lambda, u, n, outs[0], r1, r2);
      return;
    }
    if (q_ == 2 && max_order <= 4) {
      thread_local std::vector<double> extra[4];
      double* ptrs[5];
      for (int k = 0; k <= 4; ++k) {
        if (k <= max_order) {
          ptrs[k] = outs[k];
        } else {
          extra[k - max_order - 1].resize(n);
          ptrs[k] = extra[k - max_order - 1].data();
        }
      }
      simd::car3equal_rho(info_.lambda, u, n, ptrs);
      return;
    }
    StationaryKernel::rho_batch(u, n, max_order, outs);
  }

  std::shared_ptr<const Kernel> with_interval(const Interval& iv) const override {
    auto copy = std::make_shared<ExpPolyKernel>(*this);
    copy->interval_ = iv;
    return copy;
  }

 private:
  static double* scratch(std::size_t n, int which) {
    thread_local std::vector<double> buf[2];
    buf[which].resize(n);
    return buf[which].data();
  }
  std::vector<std::vector<double>> p_;
};

class Car3DistinctKernel final : public StationaryKernel {
 public:
  Car3DistinctKernel(KernelInfo info, Interval iv) : StationaryKernel(info, iv, 2) {
    const double a1 = info.l1, a2 = info.l2, a3 = info.l3;
    double sum = a1 + a2 + a3;
    c_[0] = a2 * a3 * (a2 + a3) / ((a1 - a2) * (a1 - a3) * sum);
    c_[1] = a1 * a3 * (a1 + a3) / ((a2 - a1) * (a2 - a3) * sum);
    c_[2] = a1 * a2 * (a1 + a2) / ((a3 - a1) * (a3 - a2) * sum);
    l_[0] = a1;
    l_[1] = a2;
    l_[2] = a3;
  }

  double rho_deriv(int order, double u) const override {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += c_[j] * std::pow(-l_[j], order) * std::exp(-l_[j] * u);
    return s;
  }

  std::shared_ptr<const Kernel> with_interval(const Interval& iv) const override {
    return std::make_shared<Car3DistinctKernel>(info_, iv);
  }

 private:
  double c_[3];
  double l_[3];
};

// ---------------------------------------------------------------------------
// Markov product kernel K(t, s) = u(min) v(max).

class ProductKernel final : public Kernel {
 public:
  ProductKernel(KernelInfo info, Interval iv, Expr u, Expr v)
      : Kernel(info, iv, 0), u_(std::move(u)), v_(std::move(v)) {
    for (double t : linspace(iv.a, iv.b, 33)) {
      double uv = u_.eval(t), vv = v_.eval(t);
      if (!(uv > 0.0) || !(vv > 0.0)) {
        throw InvalidKernelError("product kernel requires u > 0 and v > 0 on the interval");
      }
      double qp = (u_.eval_derivative(1, t) * vv - uv * v_.eval_derivative(1, t)) / (vv * vv);
      if (!(qp > 0.0)) {
        throw InvalidKernelError("product kernel requires u/v strictly increasing");
      }
    }
  }

  const Expr& u() const { return u_; }
  const Expr& v() const { return v_; }

  std::shared_ptr<const Kernel> with_interval(const Interval& iv) const override {
    return std::make_shared<ProductKernel>(info_, iv, u_, v_);
  }

 protected:
  double partial_impl(int i, double t, double s, Side side) const override {
    bool lower = t < s || (t == s && side == Side::left);
    if (lower) return u_.eval_derivative(i, t) * v_.eval(s);
    return v_.eval_derivative(i, t) * u_.eval(s);
  }

  double cross_impl(int i, int j, double t, double s) const override {
    if (t <= s) return u_.eval_derivative(i, t) * v_.eval_derivative(j, s);
    return v_.eval_derivative(i, t) * u_.eval_derivative(j, s);
  }

 private:
  Expr u_, v_;
};

// ---------------------------------------------------------------------------
// Nested-quadrature integral of a base kernel, R(t,s) = int_a^t int_a^s K.
// Panels split at the base kernel's diagonal where the integrand kinks.

class IntegratedNumericKernel final : public Kernel {
 public:
  IntegratedNumericKernel(KernelInfo info, Interval iv, KernelPtr base, double a)
      : Kernel(info, iv, base->smoothness() + 1), base_(std::move(base)), a_(a) {}

  int max_partial_order() const override { return 2; }

  std::string spec() const override {
    return "integrated:a=" + fmt(a_) + ",base=(" + base_->spec() + ")";
  }

  std::shared_ptr<const Kernel> with_interval(const Interval& iv) const override {
    return std::make_shared<IntegratedNumericKernel>(info_, iv, base_, a_);
  }

 protected:
  double partial_impl(int i, double t, double s, Side side) const override {
    (void)side;
    switch (i) {
      case 0: return value_2d(t, s);
      case 1: return inner_integral(t, s);
      case 2: return segmented(
            [&](double v) { return base_->partial_t(1, t, v); }, a_, s, t);
      default:
        throw UnsupportedOrderError("numeric integrated kernel supports orders 0..2");
    }
  }

  double cross_impl(int i, int j, double t, double s) const override {
    if (i == 0 && j == 0) return value_2d(t, s);
    if (i == 1 && j == 0) return inner_integral(t, s);
    if (i == 0 && j == 1) return inner_integral(s, t);
    if (i == 1 && j == 1) return base_->value(t, s);
    throw UnsupportedOrderError("numeric integrated kernel supports cross orders <= 1");
  }

 private:
  // int_a^s K(t, v) dv with a split at v = t.
  double inner_integral(double t, double s) const {
    return segmented([&](double v) { return base_->value(t, v); }, a_, s, t);
  }

  template <class F>
  static double segmented(F&& f, double lo, double hi, double split) {
    double acc = 0.0;
    double sign = 1.0;
    if (hi < lo) {
      std::swap(lo, hi);
      sign = -1.0;
    }
    if (split > lo && split < hi) {
      acc += gauss_legendre(f, lo, split);
      acc += gauss_legendre(f, split, hi);
    } else {
      acc += gauss_legendre(f, lo, hi);
    }
    return sign * acc;
  }

  double value_2d(double t, double s) const {
    auto inner = [&](double u) { return inner_integral(u, s); };
    return segmented(inner, a_, t, s);
  }

  KernelPtr base_;
  double a_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Kernel base implementation

double Kernel::value(double t, double s) const {
  double slack = 1e-10 * std::max(1.0, interval_.length());
  if (!interval_.contains(t, slack) || !interval_.contains(s, slack)) {
    throw DomainError("kernel arguments outside interval [" + fmt(interval_.a) + ", " +
                      fmt(interval_.b) + "]");
  }
  return partial_impl(0, t, s, Side::right);
}

double Kernel::partial_t(int i, double t, double s, Side side) const {
  if (i < 0 || i > max_partial_order()) {
    throw UnsupportedOrderError("partial derivative order " + std::to_string(i) +
                                " not available for this family");
  }
  return partial_impl(i, t, s, side);
}

double Kernel::cross(int i, int j, double t, double s) const {
  if (i < 0 || j < 0 || i > q_ || j > q_) {
    throw UnsupportedOrderError("cross derivative orders must be <= smoothness q=" +
                                std::to_string(q_));
  }
  return cross_impl(i, j, t, s);
}

void Kernel::rho_batch(const double* u, std::size_t n, int max_order,
                       double* const* outs) const {
  for (int k = 0; k <= max_order; ++k) {
    for (std::size_t idx = 0; idx < n; ++idx) outs[k][idx] = rho_deriv(k, u[idx]);
  }
}

double Kernel::rho_deriv(int, double) const {
  throw UnsupportedError("rho_deriv is only defined for stationary kernels");
}

std::string Kernel::spec() const {
  switch (info_.family) {
    case KernelFamily::product:
      return "product:u=" + info_.u_expr + ",v=" + info_.v_expr;
    case KernelFamily::linear_drift:
      return "lineardrift:l1=" + fmt(info_.l1) + ",l2=" + fmt(info_.l2);
    case KernelFamily::triangular:
      return "triangular:lambda=" + fmt(info_.lambda);
    case KernelFamily::brownian_motion:
      return "bm";
    case KernelFamily::car2_expexp:
      return "expexp:l1=" + fmt(info_.l1) + ",l2=" + fmt(info_.l2);
    case KernelFamily::car2_expcos:
      return "expcos:lambda=" + fmt(info_.lambda) + ",omega=" + fmt(info_.omega);
    case KernelFamily::car2_explinear:
      return "matern32:lambda=" + fmt(info_.lambda);
    case KernelFamily::car3:
      return "car3:l1=" + fmt(info_.l1) + ",l2=" + fmt(info_.l2) + ",l3=" + fmt(info_.l3);
    case KernelFamily::integrated_bm:
      return "ibm:a=" + fmt(info_.a);
    case KernelFamily::integrated_triangular:
      return "itri:lambda=" + fmt(info_.lambda);
    case KernelFamily::twice_integrated_bm:
      return "tibm";
    case KernelFamily::integrated_numeric:
      return "integrated";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Pointwise operations

double eval_kernel(const Kernel& k, double t, double s) { return k.value(t, s); }

double eval_partial_t(const Kernel& k, int i, double t, double s, Side side) {
  return k.partial_t(i, t, s, side);
}

double eval_cross(const Kernel& k, int i, int j, double t, double s) {
  return k.cross(i, j, t, s);
}

double derivative_jump(const Kernel& k, int order) {
  if (order != 2 * k.smoothness() + 1) {
    throw UnsupportedError("family has no jump constant at order " + std::to_string(order));
  }
  if (k.family() == KernelFamily::integrated_numeric) {
    throw UnsupportedError("numeric integrated kernels expose no jump constant");
  }
  double sign = (k.smoothness() % 2 == 0) ? 1.0 : -1.0;
  const Interval& iv = k.interval();
  double ref = 0.0;
  int idx = 0;
  for (double frac : {0.31, 0.5, 0.77}) {
    double s = iv.a + frac * iv.length();
    double jump = sign * (k.partial_t(order, s, s, Side::left) -
                          k.partial_t(order, s, s, Side::right));
    if (idx == 0) {
      ref = jump;
    } else if (std::abs(jump - ref) > 1e-8 * std::max(1.0, std::abs(ref))) {
      throw UnsupportedError("derivative jump varies along the diagonal for this kernel");
    }
    ++idx;
  }
  if (!(ref > 0.0)) {
    throw NumericalFailureError("derivative jump is not positive");
  }
  return ref;
}

double derivative_jump(const Kernel& k) { return derivative_jump(k, 2 * k.smoothness() + 1); }

// ---------------------------------------------------------------------------
// Factories

namespace {

Poly2 poly_brownian() {
  Poly2 p;
  p.c[1][0] = 1.0;  // K = t for t <= s
  return p;
}

Poly2 poly_linear_drift(double l1, double l2) {
  Poly2 p;
  p.c[0][0] = 1.0;
  p.c[1][0] = l1;
  p.c[0][1] = -l2;
  return p;
}

Poly2 poly_triangular(double lambda) {
  Poly2 p;
  p.c[0][0] = 1.0;
  p.c[1][0] = lambda;
  p.c[0][1] = -lambda;
  return p;
}

// Integral of min over [a,t]x[a,s]:
// s(t^2-a^2)/2 - a^2(t-a)/2 - (t^3-a^3)/6 for t <= s.
Poly2 poly_integrated_bm(double a) {
  Poly2 p;
  p.c[2][1] = 0.5;
  p.c[0][1] = -0.5 * a * a;
  p.c[1][0] = -0.5 * a * a;
  p.c[3][0] = -1.0 / 6.0;
  p.c[0][0] = 2.0 / 3.0 * a * a * a;
  return p;
}

Poly2 poly_integrated_triangular(double lambda) {
  // ts - lambda t (3 s^2 - 3 t s + 2 t^2) / 6 for t <= s
  Poly2 p;
  p.c[1][1] = 1.0;
  p.c[1][2] = -lambda * 0.5;
  p.c[2][1] = lambda * 0.5;
  p.c[3][0] = -lambda / 3.0;
  return p;
}

Poly2 poly_twice_integrated_bm() {
  Poly2 p;
  p.c[5][0] = 1.0 / 120.0;
  p.c[4][1] = -1.0 / 24.0;
  p.c[3][2] = 1.0 / 12.0;
  return p;
}

double require(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ParseError("kernel spec missing parameter '" + key + "'");
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ParseError("bad numeric value for kernel parameter '" + key + "'");
  }
}

}  // namespace

KernelPtr make_product(const Expr& u, const Expr& v, const Interval& iv) {
  KernelInfo info;
  info.family = KernelFamily::product;
  info.u_expr = u.str();
  info.v_expr = v.str();
  return std::make_shared<ProductKernel>(info, iv, u, v);
}

KernelPtr make_linear_drift(double l1, double l2, const Interval& iv) {
  if (!(l1 > 0.0) || l2 < 0.0 || l1 < l2 || l2 * iv.length() > 1.0 + 1e-12) {
    throw InvalidKernelError(
        "linear-drift kernel requires l1 >= l2 >= 0, l1 > 0 and l2 (B - A) <= 1");
  }
  KernelInfo info;
  info.family = KernelFamily::linear_drift;
  info.l1 = l1;
  info.l2 = l2;
  return std::make_shared<PolyKernel>(info, iv, 0, poly_linear_drift(l1, l2),
                                      std::numeric_limits<double>::infinity());
}

KernelPtr make_triangular(double lambda, const Interval& iv) {
  if (!(lambda > 0.0)) throw InvalidKernelError("triangular kernel requires lambda > 0");
  KernelInfo info;
  info.family = KernelFamily::triangular;
  info.lambda = lambda;
  return std::make_shared<PolyKernel>(info, iv, 0, poly_triangular(lambda), 1.0 / lambda);
}

KernelPtr make_brownian_motion(const Interval& iv) {
  if (iv.a < 0.0) throw InvalidKernelError("Brownian motion kernel requires A >= 0");
  KernelInfo info;
  info.family = KernelFamily::brownian_motion;
  return std::make_shared<PolyKernel>(info, iv, 0, poly_brownian(),
                                      std::numeric_limits<double>::infinity());
}

KernelPtr make_car2_expexp(double l1, double l2, const Interval& iv) {
  if (!(l1 > 0.0) || !(l2 > 0.0)) throw InvalidKernelError("rates must be positive");
  if (std::abs(l1 - l2) <= 1e-9 * std::max(l1, l2)) {
    throw InvalidKernelError("equal rates: use the matern32 form instead");
  }
  KernelInfo info;
  info.family = KernelFamily::car2_expexp;
  info.l1 = l1;
  info.l2 = l2;
  return std::make_shared<Car2ExpExpKernel>(info, iv);
}

KernelPtr make_car2_expcos(double lambda, double omega, const Interval& iv) {
  if (!(lambda > 0.0) || !(omega > 0.0)) throw InvalidKernelError("rates must be positive");
  KernelInfo info;
  info.family = KernelFamily::car2_expcos;
  info.lambda = lambda;
  info.omega = omega;
  return std::make_shared<Car2ExpCosKernel>(info, iv);
}

KernelPtr make_matern32(double lambda, const Interval& iv) {
  if (!(lambda > 0.0)) throw InvalidKernelError("rate must be positive");
  KernelInfo info;
  info.family = KernelFamily::car2_explinear;
  info.lambda = lambda;
  return std::make_shared<ExpPolyKernel>(info, iv, 1, std::vector<double>{1.0, lambda});
}

KernelPtr make_car3(double l1, double l2, double l3, const Interval& iv) {
  if (!(l1 > 0.0) || !(l2 > 0.0) || !(l3 > 0.0)) {
    throw InvalidKernelError("rates must be positive");
  }
  double scale = std::max({l1, l2, l3});
  double g12 = std::abs(l1 - l2) / scale;
  double g13 = std::abs(l1 - l3) / scale;
  double g23 = std::abs(l2 - l3) / scale;
  double gmin = std::min({g12, g13, g23});
  double gmax = std::max({g12, g13, g23});
  KernelInfo info;
  info.family = KernelFamily::car3;
  info.l1 = l1;
  info.l2 = l2;
  info.l3 = l3;
  if (gmax <= 1e-12) {
    info.equal_roots = true;
    info.lambda = l1;
    double l = l1;
    return std::make_shared<ExpPolyKernel>(
        info, iv, 2, std::vector<double>{1.0, l, l * l / 3.0});
  }
  if (gmin < 1e-6) {
    throw InvalidKernelError(
        "nearly equal rates: the distinct-root form is numerically singular");
  }
  return std::make_shared<Car3DistinctKernel>(info, iv);
}

KernelPtr make_matern52(double lambda, const Interval& iv) {
  if (!(lambda > 0.0)) throw InvalidKernelError("rate must be positive");
  double l = std::sqrt(5.0) * lambda;
  KernelInfo info;
  info.family = KernelFamily::car3;
  info.equal_roots = true;
  info.l1 = info.l2 = info.l3 = l;
  info.lambda = l;
  return std::make_shared<ExpPolyKernel>(info, iv, 2,
                                         std::vector<double>{1.0, l, l * l / 3.0});
}

KernelPtr make_integrated_bm(double a, const Interval& iv) {
  if (a < 0.0 || a > iv.a) throw DomainError("integration origin must satisfy 0 <= a <= A");
  KernelInfo info;
  info.family = KernelFamily::integrated_bm;
  info.a = a;
  return std::make_shared<PolyKernel>(info, iv, 1, poly_integrated_bm(a),
                                      std::numeric_limits<double>::infinity());
}

KernelPtr make_integrated_triangular(double lambda, const Interval& iv) {
  if (!(lambda > 0.0)) throw InvalidKernelError("rate must be positive");
  if (iv.a < 0.0) throw DomainError("integrated triangular kernel requires A >= 0");
  if (lambda * iv.length() >= 1.0) {
    throw InvalidKernelError("integrated triangular kernel requires lambda (B - A) < 1");
  }
  KernelInfo info;
  info.family = KernelFamily::integrated_triangular;
  info.lambda = lambda;
  return std::make_shared<PolyKernel>(info, iv, 1, poly_integrated_triangular(lambda),
                                      std::numeric_limits<double>::infinity());
}

KernelPtr make_twice_integrated_bm(const Interval& iv) {
  if (iv.a < 0.0) throw InvalidKernelError("twice integrated Brownian motion requires A >= 0");
  KernelInfo info;
  info.family = KernelFamily::twice_integrated_bm;
  return std::make_shared<PolyKernel>(info, iv, 2, poly_twice_integrated_bm(),
                                      std::numeric_limits<double>::infinity());
}

KernelPtr make_integrated_numeric(const KernelPtr& base, double a, const Interval& iv) {
  if (a > iv.a) throw DomainError("integration origin must not exceed interval start");
  KernelInfo info;
  info.family = KernelFamily::integrated_numeric;
  info.a = a;
  Interval wide{std::min(a, base->interval().a), std::max(iv.b, base->interval().b)};
  return std::make_shared<IntegratedNumericKernel>(info, iv, base->with_interval(wide), a);
}

KernelPtr integrated_kernel(const KernelPtr& base, double a, const Interval& iv) {
  if (a > iv.a) throw DomainError("integration origin must not exceed interval start");
  if (base->family() == KernelFamily::brownian_motion) return make_integrated_bm(a, iv);
  if (base->family() == KernelFamily::triangular && a == 0.0) {
    return make_integrated_triangular(base->info().lambda, iv);
  }
  return make_integrated_numeric(base, a, iv);
}

KernelPtr parse_kernel(const std::string& spec, const Interval& iv) {
  std::string family = spec;
  std::map<std::string, std::string> kv;
  auto colon = spec.find(':');
  if (colon != std::string::npos) {
    family = spec.substr(0, colon);
    std::string rest = spec.substr(colon + 1);
    std::istringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw ParseError("kernel parameter missing '=': " + item);
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  if (family == "bm" || family == "brownian") return make_brownian_motion(iv);
  if (family == "triangular") return make_triangular(require(kv, "lambda"), iv);
  if (family == "lineardrift") return make_linear_drift(require(kv, "l1"), require(kv, "l2"), iv);
  if (family == "expexp") return make_car2_expexp(require(kv, "l1"), require(kv, "l2"), iv);
  if (family == "expcos") {
    return make_car2_expcos(require(kv, "lambda"), require(kv, "omega"), iv);
  }
  if (family == "matern32" || family == "explinear") {
    return make_matern32(require(kv, "lambda"), iv);
  }
  if (family == "car3") {
    return make_car3(require(kv, "l1"), require(kv, "l2"), require(kv, "l3"), iv);
  }
  if (family == "matern52") return make_matern52(require(kv, "lambda"), iv);
  if (family == "ibm") return make_integrated_bm(require(kv, "a"), iv);
  if (family == "itri") return make_integrated_triangular(require(kv, "lambda"), iv);
  if (family == "tibm") return make_twice_integrated_bm(iv);
  if (family == "product") {
    auto u = kv.find("u");
    auto v = kv.find("v");
    if (u == kv.end() || v == kv.end()) throw ParseError("product kernel needs u= and v=");
    return make_product(Expr::parse(u->second), Expr::parse(v->second), iv);
  }
  throw ParseError("unknown kernel family '" + family + "'");
}

}  // namespace cblue
