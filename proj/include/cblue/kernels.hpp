#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "cblue/common.hpp"
#include "cblue/expr.hpp"

namespace cblue {

enum class KernelFamily {
  product,
  linear_drift,
  triangular,
  brownian_motion,
  car2_expexp,
  car2_expcos,
  car2_explinear,
  car3,
  integrated_bm,
  integrated_triangular,
  twice_integrated_bm,
  integrated_numeric,
};

// Construction-time parameters; which fields are meaningful depends on family.
struct KernelInfo {
  KernelFamily family = KernelFamily::brownian_motion;
  double l1 = 0.0, l2 = 0.0, l3 = 0.0;
  double lambda = 0.0, omega = 0.0;
  double a = 0.0;                    // integration origin
  std::string u_expr, v_expr;        // product family
  bool equal_roots = false;          // car3
};

class Kernel {
 public:
  virtual ~Kernel() = default;

  const KernelInfo& info() const { return info_; }
  KernelFamily family() const { return info_.family; }
  int smoothness() const { return q_; }
  const Interval& interval() const { return interval_; }
  virtual std::string spec() const;

  // K(t, s); throws DomainError outside the interval.
  double value(double t, double s) const;

  // One-sided i-th partial derivative in the first argument. The side is
  // consulted only when t == s.
  double partial_t(int i, double t, double s, Side side = Side::right) const;

  // d^{i+j} K / dt^i ds^j, for i, j <= smoothness().
  double cross(int i, int j, double t, double s) const;

  virtual int max_partial_order() const { return 8; }

  virtual bool stationary() const { return false; }
  // rho^(k)(u) at nonnegative lags for stationary families, k = 0..max_order,
  // written to outs[k][0..n). Default is a scalar loop; hot families override
  // with vectorized batches.
  virtual void rho_batch(const double* u, std::size_t n, int max_order,
                         double* const* outs) const;
  virtual double rho_deriv(int order, double u) const;

  // Copy of this kernel declared on a different interval (same parameters).
  virtual std::shared_ptr<const Kernel> with_interval(const Interval& iv) const = 0;

 protected:
  Kernel(KernelInfo info, Interval iv, int q) : info_(info), interval_(iv), q_(q) {}
  virtual double partial_impl(int i, double t, double s, Side side) const = 0;
  virtual double cross_impl(int i, int j, double t, double s) const = 0;

  KernelInfo info_;
  Interval interval_;
  int q_;
};

using KernelPtr = std::shared_ptr<const Kernel>;

// Pointwise operations.
double eval_kernel(const Kernel& k, double t, double s);
double eval_partial_t(const Kernel& k, int i, double t, double s, Side side = Side::right);
double eval_cross(const Kernel& k, int i, int j, double t, double s);

// Jump of the (2q+1)-th one-sided derivative across the diagonal, oriented to
// be positive for every supported family. The two-argument form insists the
// requested order is the kernel's jump order.
double derivative_jump(const Kernel& k);
double derivative_jump(const Kernel& k, int order);

// Integral of `base` from origin a in both arguments; closed forms where
// available, nested quadrature otherwise.
KernelPtr integrated_kernel(const KernelPtr& base, double a, const Interval& iv);
// Always-numeric variant, used to validate the quadrature fallback.
KernelPtr make_integrated_numeric(const KernelPtr& base, double a, const Interval& iv);

// Factories.
KernelPtr make_product(const Expr& u, const Expr& v, const Interval& iv);
KernelPtr make_linear_drift(double l1, double l2, const Interval& iv);
KernelPtr make_triangular(double lambda, const Interval& iv);
KernelPtr make_brownian_motion(const Interval& iv);
KernelPtr make_car2_expexp(double l1, double l2, const Interval& iv);
KernelPtr make_car2_expcos(double lambda, double omega, const Interval& iv);
KernelPtr make_matern32(double lambda, const Interval& iv);
KernelPtr make_car3(double l1, double l2, double l3, const Interval& iv);
KernelPtr make_matern52(double lambda, const Interval& iv);
KernelPtr make_integrated_bm(double a, const Interval& iv);
KernelPtr make_integrated_triangular(double lambda, const Interval& iv);
KernelPtr make_twice_integrated_bm(const Interval& iv);

// "family:param=value,..." CLI grammar, e.g. "matern32:lambda=1.0".
KernelPtr parse_kernel(const std::string& spec, const Interval& iv);

}  // namespace cblue
