#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cblue/common.hpp"
#include "cblue/expr.hpp"

namespace cblue {

// User-supplied scalar function whose derivatives are only available through
// finite differences. Estimators built on these carry a degraded tolerance.
struct NumericFunction {
  std::function<double(double)> fn;
  std::string label = "numeric";
};

/// Vector of regression functions with exact derivatives up to max_order.
class DriftVector {
 public:
  using Component = std::variant<Expr, NumericFunction>;

  DriftVector(std::vector<Component> components, Interval interval, int max_order = 6);

  // Comma-separated component expressions, e.g. "1,t,t^2,1/t,1/t^2".
  static DriftVector parse(const std::string& text, Interval interval, int max_order = 6);

  int size() const { return static_cast<int>(components_.size()); }
  int max_order() const { return max_order_; }
  const Interval& interval() const { return interval_; }
  bool approximate() const { return approximate_; }
  const std::vector<Component>& components() const { return components_; }

  Eigen::VectorXd eval(int order, double t) const;
  double eval_component(int index, int order, double t) const;

  // Componentwise antiderivative vanishing at `from`, on the same interval.
  DriftVector integrated(double from) const;

  // New drift g = L f for a nonsingular matrix L (analytic components only).
  DriftVector linear_transform(const Eigen::MatrixXd& L) const;

  // Concatenation (f, g) over a common interval.
  static DriftVector concat(const DriftVector& f, const DriftVector& g);
  // Componentwise sum f + g (same dimension).
  static DriftVector add(const DriftVector& f, const DriftVector& g);

  std::string str() const;

  struct IndependenceReport {
    bool independent = false;
    double condition = 0.0;
  };
  // Gram matrix on a 64-point grid; independent iff condition < 1e12.
  IndependenceReport check_linear_independence() const;

 private:
  std::vector<Component> components_;
  Interval interval_;
  int max_order_;
  bool approximate_ = false;
};

// Finite-difference weights for the m-th derivative at x0 from arbitrary
// nodes (Fornberg's recursion).
std::vector<double> fd_weights(double x0, const std::vector<double>& nodes, int order);

}  // namespace cblue
