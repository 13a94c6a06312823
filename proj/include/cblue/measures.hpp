#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cblue/common.hpp"
#include "cblue/drift.hpp"
#include "cblue/expr.hpp"
#include "cblue/kernels.hpp"

#include "json.hpp"

namespace cblue {

// Absolutely continuous part of a measure: a closed-form vector evaluator
// plus a tag identifying the construction recipe (for serialization).
struct Density {
  std::function<Eigen::VectorXd(double)> fn;
  std::string tag = "closed-form";
};

struct Atom {
  double t = 0.0;
  Eigen::VectorXd w;
};

// Signed vector measure: point masses plus an optional smooth density.
class SignedVectorMeasure {
 public:
  SignedVectorMeasure(int dim, Interval iv) : dim_(dim), interval_(iv) {}

  int dim() const { return dim_; }
  const Interval& interval() const { return interval_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::optional<Density>& density() const { return density_; }

  // Atoms closer than 1e-12 * (B - A) merge by weight addition.
  void add_atom(double t, const Eigen::VectorXd& w);
  void set_density(Density d) { density_ = std::move(d); }
  void clear_density() { density_.reset(); }

  SignedVectorMeasure scaled(double c) const;
  static SignedVectorMeasure sum(const SignedVectorMeasure& x, const SignedVectorMeasure& y);

  bool is_zero() const { return atoms_.empty() && !density_; }

 private:
  int dim_;
  Interval interval_;
  std::vector<Atom> atoms_;
  std::optional<Density> density_;
};

// Components zeta_0 .. zeta_q of a derivative-using estimator.
class MeasureFamily {
 public:
  MeasureFamily(int dim, Interval iv, int q)
      : dim_(dim), interval_(iv), comps_(q + 1, SignedVectorMeasure(dim, iv)) {}

  int dim() const { return dim_; }
  int order() const { return static_cast<int>(comps_.size()) - 1; }
  const Interval& interval() const { return interval_; }
  SignedVectorMeasure& comp(int i) { return comps_.at(i); }
  const SignedVectorMeasure& comp(int i) const { return comps_.at(i); }

  MeasureFamily scaled(double c) const;
  static MeasureFamily sum(const MeasureFamily& x, const MeasureFamily& y);

 private:
  int dim_;
  Interval interval_;
  std::vector<SignedVectorMeasure> comps_;
};

// int g(t) zeta^T(dt): atom terms g(loc) w^T plus quadrature of g d^T.
Eigen::MatrixXd pair_integral(const SignedVectorMeasure& measure,
                              const std::function<Eigen::VectorXd(double)>& g,
                              double quad_tol = 1e-12);

// C = sum_i int zeta_i(dt) (f^(i)(t))^T.
Eigen::MatrixXd c_matrix(const MeasureFamily& family, const DriftVector& drift,
                         double quad_tol = 1e-12);

// Left-hand side of the optimality equation at s:
// sum_i int K^(i)(t, s) zeta_i(dt). Atoms sitting exactly on the diagonal
// contribute the average of the one-sided values.
Eigen::VectorXd apply_kernel(const MeasureFamily& family, const Kernel& kernel, double s,
                             double quad_tol = 1e-12);

// Moves the smooth part of component i into component 0 by repeated
// integration by parts, adding the boundary atom corrections to lower
// components. phi must match component i's density and carry analytic
// derivatives.
MeasureFamily canonicalize(const MeasureFamily& family, int i, const std::vector<Expr>& phi);

struct CombinedSolution {
  MeasureFamily family;
  Eigen::MatrixXd C;
};

// Sum of two optimality-equation solutions solves the equation for f + g
// with information matrix C_f + C_g.
CombinedSolution combine_solutions(const MeasureFamily& zeta, const MeasureFamily& eta,
                                   const DriftVector& f, const DriftVector& g);

// Reconstructs a density evaluator from its serialized tag.
using DensityFactory = std::function<std::optional<Density>(const std::string& tag)>;

nlohmann::json measure_family_to_json(const MeasureFamily& family);
MeasureFamily measure_family_from_json(const nlohmann::json& j,
                                       const DensityFactory& factory = nullptr);

}  // namespace cblue
