#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cblue/common.hpp"
#include "cblue/drift.hpp"
#include "cblue/kernels.hpp"

#include "json.hpp"

namespace cblue {

struct Observation {
  double t = 0.0;
  int order = 0;
};

struct DesignSpec {
  std::vector<Observation> obs;
  std::string label;

  int size() const { return static_cast<int>(obs.size()); }
  void validate(const Interval& iv, int max_order) const;
};

// Equidistant designs of the comparison study; all include both endpoints.
DesignSpec design_values(int n, const Interval& iv);
DesignSpec design_blue_nn(int N, const Interval& iv);   // N values + N derivatives
DesignSpec design_blue_2n2(int N, const Interval& iv);  // 2N-2 values + end derivatives
DesignSpec design_blue_2n0(int N, const Interval& iv);  // 2N values
// n values plus endpoint derivatives of orders 1..max_deriv (oracle designs).
DesignSpec design_values_with_end_derivatives(int n, const Interval& iv, int max_deriv);

Eigen::MatrixXd design_matrix(const DriftVector& drift, const DesignSpec& design);
Eigen::MatrixXd joint_covariance(const Kernel& kernel, const DesignSpec& design);

enum class EstimatorKind { blue, olse };

struct EstimatorReport {
  Eigen::MatrixXd weights;     // m x n
  Eigen::MatrixXd covariance;  // m x m
  EstimatorKind kind = EstimatorKind::blue;
  std::optional<double> efficiency;
  bool pivoted_fallback = false;
};

EstimatorReport discrete_blue(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Sigma);
EstimatorReport olse(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Sigma);

enum class EfficiencyMode { scalar_ratio, det_root, det_ratio, trace_ratio };

double efficiency(const Eigen::MatrixXd& cont_cov, const Eigen::MatrixXd& est_cov,
                  EfficiencyMode mode);

// Discrete second-order autoregression and its banded precision matrix.
struct Ar2Spec {
  double a1 = 0.0, a2 = 0.0;
  int n = 0;
  double k0 = 0, k1 = 0, k2 = 0, k11 = 0, k12 = 0, k22 = 0, S = 0;

  static Ar2Spec make(double a1, double a2, int n);
};

Eigen::MatrixXd ar2_precision(const Ar2Spec& spec);

std::pair<double, double> yule_walker_ar2(double r1, double r2);

// Closed-form autocovariance of the stationary AR(2) with coefficients
// (a1, a2), classified by the autoregressive roots.
double ar2_autocov(double a1, double a2, int k);

// Columns of X^T Sigma^{-1} for equidistant observations under the AR(2)
// error model, from the closed pentadiagonal form.
std::vector<Eigen::VectorXd> ar2_weight_columns(const DriftVector& drift, const Interval& iv,
                                                int n, double a1, double a2);

struct Ar2LimitRow {
  int n = 0;
  double interior_err = 0;        // scaled interior weights vs. continuous density
  double boundary_sum_err = 0;    // h1+h2 and hN+hN-1 vs. endpoint value atoms
  double boundary_deriv_err = 0;  // Delta h1 and Delta hN vs. derivative atoms
  double var_dist = 0;            // || Var_N - Var_cont ||_F
};

// Discrete AR(2) approximation of the continuous estimator for the
// twice-differentiable stationary families, swept over grid sizes.
std::vector<Ar2LimitRow> ar2_limit_check(const KernelPtr& kernel, const DriftVector& drift,
                                         const std::vector<int>& Ns);

// Deterministic Gaussian sampling: row r holds X theta + L xi_r with a
// counter-based stream, reproducible for fixed (seed, r).
Eigen::MatrixXd sample_paths(const Kernel& kernel, const DesignSpec& design,
                             const DriftVector& drift, const Eigen::VectorXd& theta, int count,
                             uint64_t seed);

nlohmann::json design_to_json(const DesignSpec& design);
DesignSpec design_from_json(const nlohmann::json& j);
nlohmann::json estimator_report_to_json(const EstimatorReport& report);

}  // namespace cblue
