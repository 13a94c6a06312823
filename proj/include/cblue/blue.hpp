#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cblue/common.hpp"
#include "cblue/drift.hpp"
#include "cblue/kernels.hpp"
#include "cblue/measures.hpp"

#include "json.hpp"

namespace cblue {

// Coefficients of the once-differentiable boundary construction. Both defining
// identities are checked before any constants object is handed out.
struct SmoothQ1Constants {
  double tau0 = 0, tau2 = 0;
  double g0A = 0, g1A = 0, b0A = 0, b1A = 0;
  double g0B = 0, g1B = 0, b0B = 0, b1B = 0;
  double s3 = 0;
};

struct BlueSolution {
  MeasureFamily family;  // unnormalized zeta components
  Eigen::MatrixXd C;
  Eigen::MatrixXd covariance;  // C^{-1}
  double residual_sup = 0.0;
  double tolerance = 1e-8;
  std::string kernel_spec;
  std::string drift_spec;
};

struct ResidualReport {
  double residual_sup = 0.0;
  double d_matrix_defect = 0.0;
  double unbiasedness_defect = 0.0;
};

SmoothQ1Constants q1_constants(const Kernel& kernel);

BlueSolution blue_markov_product(const Expr& u, const Expr& v, const DriftVector& drift,
                                 const Interval& iv);

BlueSolution blue_linear_drift_kernel(double l1, double l2, const DriftVector& drift,
                                      const Interval& iv);

struct MercerEigenpair {
  double value = 0.0;
  std::function<double(double)> fn;
};

BlueSolution blue_mercer(const std::vector<MercerEigenpair>& eigenpairs,
                         const std::vector<Eigen::VectorXd>& coefficients,
                         const std::function<double(double)>& base_density,
                         const DriftVector& drift, const Interval& iv);

BlueSolution blue_smooth_q1(const DriftVector& drift, const KernelPtr& kernel,
                            const SmoothQ1Constants& constants);

BlueSolution blue_integrated_bm(double a, const DriftVector& drift, const Interval& iv);

BlueSolution blue_integrated_triangular(double lambda, const DriftVector& drift,
                                        const Interval& iv);

// Estimator for the integrated model built from a solution for the base
// kernel plus a location-scale solution under the integrated kernel.
BlueSolution blue_transfer_integrated(const BlueSolution& base, const DriftVector& base_drift,
                                      const MeasureFamily& locscale, const KernelPtr& kernel,
                                      double a);

BlueSolution blue_twice_integrated_bm(const DriftVector& drift, const Interval& iv);

BlueSolution blue_car3(double l1, double l2, double l3, const DriftVector& drift,
                       const Interval& iv);

ResidualReport verify_wiener_hopf(const BlueSolution& solution, const Kernel& kernel,
                                  const DriftVector& drift, int grid_size = 201);

// Family dispatcher; every returned solution has been residual-verified.
BlueSolution solve(const KernelPtr& kernel, const DriftVector& drift, const Interval& iv);

// Rebuilds a density evaluator from its serialized tag.
std::optional<Density> density_for_tag(const std::string& tag, const KernelPtr& kernel,
                                       const DriftVector& drift);

nlohmann::json blue_solution_to_json(const BlueSolution& sol);

struct LoadedSolution {
  BlueSolution solution;
  KernelPtr kernel;
  std::optional<DriftVector> drift;
};
LoadedSolution blue_solution_from_json(const nlohmann::json& j);

}  // namespace cblue
