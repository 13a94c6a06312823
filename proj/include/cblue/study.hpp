#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cblue/blue.hpp"
#include "cblue/common.hpp"
#include "cblue/discrete.hpp"

#include "json.hpp"

namespace cblue {

struct StudyConfig {
  std::string kernel_spec = "ibm:a=0";
  std::string drift_spec = "1";
  Interval interval{1.0, 2.0};
  std::vector<int> Ns{3, 5, 10};
  std::vector<std::string> estimators{"blue-nn", "blue-2n2", "blue-2n0", "olse-2n0"};
  EfficiencyMode eff_mode = EfficiencyMode::det_root;
  std::string format = "text";  // text | csv | json
  uint64_t seed = 20240801;
  int replicates = 20000;

  void validate() const;
  static StudyConfig from_json(const nlohmann::json& j);
};

EfficiencyMode parse_eff_mode(const std::string& name);
std::string eff_mode_name(EfficiencyMode mode);

// Pre-baked comparison-study configurations over the integrated-Brownian
// error model on [1, 2] with N in {3, 5, 10}.
StudyConfig preset_config(const std::string& name);

struct TableCell {
  std::string estimator;
  int N = 0;
  double efficiency = 0.0;
  double var_or_det = 0.0;  // scalar variance for m = 1, det of covariance otherwise
};

struct TableResult {
  std::vector<TableCell> cells;
  EfficiencyMode mode = EfficiencyMode::det_root;
  std::string kernel_spec, drift_spec;
  Eigen::MatrixXd cont_cov;
};

// Design named by the study estimators; "values+derivs" augments N values
// with endpoint derivatives up to the kernel smoothness.
DesignSpec named_design(const std::string& name, int N, const Interval& iv, int q);

TableResult run_table(const StudyConfig& config);

struct ConvergenceRow {
  int N = 0;
  double var_dist = 0.0;
  double efficiency = 0.0;
  bool has_weight_errors = false;
  double interior_err = 0.0;
  double boundary_sum_err = 0.0;
  double boundary_deriv_err = 0.0;
};

std::vector<ConvergenceRow> run_convergence(const StudyConfig& config);

struct McResult {
  Eigen::MatrixXd closed_cov, empirical_cov;
  Eigen::VectorXd theta, empirical_mean;
  int replicates = 0;
  uint64_t seed = 0;
  double max_rel_cov_err = 0.0;
  double max_mean_sigmas = 0.0;
};

McResult run_mc(const StudyConfig& config);

std::string table_to_csv(const TableResult& table);
nlohmann::json table_to_json(const TableResult& table);
std::string table_to_text(const TableResult& table);
std::string convergence_to_csv(const std::vector<ConvergenceRow>& rows);
nlohmann::json mc_to_json(const McResult& mc);

}  // namespace cblue
