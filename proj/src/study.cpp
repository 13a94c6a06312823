#include "cblue/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace cblue {

namespace {

std::string fmt10(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void StudyConfig::validate() const {
  if (!interval.valid()) throw InvalidParameterError("interval must satisfy A < B");
  if (estimators.empty()) throw InvalidParameterError("estimator list is empty");
  for (int n : Ns) {
    if (n < 3) throw InvalidParameterError("N must be at least 3");
  }
  if (Ns.empty()) throw InvalidParameterError("N list is empty");
}

EfficiencyMode parse_eff_mode(const std::string& name) {
  if (name == "scalar-ratio") return EfficiencyMode::scalar_ratio;
  if (name == "det-root") return EfficiencyMode::det_root;
  if (name == "det-ratio") return EfficiencyMode::det_ratio;
  if (name == "trace-ratio") return EfficiencyMode::trace_ratio;
  throw ParseError("unknown efficiency mode '" + name + "'");
}

std::string eff_mode_name(EfficiencyMode mode) {
  switch (mode) {
    case EfficiencyMode::scalar_ratio: return "scalar-ratio";
    case EfficiencyMode::det_root: return "det-root";
    case EfficiencyMode::det_ratio: return "det-ratio";
    case EfficiencyMode::trace_ratio: return "trace-ratio";
  }
  return "?";
}

StudyConfig StudyConfig::from_json(const nlohmann::json& j) {
  StudyConfig c;
  if (j.contains("kernel")) c.kernel_spec = j.at("kernel").get<std::string>();
  if (j.contains("drift")) c.drift_spec = j.at("drift").get<std::string>();
  if (j.contains("interval")) {
    c.interval = {j.at("interval").at(0).get<double>(), j.at("interval").at(1).get<double>()};
  }
  if (j.contains("N")) c.Ns = j.at("N").get<std::vector<int>>();
  if (j.contains("estimators")) c.estimators = j.at("estimators").get<std::vector<std::string>>();
  if (j.contains("eff_mode")) c.eff_mode = parse_eff_mode(j.at("eff_mode").get<std::string>());
  if (j.contains("format")) c.format = j.at("format").get<std::string>();
  if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
  if (j.contains("replicates")) c.replicates = j.at("replicates").get<int>();
  c.validate();
  return c;
}

StudyConfig preset_config(const std::string& name) {
  StudyConfig c;
  c.kernel_spec = "ibm:a=0";
  c.interval = {1.0, 2.0};
  c.Ns = {3, 5, 10};
  c.estimators = {"blue-nn", "blue-2n2", "blue-2n0", "olse-2n0"};
  // The published comparison scalarizes multi-parameter covariances by the
  // plain determinant ratio, which reduces to the variance ratio for m = 1.
  c.eff_mode = EfficiencyMode::det_ratio;
  if (name == "table1") {
    c.drift_spec = "1";
  } else if (name == "table2") {
    c.drift_spec = "1,sin(3*pi*t),cos(3*pi*t)";
  } else if (name == "table3") {
    c.drift_spec = "1,t,t^2,1/t,1/t^2";
  } else {
    throw ParseError("unknown preset '" + name + "'");
  }
  return c;
}

DesignSpec named_design(const std::string& name, int N, const Interval& iv, int q) {
  if (name == "blue-nn") return design_blue_nn(N, iv);
  if (name == "blue-2n2") return design_blue_2n2(N, iv);
  if (name == "blue-2n0" || name == "olse-2n0") return design_blue_2n0(N, iv);
  if (name == "values") return design_values(N, iv);
  if (name == "values+derivs") return design_values_with_end_derivatives(N, iv, q);
  throw ParseError("unknown estimator/design '" + name + "'");
}

TableResult run_table(const StudyConfig& config) {
  config.validate();
  KernelPtr kernel = parse_kernel(config.kernel_spec, config.interval);
  DriftVector drift = DriftVector::parse(config.drift_spec, config.interval);
  BlueSolution cont = solve(kernel, drift, config.interval);

  TableResult out;
  out.mode = config.eff_mode;
  out.kernel_spec = config.kernel_spec;
  out.drift_spec = config.drift_spec;
  out.cont_cov = cont.covariance;
  const int m = drift.size();

  for (const std::string& est : config.estimators) {
    for (int N : config.Ns) {
      DesignSpec design = named_design(est, N, config.interval, kernel->smoothness());
      Eigen::MatrixXd X = design_matrix(drift, design);
      Eigen::MatrixXd Sigma = joint_covariance(*kernel, design);
      EstimatorReport rep =
          (est == "olse-2n0") ? olse(X, Sigma) : discrete_blue(X, Sigma);
      TableCell cell;
      cell.estimator = est;
      cell.N = N;
      cell.efficiency = efficiency(cont.covariance, rep.covariance, config.eff_mode);
      cell.var_or_det = (m == 1) ? rep.covariance(0, 0) : rep.covariance.determinant();
      out.cells.push_back(cell);
    }
  }
  return out;
}

std::vector<ConvergenceRow> run_convergence(const StudyConfig& config) {
  config.validate();
  KernelPtr kernel = parse_kernel(config.kernel_spec, config.interval);
  DriftVector drift = DriftVector::parse(config.drift_spec, config.interval);
  BlueSolution cont = solve(kernel, drift, config.interval);

  bool car2 = kernel->family() == KernelFamily::car2_expexp ||
              kernel->family() == KernelFamily::car2_expcos ||
              kernel->family() == KernelFamily::car2_explinear;
  std::vector<Ar2LimitRow> ar2_rows;
  if (car2) ar2_rows = ar2_limit_check(kernel, drift, config.Ns);

  const std::string est = config.estimators.front();
  std::vector<ConvergenceRow> rows;
  for (size_t idx = 0; idx < config.Ns.size(); ++idx) {
    int N = config.Ns[idx];
    ConvergenceRow row;
    row.N = N;
    DesignSpec design = named_design(est, N, config.interval, kernel->smoothness());
    Eigen::MatrixXd X = design_matrix(drift, design);
    Eigen::MatrixXd Sigma = joint_covariance(*kernel, design);
    EstimatorReport rep = discrete_blue(X, Sigma);
    row.var_dist = (rep.covariance - cont.covariance).norm();
    row.efficiency = efficiency(cont.covariance, rep.covariance,
                                drift.size() == 1 ? EfficiencyMode::scalar_ratio
                                                  : config.eff_mode);
    if (car2) {
      row.has_weight_errors = true;
      row.interior_err = ar2_rows[idx].interior_err;
      row.boundary_sum_err = ar2_rows[idx].boundary_sum_err;
      row.boundary_deriv_err = ar2_rows[idx].boundary_deriv_err;
    }
    rows.push_back(row);
  }
  return rows;
}

McResult run_mc(const StudyConfig& config) {
  config.validate();
  if (config.replicates < 1000) {
    throw InvalidParameterError("Monte Carlo needs at least 1000 replicates");
  }
  KernelPtr kernel = parse_kernel(config.kernel_spec, config.interval);
  DriftVector drift = DriftVector::parse(config.drift_spec, config.interval);
  const int m = drift.size();

  DesignSpec design =
      named_design(config.estimators.front(), config.Ns.front(), config.interval,
                   kernel->smoothness());
  Eigen::MatrixXd X = design_matrix(drift, design);
  Eigen::MatrixXd Sigma = joint_covariance(*kernel, design);
  EstimatorReport rep = (config.estimators.front() == "olse-2n0") ? olse(X, Sigma)
                                                                  : discrete_blue(X, Sigma);

  McResult mc;
  mc.theta = Eigen::VectorXd::Ones(m);
  mc.closed_cov = rep.covariance;
  mc.replicates = config.replicates;
  mc.seed = config.seed;

  Eigen::MatrixXd draws =
      sample_paths(*kernel, design, drift, mc.theta, config.replicates, config.seed);
  Eigen::MatrixXd estimates = draws * rep.weights.transpose();  // replicates x m
  mc.empirical_mean = estimates.colwise().mean();
  Eigen::MatrixXd centered = estimates.rowwise() - mc.empirical_mean.transpose();
  mc.empirical_cov = centered.transpose() * centered / (config.replicates - 1);

  mc.max_rel_cov_err = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      double scale = std::sqrt(mc.closed_cov(i, i) * mc.closed_cov(j, j));
      mc.max_rel_cov_err = std::max(
          mc.max_rel_cov_err, std::abs(mc.empirical_cov(i, j) - mc.closed_cov(i, j)) / scale);
    }
  }
  mc.max_mean_sigmas = 0.0;
  for (int i = 0; i < m; ++i) {
    double se = std::sqrt(mc.closed_cov(i, i) / config.replicates);
    mc.max_mean_sigmas =
        std::max(mc.max_mean_sigmas, std::abs(mc.empirical_mean[i] - mc.theta[i]) / se);
  }
  return mc;
}

std::string table_to_csv(const TableResult& table) {
  std::ostringstream os;
  os << "estimator,N,efficiency,var_or_det\n";
  for (const TableCell& c : table.cells) {
    os << c.estimator << "," << c.N << "," << fmt10(c.efficiency) << "," << fmt10(c.var_or_det)
       << "\n";
  }
  return os.str();
}

nlohmann::json table_to_json(const TableResult& table) {
  nlohmann::json j;
  j["kernel"] = table.kernel_spec;
  j["drift"] = table.drift_spec;
  j["eff_mode"] = eff_mode_name(table.mode);
  nlohmann::json cells = nlohmann::json::array();
  for (const TableCell& c : table.cells) {
    cells.push_back({{"estimator", c.estimator},
                     {"N", c.N},
                     {"efficiency", c.efficiency},
                     {"var_or_det", c.var_or_det}});
  }
  j["cells"] = cells;
  return j;
}

std::string table_to_text(const TableResult& table) {
  std::ostringstream os;
  os << "kernel=" << table.kernel_spec << " drift=" << table.drift_spec
     << " eff_mode=" << eff_mode_name(table.mode) << "\n";
  std::vector<int> Ns;
  for (const TableCell& c : table.cells) {
    if (std::find(Ns.begin(), Ns.end(), c.N) == Ns.end()) Ns.push_back(c.N);
  }
  os << "estimator";
  for (int n : Ns) os << "\tN=" << n;
  os << "\n";
  std::vector<std::string> names;
  for (const TableCell& c : table.cells) {
    if (std::find(names.begin(), names.end(), c.estimator) == names.end()) {
      names.push_back(c.estimator);
    }
  }
  for (const std::string& name : names) {
    os << name;
    for (int n : Ns) {
      for (const TableCell& c : table.cells) {
        if (c.estimator == name && c.N == n) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "\t%.5f", c.efficiency);
          os << buf;
        }
      }
    }
    os << "\n";
  }
  return os.str();
}

std::string convergence_to_csv(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream os;
  os << "N,var_dist,efficiency,interior_err,boundary_sum_err,boundary_deriv_err\n";
  for (const ConvergenceRow& r : rows) {
    os << r.N << "," << fmt10(r.var_dist) << "," << fmt10(r.efficiency);
    if (r.has_weight_errors) {
      os << "," << fmt10(r.interior_err) << "," << fmt10(r.boundary_sum_err) << ","
         << fmt10(r.boundary_deriv_err);
    } else {
      os << ",,,";
    }
    os << "\n";
  }
  return os.str();
}

nlohmann::json mc_to_json(const McResult& mc) {
  nlohmann::json j;
  auto mat = [](const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < M.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
      rows.push_back(row);
    }
    return rows;
  };
  j["seed"] = mc.seed;
  j["replicates"] = mc.replicates;
  j["closed_cov"] = mat(mc.closed_cov);
  j["empirical_cov"] = mat(mc.empirical_cov);
  j["empirical_mean"] = std::vector<double>(mc.empirical_mean.data(),
                                            mc.empirical_mean.data() + mc.empirical_mean.size());
  j["max_rel_cov_err"] = mc.max_rel_cov_err;
  j["max_mean_sigmas"] = mc.max_mean_sigmas;
  return j;
}

}  // namespace cblue
