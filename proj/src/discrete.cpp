#include "cblue/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cblue/blue.hpp"
#include "cblue/linalg.hpp"
#include "cblue/rng.hpp"

namespace cblue {

void DesignSpec::validate(const Interval& iv, int max_order) const {
  std::set<std::pair<double, int>> seen;
  for (const Observation& o : obs) {
    if (!iv.contains(o.t, 1e-10 * std::max(1.0, iv.length()))) {
      throw DomainError("design point outside interval");
    }
    if (o.order < 0 || o.order > max_order) {
      throw UnsupportedOrderError("design derivative order beyond smoothness");
    }
    if (!seen.insert({o.t, o.order}).second) {
      throw InvalidParameterError("duplicate (time, order) pair in design");
    }
  }
}

DesignSpec design_values(int n, const Interval& iv) {
  if (n < 2) throw InvalidParameterError("need at least two design points");
  DesignSpec d;
  d.label = "values(" + std::to_string(n) + ")";
  for (double t : linspace(iv.a, iv.b, n)) d.obs.push_back({t, 0});
  return d;
}

DesignSpec design_blue_nn(int N, const Interval& iv) {
  DesignSpec d;
  d.label = "blue-nn";
  auto pts = linspace(iv.a, iv.b, N);
  for (double t : pts) d.obs.push_back({t, 0});
  for (double t : pts) d.obs.push_back({t, 1});
  return d;
}

DesignSpec design_blue_2n2(int N, const Interval& iv) {
  DesignSpec d;
  d.label = "blue-2n2";
  // 2N-2 equidistant values at spacing (B-A)/(2N-3), then both end slopes.
  auto pts = linspace(iv.a, iv.b, 2 * N - 2);
  for (double t : pts) d.obs.push_back({t, 0});
  d.obs.push_back({iv.a, 1});
  d.obs.push_back({iv.b, 1});
  return d;
}

DesignSpec design_blue_2n0(int N, const Interval& iv) {
  DesignSpec d;
  d.label = "blue-2n0";
  for (double t : linspace(iv.a, iv.b, 2 * N)) d.obs.push_back({t, 0});
  return d;
}

DesignSpec design_values_with_end_derivatives(int n, const Interval& iv, int max_deriv) {
  DesignSpec d = design_values(n, iv);
  d.label = "values+derivs";
  for (int k = 1; k <= max_deriv; ++k) {
    d.obs.push_back({iv.a, k});
    d.obs.push_back({iv.b, k});
  }
  return d;
}

Eigen::MatrixXd design_matrix(const DriftVector& drift, const DesignSpec& design) {
  Eigen::MatrixXd X(design.size(), drift.size());
  for (int i = 0; i < design.size(); ++i) {
    X.row(i) = drift.eval(design.obs[i].order, design.obs[i].t).transpose();
  }
  return X;
}

Eigen::MatrixXd joint_covariance(const Kernel& kernel, const DesignSpec& design) {
  design.validate(kernel.interval(), kernel.smoothness());
  const int n = design.size();
  Eigen::MatrixXd S(n, n);
  if (kernel.stationary()) {
    int max_ord = 0;
    for (const Observation& o : design.obs) max_ord = std::max(max_ord, o.order);
    const int kmax = 2 * max_ord;
    std::vector<std::vector<double>> bufs(kmax + 1);
    std::vector<double*> ptrs(kmax + 1);
    std::vector<double> lags(n);
    for (int i = 0; i < n; ++i) {
      const int len = n - i;
      for (int j = i; j < n; ++j) lags[j - i] = std::abs(design.obs[i].t - design.obs[j].t);
      for (int k = 0; k <= kmax; ++k) {
        bufs[k].resize(len);
        ptrs[k] = bufs[k].data();
      }
      kernel.rho_batch(lags.data(), len, kmax, ptrs.data());
      for (int j = i; j < n; ++j) {
        const Observation& oi = design.obs[i];
        const Observation& oj = design.obs[j];
        int k = oi.order + oj.order;
        double sign = (oj.order % 2 == 0) ? 1.0 : -1.0;
        if (oi.t < oj.t && k % 2 != 0) sign = -sign;
        double v = sign * bufs[k][j - i];
        S(i, j) = v;
        S(j, i) = v;
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        double v = kernel.cross(design.obs[i].order, design.obs[j].order, design.obs[i].t,
                                design.obs[j].t);
        S(i, j) = v;
        S(j, i) = v;
      }
    }
  }
  return S;
}

namespace {

// Solve Sigma W = X by Cholesky. Very smooth kernels give Gram matrices that
// are numerically indefinite on dense grids; a diagonal jitter ladder keeps
// the solve well-posed and is recorded as a pivoted fallback.
Eigen::MatrixXd covariance_solve(const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& X,
                                 bool* pivoted) {
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() == Eigen::Success) {
    *pivoted = false;
    return llt.solve(X);
  }
  *pivoted = true;
  CholResult chol = chol_with_jitter(Sigma);
  Eigen::MatrixXd W = chol.L.triangularView<Eigen::Lower>().solve(X);
  return chol.L.triangularView<Eigen::Lower>().transpose().solve(W);
}

}  // namespace

EstimatorReport discrete_blue(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Sigma) {
  EstimatorReport rep;
  rep.kind = EstimatorKind::blue;
  Eigen::MatrixXd W = covariance_solve(Sigma, X, &rep.pivoted_fallback);
  Eigen::MatrixXd M = X.transpose() * W;  // information matrix
  M = 0.5 * (M + M.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw DegenerateModelError("design matrix is rank deficient for this model");
  }
  rep.covariance = llt.solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
  rep.covariance = 0.5 * (rep.covariance + rep.covariance.transpose()).eval();
  rep.weights = rep.covariance * W.transpose();
  return rep;
}

EstimatorReport olse(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Sigma) {
  EstimatorReport rep;
  rep.kind = EstimatorKind::olse;
  Eigen::MatrixXd G = X.transpose() * X;
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    throw DegenerateModelError("design matrix is rank deficient");
  }
  Eigen::MatrixXd Ginv = llt.solve(Eigen::MatrixXd::Identity(G.rows(), G.cols()));
  rep.weights = Ginv * X.transpose();
  rep.covariance = rep.weights * Sigma * rep.weights.transpose();
  rep.covariance = 0.5 * (rep.covariance + rep.covariance.transpose()).eval();
  return rep;
}

double efficiency(const Eigen::MatrixXd& cont_cov, const Eigen::MatrixXd& est_cov,
                  EfficiencyMode mode) {
  if (cont_cov.rows() != est_cov.rows() || cont_cov.cols() != est_cov.cols()) {
    throw InvalidParameterError("covariance dimension mismatch");
  }
  const int m = static_cast<int>(cont_cov.rows());
  switch (mode) {
    case EfficiencyMode::scalar_ratio:
      if (m != 1) throw InvalidParameterError("scalar-ratio efficiency needs m = 1");
      return cont_cov(0, 0) / est_cov(0, 0);
    case EfficiencyMode::det_root:
      return std::pow(cont_cov.determinant() / est_cov.determinant(), 1.0 / m);
    case EfficiencyMode::det_ratio:
      return cont_cov.determinant() / est_cov.determinant();
    case EfficiencyMode::trace_ratio:
      return cont_cov.trace() / est_cov.trace();
  }
  throw InvalidParameterError("unknown efficiency mode");
}

Ar2Spec Ar2Spec::make(double a1, double a2, int n) {
  if (!(std::abs(a2) < 1.0 && a2 + a1 < 1.0 && a2 - a1 < 1.0)) {
    throw InvalidParameterError("AR(2) coefficients outside the stationarity triangle");
  }
  Ar2Spec s;
  s.a1 = a1;
  s.a2 = a2;
  s.n = n;
  s.k0 = 1.0 + a1 * a1 + a2 * a2;
  s.k1 = -a1 + a1 * a2;
  s.k2 = -a2;
  s.k11 = 1.0;
  s.k12 = -a1;
  s.k22 = 1.0 + a1 * a1;
  s.S = (1.0 + a1 - a2) * (1.0 - a1 - a2) * (1.0 + a2) / (1.0 - a2);
  return s;
}

Eigen::MatrixXd ar2_precision(const Ar2Spec& s) {
  if (s.n < 5) throw InvalidParameterError("pentadiagonal form needs at least 5 points");
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(s.n, s.n);
  for (int i = 0; i < s.n; ++i) {
    P(i, i) = s.k0;
    if (i + 1 < s.n) P(i, i + 1) = P(i + 1, i) = s.k1;
    if (i + 2 < s.n) P(i, i + 2) = P(i + 2, i) = s.k2;
  }
  P(0, 0) = s.k11;
  P(0, 1) = P(1, 0) = s.k12;
  P(1, 1) = s.k22;
  P(s.n - 1, s.n - 1) = s.k11;
  P(s.n - 1, s.n - 2) = P(s.n - 2, s.n - 1) = s.k12;
  P(s.n - 2, s.n - 2) = s.k22;
  return P / s.S;
}

std::pair<double, double> yule_walker_ar2(double r1, double r2) {
  if (!(std::abs(r1) < 1.0)) throw InvalidParameterError("|r1| must be below 1");
  double a1 = r1 * (1.0 - r2) / (1.0 - r1 * r1);
  double a2 = (r2 - r1 * r1) / (1.0 - r1 * r1);
  if (!(std::abs(a2) < 1.0 && a2 + a1 < 1.0 && a2 - a1 < 1.0)) {
    throw InvalidParameterError("autocovariances do not define a stationary AR(2)");
  }
  return {a1, a2};
}

double ar2_autocov(double a1, double a2, int k) {
  if (k < 0) k = -k;
  const double disc = a1 * a1 + 4.0 * a2;
  if (disc > 1e-12) {
    double root = std::sqrt(disc);
    double p1 = 0.5 * (a1 + root);
    double p2 = 0.5 * (a1 - root);
    double C = (1.0 - p2 * p2) * p1 / ((1.0 - p2 * p2) * p1 - (1.0 - p1 * p1) * p2);
    return C * std::pow(p1, k) + (1.0 - C) * std::pow(p2, k);
  }
  if (disc < -1e-12) {
    double p = std::sqrt(-a2);
    double b = std::acos(std::clamp(a1 / (2.0 * p), -1.0, 1.0));
    double C = (std::cos(b) / std::sin(b)) * (1.0 - p * p) / (1.0 + p * p);
    return std::pow(p, k) * (std::cos(b * k) + C * std::sin(b * k));
  }
  double p = 0.5 * a1;
  double C = (1.0 - p * p) / (1.0 + p * p);
  return std::pow(p, k) * (1.0 + k * C);
}

std::vector<Eigen::VectorXd> ar2_weight_columns(const DriftVector& drift, const Interval& iv,
                                                int n, double a1, double a2) {
  if (n < 5) throw InvalidParameterError("weight columns need at least 5 points");
  Ar2Spec check = Ar2Spec::make(a1, a2, n);
  (void)check;
  // The banded combination cancels down to O(Delta^4) of the drift scale, so
  // the accumulation runs in extended precision.
  const long double la1 = a1, la2 = a2;
  const long double k0 = 1.0L + la1 * la1 + la2 * la2;
  const long double k1 = -la1 + la1 * la2;
  const long double k2 = -la2;
  const long double k11 = 1.0L, k12 = -la1, k22 = 1.0L + la1 * la1;
  const long double S =
      (1.0L + la1 - la2) * (1.0L - la1 - la2) * (1.0L + la2) / (1.0L - la2);
  auto pts = linspace(iv.a, iv.b, n);
  const int m = drift.size();
  std::vector<std::vector<long double>> f(n, std::vector<long double>(m));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v = drift.eval(0, pts[i]);
    for (int c = 0; c < m; ++c) f[i][c] = v[c];
  }
  std::vector<Eigen::VectorXd> h(n, Eigen::VectorXd(m));
  for (int c = 0; c < m; ++c) {
    h[0][c] = static_cast<double>((k11 * f[0][c] + k12 * f[1][c] + k2 * f[2][c]) / S);
    h[1][c] = static_cast<double>(
        (k12 * f[0][c] + k22 * f[1][c] + k1 * f[2][c] + k2 * f[3][c]) / S);
    for (int i = 2; i < n - 2; ++i) {
      h[i][c] = static_cast<double>((k2 * f[i - 2][c] + k1 * f[i - 1][c] + k0 * f[i][c] +
                                     k1 * f[i + 1][c] + k2 * f[i + 2][c]) /
                                    S);
    }
    h[n - 2][c] = static_cast<double>(
        (k12 * f[n - 1][c] + k22 * f[n - 2][c] + k1 * f[n - 3][c] + k2 * f[n - 4][c]) / S);
    h[n - 1][c] =
        static_cast<double>((k11 * f[n - 1][c] + k12 * f[n - 2][c] + k2 * f[n - 3][c]) / S);
  }
  return h;
}

namespace {

// Discrete-model autocovariances at lags 1 and 2 matched to the continuous
// family at spacing delta.
std::pair<double, double> discrete_r12(const Kernel& kernel, double delta) {
  const KernelInfo& info = kernel.info();
  switch (kernel.family()) {
    case KernelFamily::car2_expexp: {
      double p1 = std::exp(-info.l1 * delta);
      double p2 = std::exp(-info.l2 * delta);
      double C = (1.0 - p2 * p2) * p1 / ((1.0 - p2 * p2) * p1 - (1.0 - p1 * p1) * p2);
      auto r = [&](int k) { return C * std::pow(p1, k) + (1.0 - C) * std::pow(p2, k); };
      return {r(1), r(2)};
    }
    case KernelFamily::car2_expcos: {
      double p = std::exp(-info.lambda * delta);
      double b = info.omega * delta;
      double C = (std::cos(b) / std::sin(b)) * (1.0 - p * p) / (1.0 + p * p);
      auto r = [&](int k) { return std::pow(p, k) * (std::cos(b * k) + C * std::sin(b * k)); };
      return {r(1), r(2)};
    }
    case KernelFamily::car2_explinear: {
      double p = std::exp(-info.lambda * delta);
      double C = (1.0 - p * p) / (1.0 + p * p);
      auto r = [&](int k) { return std::pow(p, k) * (1.0 + k * C); };
      return {r(1), r(2)};
    }
    default:
      throw UnsupportedError("discrete AR(2) matching needs a CAR(2)-type kernel");
  }
}

}  // namespace

std::vector<Ar2LimitRow> ar2_limit_check(const KernelPtr& kernel, const DriftVector& drift,
                                         const std::vector<int>& Ns) {
  SmoothQ1Constants k = q1_constants(*kernel);
  BlueSolution cont = blue_smooth_q1(drift, kernel, k);
  const Interval& iv = kernel->interval();
  const int m = drift.size();

  auto zfun = [&](double t) {
    return Eigen::VectorXd(
        (k.tau0 * drift.eval(0, t) - k.tau2 * drift.eval(2, t) + drift.eval(4, t)) / k.s3);
  };
  Eigen::VectorXd zA = (drift.eval(3, iv.a) - k.g1A * drift.eval(1, iv.a) +
                        k.g0A * drift.eval(0, iv.a)) /
                       k.s3;
  Eigen::VectorXd zB = (-drift.eval(3, iv.b) + k.g1B * drift.eval(1, iv.b) +
                        k.g0B * drift.eval(0, iv.b)) /
                       k.s3;
  Eigen::VectorXd z1A = (-drift.eval(2, iv.a) + k.b1A * drift.eval(1, iv.a) -
                         k.b0A * drift.eval(0, iv.a)) /
                        k.s3;
  Eigen::VectorXd z1B = (drift.eval(2, iv.b) + k.b1B * drift.eval(1, iv.b) +
                         k.b0B * drift.eval(0, iv.b)) /
                        k.s3;

  std::vector<Ar2LimitRow> rows;
  for (int n : Ns) {
    if (n < 6) throw InvalidParameterError("grid too small for the limit check");
    double delta = iv.length() / (n - 1);
    auto [r1, r2] = discrete_r12(*kernel, delta);
    auto [a1, a2] = yule_walker_ar2(r1, r2);
    Ar2Spec spec = Ar2Spec::make(a1, a2, n);
    auto h = ar2_weight_columns(drift, iv, n, a1, a2);
    auto pts = linspace(iv.a, iv.b, n);

    Ar2LimitRow row;
    row.n = n;
    double d4 = std::pow(delta, 4);
    for (int i = 2; i < n - 2; ++i) {
      Eigen::VectorXd scaled = spec.S * h[i] / d4;
      row.interior_err =
          std::max(row.interior_err,
                   (scaled - k.s3 * zfun(pts[i])).cwiseAbs().maxCoeff());
    }
    row.boundary_sum_err = std::max((h[0] + h[1] - zA).cwiseAbs().maxCoeff(),
                                    (h[n - 1] + h[n - 2] - zB).cwiseAbs().maxCoeff());
    // The first column approximates the negated slope weight: the divided
    // difference it forms reads y'(A) as (y(t2) - y(t1)) / Delta.
    row.boundary_deriv_err = std::max((delta * h[0] + z1A).cwiseAbs().maxCoeff(),
                                      (delta * h[n - 1] - z1B).cwiseAbs().maxCoeff());

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < n; ++i) M += h[i] * drift.eval(0, pts[i]).transpose();
    M = 0.5 * (M + M.transpose()).eval();
    Eigen::MatrixXd var_n = M.llt().solve(Eigen::MatrixXd::Identity(m, m));
    row.var_dist = (var_n - cont.covariance).norm();
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json design_to_json(const DesignSpec& design) {
  nlohmann::json pts = nlohmann::json::array();
  for (const Observation& o : design.obs) {
    pts.push_back({{"t", o.t}, {"order", o.order}});
  }
  return {{"points", pts}, {"label", design.label}};
}

DesignSpec design_from_json(const nlohmann::json& j) {
  DesignSpec d;
  d.label = j.value("label", std::string());
  for (const auto& p : j.at("points")) {
    d.obs.push_back({p.at("t").get<double>(), p.at("order").get<int>()});
  }
  return d;
}

nlohmann::json estimator_report_to_json(const EstimatorReport& report) {
  auto mat = [](const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < M.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < M.cols(); ++c) row.push_back(M(i, c));
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json j;
  j["kind"] = report.kind == EstimatorKind::blue ? "BLUE" : "OLSE";
  j["weights"] = mat(report.weights);
  j["covariance"] = mat(report.covariance);
  if (report.efficiency) j["efficiency"] = *report.efficiency;
  return j;
}

Eigen::MatrixXd sample_paths(const Kernel& kernel, const DesignSpec& design,
                             const DriftVector& drift, const Eigen::VectorXd& theta, int count,
                             uint64_t seed) {
  if (theta.size() != drift.size()) throw InvalidParameterError("theta dimension mismatch");
  const int n = design.size();
  Eigen::MatrixXd Sigma = joint_covariance(kernel, design);
  CholResult chol = chol_with_jitter(Sigma);
  Eigen::MatrixXd X = design_matrix(drift, design);
  Eigen::VectorXd mean = X * theta;
  Eigen::MatrixXd draws(count, n);
  for (int r = 0; r < count; ++r) {
    Philox gen(seed, static_cast<uint64_t>(r));
    Eigen::VectorXd xi(n);
    for (int i = 0; i < n; ++i) xi[i] = gen.normal(static_cast<uint64_t>(i));
    draws.row(r) = (mean + chol.L * xi).transpose();
  }
  return draws;
}

}  // namespace cblue
