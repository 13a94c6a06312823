#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "cblue/blue.hpp"
#include "cblue/discrete.hpp"
#include "cblue/linalg.hpp"

using namespace cblue;

TEST_CASE("design matrix rows are drift derivative evaluations") {
  Interval iv{1.0, 2.0};
  DriftVector f = DriftVector::parse("1,t", iv);
  DesignSpec d;
  d.obs = {{1.0, 0}, {2.0, 0}};
  Eigen::MatrixXd X = design_matrix(f, d);
  CHECK(X(0, 0) == 1.0);
  CHECK(X(0, 1) == 1.0);
  CHECK(X(1, 0) == 1.0);
  CHECK(X(1, 1) == 2.0);

  DesignSpec dd;
  dd.obs = {{1.0, 1}};
  Eigen::MatrixXd Xd = design_matrix(f, dd);
  CHECK(Xd(0, 0) == 0.0);
  CHECK(Xd(0, 1) == 1.0);

  DesignSpec nn = design_blue_nn(3, iv);
  REQUIRE(nn.size() == 6);
  Eigen::MatrixXd Xnn = design_matrix(f, nn);
  CHECK(Xnn(1, 1) == doctest::Approx(1.5));  // value row at the midpoint
  CHECK(Xnn(4, 1) == doctest::Approx(1.0));  // derivative row
}

TEST_CASE("duplicate design entries are rejected") {
  DesignSpec d;
  d.obs = {{1.0, 0}, {1.0, 0}};
  CHECK_THROWS_AS(d.validate({0.0, 2.0}, 1), InvalidParameterError);
}

TEST_CASE("joint covariance with derivative observations") {
  Interval iv{0.5, 2.0};
  auto ibm = make_integrated_bm(0.0, iv);
  DesignSpec d;
  d.obs = {{1.0, 0}, {1.0, 1}};
  Eigen::MatrixXd S = joint_covariance(*ibm, d);
  CHECK(S(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(S(0, 1) == doctest::Approx(0.5));
  CHECK(S(1, 0) == doctest::Approx(0.5));
  CHECK(S(1, 1) == doctest::Approx(1.0));

  auto m32 = make_matern32(1.0, {0.0, 1.0});
  DesignSpec d2;
  d2.obs = {{0.0, 0}, {0.0, 1}};
  Eigen::MatrixXd S2 = joint_covariance(*m32, d2);
  CHECK(S2(0, 0) == doctest::Approx(1.0));
  CHECK(S2(0, 1) == doctest::Approx(0.0));
  CHECK(S2(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("white-noise GLS reduces to ordinary least squares") {
  Interval iv{0.0, 1.0};
  DriftVector f = DriftVector::parse("1,t", iv);
  DesignSpec d = design_values(7, iv);
  Eigen::MatrixXd X = design_matrix(f, d);
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(7, 7);
  EstimatorReport blue = discrete_blue(X, I);
  EstimatorReport ols = olse(X, I);
  CHECK((blue.weights - ols.weights).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((blue.covariance - ols.covariance).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::MatrixXd WX = blue.weights * X;
  CHECK((WX - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("GLS never loses to ordinary least squares") {
  std::mt19937 gen(41);
  std::uniform_real_distribution<double> lam(0.4, 2.5);
  Interval iv{0.0, 1.0};
  DriftVector f = DriftVector::parse("1,t", iv);
  for (int rep = 0; rep < 50; ++rep) {
    KernelPtr k = (rep % 2 == 0) ? make_matern32(lam(gen), iv)
                                 : make_car2_expexp(lam(gen), lam(gen) + 1.0, iv);
    int n = 6 + static_cast<int>(gen() % 10);
    DesignSpec d = design_values(n, iv);
    Eigen::MatrixXd X = design_matrix(f, d);
    Eigen::MatrixXd S = joint_covariance(*k, d);
    EstimatorReport blue = discrete_blue(X, S);
    EstimatorReport ols = olse(X, S);
    CHECK(min_eigenvalue(ols.covariance - blue.covariance) >= -1e-9);
    Eigen::MatrixXd WX = blue.weights * X;
    CHECK((WX - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("appending observations never hurts the discrete estimator") {
  std::mt19937 gen(47);
  Interval iv{0.0, 1.0};
  auto kernel = make_matern32(1.0, iv);
  DriftVector f = DriftVector::parse("1,t", iv);
  std::uniform_real_distribution<double> pick(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    DesignSpec base = design_values(6, iv);
    DesignSpec more = base;
    double extra = pick(gen);
    more.obs.push_back({extra, static_cast<int>(gen() % 2)});
    more.label = "extended";
    bool dup = false;
    for (const Observation& o : base.obs) {
      if (o.t == more.obs.back().t && o.order == more.obs.back().order) dup = true;
    }
    if (dup) continue;
    EstimatorReport small =
        discrete_blue(design_matrix(f, base), joint_covariance(*kernel, base));
    EstimatorReport big = discrete_blue(design_matrix(f, more), joint_covariance(*kernel, more));
    CHECK(min_eigenvalue(small.covariance - big.covariance) >= -1e-9);
  }
}

TEST_CASE("derivative observations at the ends only help") {
  Interval iv{0.0, 1.0};
  auto kernel = make_matern32(1.0, iv);
  DriftVector f = DriftVector::parse("1,t", iv);
  for (int n : {5, 9, 17}) {
    DesignSpec plain = design_values(n, iv);
    DesignSpec withd = design_values_with_end_derivatives(n, iv, 1);
    EstimatorReport a =
        discrete_blue(design_matrix(f, plain), joint_covariance(*kernel, plain));
    EstimatorReport b =
        discrete_blue(design_matrix(f, withd), joint_covariance(*kernel, withd));
    CHECK(min_eigenvalue(a.covariance - b.covariance) >= -1e-9);
  }
}

TEST_CASE("continuous covariance bounds every discrete design") {
  Interval iv{0.0, 1.0};
  auto kernel = make_matern32(1.0, iv);
  DriftVector f = DriftVector::parse("1,t", iv);
  BlueSolution cont = solve(kernel, f, iv);
  std::mt19937 gen(53);
  for (int rep = 0; rep < 20; ++rep) {
    int n = 5 + static_cast<int>(gen() % 20);
    DesignSpec d = design_values_with_end_derivatives(n, iv, 1);
    EstimatorReport repN = discrete_blue(design_matrix(f, d), joint_covariance(*kernel, d));
    CHECK(min_eigenvalue(repN.covariance - cont.covariance) >= -1e-9);
  }
}

TEST_CASE("efficiency modes") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(1, 1) / 12.0;
  CHECK(efficiency(a, a, EfficiencyMode::scalar_ratio) == doctest::Approx(1.0));
  Eigen::MatrixXd c2 = Eigen::MatrixXd::Identity(2, 2) * 0.5;
  Eigen::MatrixXd e2 = Eigen::MatrixXd::Identity(2, 2) * 2.0;
  CHECK(efficiency(c2, e2, EfficiencyMode::det_root) == doctest::Approx(0.25));
  CHECK(efficiency(c2, e2, EfficiencyMode::trace_ratio) == doctest::Approx(0.25));
  CHECK_THROWS_AS(efficiency(c2, e2, EfficiencyMode::scalar_ratio), InvalidParameterError);
  CHECK_THROWS_AS(efficiency(c2, Eigen::MatrixXd::Identity(3, 3), EfficiencyMode::det_root),
                  InvalidParameterError);
}

TEST_CASE("AR(2) precision entries and white-noise case") {
  Ar2Spec white = Ar2Spec::make(0.0, 0.0, 6);
  Eigen::MatrixXd P = ar2_precision(white);
  CHECK((P - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-15);

  Ar2Spec s = Ar2Spec::make(0.5, 0.2, 8);
  CHECK(s.k0 == doctest::Approx(1.29));
  CHECK(s.k1 == doctest::Approx(-0.4));
  CHECK(s.k2 == doctest::Approx(-0.2));
  CHECK(s.k22 == doctest::Approx(1.25));
  CHECK(s.k12 == doctest::Approx(-0.5));
  CHECK(s.S == doctest::Approx(1.3 * 0.3 * 1.2 / 0.8));

  CHECK_THROWS_AS(Ar2Spec::make(1.5, 0.0, 6), InvalidParameterError);
  CHECK_THROWS_AS(ar2_precision(Ar2Spec::make(0.1, 0.1, 4)), InvalidParameterError);
}

TEST_CASE("pentadiagonal precision inverts the closed-form covariance") {
  std::mt19937 gen(59);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  int done = 0;
  while (done < 20) {
    double a1 = u(gen), a2 = u(gen);
    if (!(std::abs(a2) < 0.95 && a1 + a2 < 0.95 && a2 - a1 < 0.95)) continue;
    int n = 100;
    Eigen::MatrixXd Sigma(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) Sigma(i, j) = ar2_autocov(a1, a2, i - j);
    }
    Eigen::MatrixXd P = ar2_precision(Ar2Spec::make(a1, a2, n));
    double err = (Sigma * P - Eigen::MatrixXd::Identity(n, n)).norm() /
                 Eigen::MatrixXd::Identity(n, n).norm();
    CAPTURE(a1);
    CAPTURE(a2);
    CHECK(err <= 1e-10);
    ++done;
  }
}

TEST_CASE("Yule-Walker inversion") {
  auto [a1, a2] = yule_walker_ar2(0.0, 0.0);
  CHECK(a1 == 0.0);
  CHECK(a2 == 0.0);

  // Discrete coefficients from the two-exponential model approach their
  // expansions as the spacing shrinks; the error must drop like Delta^3.
  double l1 = 1.0, l2 = 2.0;
  auto coeff_err = [&](double delta) {
    double p1 = std::exp(-l1 * delta), p2 = std::exp(-l2 * delta);
    double C = (1 - p2 * p2) * p1 / ((1 - p2 * p2) * p1 - (1 - p1 * p1) * p2);
    double r1 = C * p1 + (1 - C) * p2;
    double r2 = C * p1 * p1 + (1 - C) * p2 * p2;
    auto [b1, b2] = yule_walker_ar2(r1, r2);
    double want1 = 2.0 - (l1 + l2) * delta + (l1 * l1 + l2 * l2) * delta * delta / 2.0;
    double want2 = -1.0 + (l1 + l2) * delta - std::pow(l1 + l2, 2) * delta * delta / 2.0;
    return std::max(std::abs(b1 - want1), std::abs(b2 - want2));
  };
  double e1 = coeff_err(0.02), e2 = coeff_err(0.01);
  CHECK(e2 <= e1 / 6.0);  // third-order remainder
}

TEST_CASE("AR(2) weight columns approach the continuous estimator") {
  Interval iv{0.0, 1.0};
  auto kernel = make_matern32(1.0, iv);
  DriftVector f = DriftVector::parse("1", iv);
  auto rows = ar2_limit_check(kernel, f, {100, 200, 400});
  // Interior scaled weights converge to the constant density lambda/4
  // (scaled by s3), with error ratio at most 0.75 per doubling.
  CHECK(rows[1].interior_err <= 0.75 * rows[0].interior_err);
  CHECK(rows[2].interior_err <= 0.75 * rows[1].interior_err);
  // Endpoint pair sums approach z_A = 1/2.
  SmoothQ1Constants k = q1_constants(*kernel);
  BlueSolution cont = blue_smooth_q1(f, kernel, k);
  CHECK(cont.family.comp(0).atoms()[0].w[0] == doctest::Approx(0.5));
  CHECK(rows[2].boundary_sum_err <= rows[0].boundary_sum_err);
  CHECK(rows[2].boundary_sum_err <= 0.05);
}

TEST_CASE("AR(2) model variance approaches the continuous variance") {
  Interval iv{0.0, 1.0};
  auto kernel = make_matern32(1.0, iv);
  DriftVector f = DriftVector::parse("1,t", iv);
  auto rows = ar2_limit_check(kernel, f, {250, 500, 1000, 2000});
  CHECK(rows[1].var_dist < rows[0].var_dist);
  CHECK(rows[2].var_dist < rows[1].var_dist);
  CHECK(rows[3].var_dist <= 1e-3);
}

TEST_CASE("design and report JSON") {
  Interval iv{1.0, 2.0};
  DesignSpec d = design_blue_nn(3, iv);
  nlohmann::json j = design_to_json(d);
  DesignSpec back = design_from_json(j);
  REQUIRE(back.size() == d.size());
  for (int i = 0; i < d.size(); ++i) {
    CHECK(back.obs[i].t == d.obs[i].t);
    CHECK(back.obs[i].order == d.obs[i].order);
  }
  DriftVector f = DriftVector::parse("1,t", iv);
  auto kernel = make_integrated_bm(0.0, iv);
  EstimatorReport rep = discrete_blue(design_matrix(f, d), joint_covariance(*kernel, d));
  rep.efficiency = 0.5;
  nlohmann::json rj = estimator_report_to_json(rep);
  CHECK(rj.at("kind") == "BLUE");
  CHECK(rj.at("weights").size() == 2);
  CHECK(rj.at("efficiency").get<double>() == 0.5);
}

TEST_CASE("sampling is deterministic and matches the target covariance") {
  Interval iv{1.0, 2.0};
  auto kernel = make_integrated_bm(0.0, iv);
  DriftVector f = DriftVector::parse("1", iv);
  DesignSpec d = design_blue_2n0(3, iv);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);

  Eigen::MatrixXd draws1 = sample_paths(*kernel, d, f, theta, 200, 99);
  Eigen::MatrixXd draws2 = sample_paths(*kernel, d, f, theta, 200, 99);
  CHECK((draws1 - draws2).cwiseAbs().maxCoeff() == 0.0);
  Eigen::MatrixXd draws3 = sample_paths(*kernel, d, f, theta, 200, 100);
  CHECK((draws1 - draws3).cwiseAbs().maxCoeff() > 0.0);

  int count = 20000;
  Eigen::MatrixXd big = sample_paths(*kernel, d, f, theta, count, 7);
  Eigen::MatrixXd S = joint_covariance(*kernel, d);
  Eigen::MatrixXd emp = big.transpose() * big / count;
  for (int i = 0; i < S.rows(); ++i) {
    for (int j = 0; j < S.cols(); ++j) {
      double se = std::sqrt((S(i, i) * S(j, j) + S(i, j) * S(i, j)) / count);
      CHECK(std::abs(emp(i, j) - S(i, j)) <= 3.5 * se);
    }
  }
}

TEST_CASE("empirical estimator covariance matches the closed form") {
  Interval iv{1.0, 2.0};
  auto kernel = make_integrated_bm(0.0, iv);
  DriftVector f = DriftVector::parse("1", iv);
  DesignSpec d = design_blue_2n0(3, iv);
  Eigen::MatrixXd X = design_matrix(f, d);
  Eigen::MatrixXd S = joint_covariance(*kernel, d);
  EstimatorReport rep = discrete_blue(X, S);
  Eigen::VectorXd theta = Eigen::VectorXd::Ones(1);
  int count = 20000;
  Eigen::MatrixXd draws = sample_paths(*kernel, d, f, theta, count, 2024);
  Eigen::MatrixXd est = draws * rep.weights.transpose();
  double mean = est.col(0).mean();
  double var = (est.col(0).array() - mean).square().sum() / (count - 1);
  CHECK(std::abs(var - rep.covariance(0, 0)) / rep.covariance(0, 0) <= 0.03);
  CHECK(std::abs(mean - 1.0) <= 3.0 * std::sqrt(rep.covariance(0, 0) / count));
}
