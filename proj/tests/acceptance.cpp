// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier than the unit tests; run through ctest or directly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cblue/blue.hpp"
#include "cblue/discrete.hpp"
#include "cblue/linalg.hpp"
#include "cblue/study.hpp"

using namespace cblue;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s%s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double table_entry(const TableResult& t, const std::string& est, int N) {
  for (const TableCell& c : t.cells) {
    if (c.estimator == est && c.N == N) return c.efficiency;
  }
  throw std::runtime_error("missing table cell");
}

// ---------------------------------------------------------------------------

void criterion1_table1() {
  auto start = std::chrono::steady_clock::now();
  StudyConfig c = preset_config("table1");
  c.eff_mode = EfficiencyMode::scalar_ratio;
  TableResult t = run_table(c);
  double err_ones = 0.0;
  for (int N : {3, 5, 10}) {
    err_ones = std::max(err_ones, std::abs(table_entry(t, "blue-nn", N) - 1.0));
    err_ones = std::max(err_ones, std::abs(table_entry(t, "blue-2n2", N) - 1.0));
  }
  const double blue2n0[3] = {0.8593, 0.9147, 0.9570};
  const double olse2n0[3] = {0.0732, 0.0733, 0.0734};
  double err_vals = 0.0;
  int idx = 0;
  for (int N : {3, 5, 10}) {
    err_vals = std::max(err_vals, std::abs(table_entry(t, "blue-2n0", N) - blue2n0[idx]));
    err_vals = std::max(err_vals, std::abs(table_entry(t, "olse-2n0", N) - olse2n0[idx]));
    ++idx;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream d;
  d << "max |eff-1| = " << err_ones << ", max value error = " << err_vals << ", " << secs
    << " s";
  report(1, "single-parameter efficiency table", err_ones <= 1e-6 && err_vals <= 5e-4 &&
                                                     secs < 10.0,
         d.str());
}

void criterion2_tables23() {
  const double want2[4][3] = {{0.41246, 0.92907, 0.99680},
                              {0.45573, 0.98706, 0.99972},
                              {0.47796, 0.77195, 0.89641},
                              {0.00113, 0.00137, 0.00218}};
  const double want3[4][3] = {{0.69608, 0.95988, 0.99791},
                              {0.86903, 0.99379, 0.99981},
                              {0.10040, 0.33338, 0.62529},
                              {0.08873, 0.14103, 0.11890}};
  const char* est[4] = {"blue-nn", "blue-2n2", "blue-2n0", "olse-2n0"};
  const int Ns[3] = {3, 5, 10};

  auto max_err = [&](const std::string& preset, const double want[4][3], EfficiencyMode mode,
                     TableResult* out) {
    StudyConfig c = preset_config(preset);
    c.eff_mode = mode;
    *out = run_table(c);
    double err = 0.0;
    for (int e = 0; e < 4; ++e) {
      for (int n = 0; n < 3; ++n) {
        err = std::max(err, std::abs(table_entry(*out, est[e], Ns[n]) - want[e][n]));
      }
    }
    return err;
  };

  TableResult t2, t3;
  // det-root is tried first, then the plain determinant ratio; the matching
  // scalarization is part of the reported outcome.
  for (auto mode : {EfficiencyMode::det_root, EfficiencyMode::det_ratio}) {
    double err2 = max_err("table2", want2, mode, &t2);
    double err3 = max_err("table3", want3, mode, &t3);
    if (err2 <= 2e-3 && err3 <= 2e-3) {
      std::ostringstream d;
      d << eff_mode_name(mode) << " mode reproduces all 24 entries, max error = "
        << std::max(err2, err3);
      report(2, "multi-parameter efficiency tables", true, d.str());
      return;
    }
  }
  double err2 = max_err("table2", want2, EfficiencyMode::det_ratio, &t2);
  double err3 = max_err("table3", want3, EfficiencyMode::det_ratio, &t3);
  // Documented fallback: BLUE efficiencies increase toward one down every
  // column and the OLSE sits below every BLUE.
  bool fallback = true;
  for (const TableResult* t : {&t2, &t3}) {
    for (const char* blue_est : {"blue-nn", "blue-2n2"}) {
      double prev = 0.0;
      for (int N : {3, 5, 10}) {
        double v = table_entry(*t, blue_est, N);
        if (v + 1e-9 < prev || v > 1.0 + 1e-6) fallback = false;
        prev = v;
      }
    }
    for (int N : {3, 5, 10}) {
      double o = table_entry(*t, "olse-2n0", N);
      for (const char* blue_est : {"blue-nn", "blue-2n2", "blue-2n0"}) {
        if (o >= table_entry(*t, blue_est, N)) fallback = false;
      }
    }
  }
  std::ostringstream d;
  d << "no scalarization reproduces the tables (det-ratio errors " << err2 << " / " << err3
    << "); fallback ordering check " << (fallback ? "holds" : "fails");
  report(2, "multi-parameter efficiency tables", fallback, d.str());
}

void criterion3_residual_suite() {
  struct Case {
    const char* kernel;
    const char* drift;
    Interval iv;
  };
  const std::vector<Case> cases = {
      {"triangular:lambda=0.8", "1,t,t^2", {0.0, 1.0}},
      {"lineardrift:l1=2,l2=1", "1,t", {0.0, 0.5}},
      {"expexp:l1=1,l2=2", "1,t,t^2", {0.0, 1.0}},
      {"expcos:lambda=1,omega=2", "1,t,t^2", {0.0, 1.0}},
      {"matern32:lambda=1", "1,t,t^2", {0.0, 1.0}},
      {"ibm:a=0", "1,t,t^2,1/t,1/t^2", {1.0, 2.0}},
      {"ibm:a=0.5", "1,t,t^2,1/t,1/t^2", {1.0, 2.0}},
      {"itri:lambda=0.5", "1,t", {1.0, 2.0}},
      {"tibm", "1,t", {1.0, 2.0}},
      {"car3:l1=1,l2=2,l3=3", "1,t", {1.0, 2.0}},
  };
  double worst = 0.0;
  std::string worst_case;
  bool pass = true;
  for (const Case& c : cases) {
    try {
      KernelPtr kernel = parse_kernel(c.kernel, c.iv);
      DriftVector drift = DriftVector::parse(c.drift, c.iv);
      BlueSolution sol = solve(kernel, drift, c.iv);
      ResidualReport rep = verify_wiener_hopf(sol, *kernel, drift, 201);
      if (rep.residual_sup > worst) {
        worst = rep.residual_sup;
        worst_case = c.kernel;
      }
      if (rep.residual_sup >= 1e-8) pass = false;
    } catch (const std::exception& e) {
      pass = false;
      worst_case = std::string(c.kernel) + " threw: " + e.what();
    }
  }
  std::ostringstream d;
  d << "worst residual " << worst << " (" << worst_case << ")";
  report(3, "optimality-equation residual suite", pass, d.str());
}

void criterion4_sign_correction() {
  Interval iv{1.0, 2.0};
  DriftVector f = DriftVector::parse("1", iv);
  bool pass = true;
  std::ostringstream d;
  try {
    BlueSolution sol = blue_twice_integrated_bm(f, iv);
    const auto& a0 = sol.family.comp(0).atoms();
    const auto& a1 = sol.family.comp(1).atoms();
    const auto& a2 = sol.family.comp(2).atoms();
    pass = pass && std::abs(a0[0].w[0] - 720.0) < 1e-9 && std::abs(a1[0].w[0] + 360.0) < 1e-9 &&
           std::abs(a2[0].w[0] - 60.0) < 1e-9;
    pass = pass && std::abs(sol.C(0, 0) - 720.0) < 1e-8;
    pass = pass && sol.residual_sup < 1e-10;
    d << "corrected atoms/C ok, residual " << sol.residual_sup;
  } catch (const std::exception& e) {
    pass = false;
    d << "construction threw: " << e.what();
  }
  // The as-printed variant must fail: negative C and an O(1) residual.
  auto kernel = make_twice_integrated_bm(iv);
  MeasureFamily printed(1, iv, 2);
  Eigen::VectorXd w(1);
  w << -720.0;
  printed.comp(0).add_atom(1.0, w);
  w << 360.0;
  printed.comp(1).add_atom(1.0, w);
  w << -60.0;
  printed.comp(2).add_atom(1.0, w);
  Eigen::MatrixXd C = c_matrix(printed, f);
  BlueSolution fake{printed, C, C.inverse(), 0.0, 1e-8, kernel->spec(), f.str()};
  ResidualReport rep = verify_wiener_hopf(fake, *kernel, f, 201);
  pass = pass && C(0, 0) < 0.0 && rep.residual_sup >= 0.1;
  d << "; as-printed C = " << C(0, 0) << ", residual " << rep.residual_sup;
  report(4, "sign-corrected twice-integrated construction", pass, d.str());
}

void criterion5_transfer() {
  Interval iv{1.0, 2.0};
  DriftVector f = DriftVector::parse("1", iv);
  bool pass = true;
  std::ostringstream d;
  try {
    auto bm = make_brownian_motion(iv);
    BlueSolution base = solve(bm, f, iv);
    BlueSolution loc = blue_integrated_bm(0.0, f, iv);
    BlueSolution lifted = blue_transfer_integrated(base, f, loc.family, bm, 0.0);
    BlueSolution direct = blue_integrated_bm(0.0, f.integrated(0.0), iv);
    double errC = (lifted.C - direct.C).cwiseAbs().maxCoeff();
    double errV = (lifted.covariance - direct.covariance).cwiseAbs().maxCoeff();
    double err_atoms = 0.0;
    for (int comp = 0; comp <= 1; ++comp) {
      const auto& xa = lifted.family.comp(comp).atoms();
      const auto& ya = direct.family.comp(comp).atoms();
      if (xa.size() != ya.size()) {
        err_atoms = 1.0;
        break;
      }
      for (size_t i = 0; i < xa.size(); ++i) {
        err_atoms = std::max(err_atoms, (xa[i].w - ya[i].w).cwiseAbs().maxCoeff());
      }
    }
    pass = pass && errC <= 1e-9 && errV <= 1e-9 && err_atoms <= 1e-9;
    d << "bm errC=" << errC << " errAtoms=" << err_atoms;

    double lambda = 0.5;
    auto tri = make_triangular(lambda, iv);
    BlueSolution base_t = solve(tri, f, iv);
    BlueSolution loc_t = blue_integrated_triangular(lambda, f, iv);
    BlueSolution lifted_t = blue_transfer_integrated(base_t, f, loc_t.family, tri, 0.0);
    BlueSolution direct_t = blue_integrated_triangular(lambda, f.integrated(0.0), iv);
    double errC_t = (lifted_t.C - direct_t.C).cwiseAbs().maxCoeff();
    double errV_t = (lifted_t.covariance - direct_t.covariance).cwiseAbs().maxCoeff();
    pass = pass && errC_t <= 1e-9 && errV_t <= 1e-9;
    d << "; tri errC=" << errC_t;

    // a = A: the correction vector vanishes and zeta1 reduces to the base.
    MeasureFamily eta(1, iv, 1);
    Eigen::VectorXd w(1);
    w << -6.0;
    eta.comp(0).add_atom(2.0, w);
    w << 9.0;
    eta.comp(1).add_atom(1.0, w);
    BlueSolution edge = blue_transfer_integrated(base, f, eta, bm, iv.a);
    pass = pass && edge.family.comp(0).atoms().empty() &&
           !edge.family.comp(0).density().has_value();
    d << "; a=A lift has empty zeta0";
  } catch (const std::exception& e) {
    pass = false;
    d << "threw: " << e.what();
  }
  report(5, "integration-transfer consistency", pass, d.str());
}

void criterion6_convergence() {
  Interval iv{0.0, 1.0};
  auto kernel = make_matern32(1.0, iv);
  DriftVector f = DriftVector::parse("1,t", iv);
  BlueSolution cont = solve(kernel, f, iv);
  auto dist_at = [&](int n) {
    DesignSpec d = design_values_with_end_derivatives(n, iv, 1);
    Eigen::MatrixXd X = design_matrix(f, d);
    Eigen::MatrixXd S = joint_covariance(*kernel, d);
    EstimatorReport rep = discrete_blue(X, S);
    return (rep.covariance - cont.covariance).norm();
  };
  std::vector<int> ns = {100, 200, 400, 800, 1600};
  std::vector<double> errs;
  for (int n : ns) errs.push_back(dist_at(n));
  bool ratios = true;
  std::ostringstream d;
  d << "errors:";
  for (size_t i = 0; i < errs.size(); ++i) {
    d << " " << errs[i];
    if (i > 0 && errs[i] > 0.75 * errs[i - 1]) ratios = false;
  }
  double final_err = dist_at(2000);
  d << " | N=2000: " << final_err;
  report(6, "discrete-to-continuous covariance convergence", ratios && final_err <= 1e-3,
         d.str());
}

void criterion7_weight_asymptotics() {
  Interval iv{0.0, 1.0};
  DriftVector f = DriftVector::parse("1,t", iv);
  std::vector<KernelPtr> kernels = {make_car2_expexp(1.0, 2.0, iv),
                                    make_car2_expcos(1.0, 2.0, iv), make_matern32(1.0, iv)};
  bool pass = true;
  std::ostringstream d;
  for (const KernelPtr& k : kernels) {
    auto rows = ar2_limit_check(k, f, {100, 200, 400, 800});
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].interior_err >= rows[i - 1].interior_err) pass = false;
      if (rows[i].boundary_sum_err >= rows[i - 1].boundary_sum_err) pass = false;
    }
    d << k->spec() << " interior(N=800)=" << rows.back().interior_err << "; ";
  }
  report(7, "closed-form weight asymptotics", pass, d.str());
}

void criterion8_pentadiagonal() {
  std::mt19937 gen(2027);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  int done = 0;
  double worst = 0.0;
  const int n = 100;
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  while (done < 20) {
    double a1 = u(gen), a2 = u(gen);
    if (!(std::abs(a2) < 0.95 && a1 + a2 < 0.95 && a2 - a1 < 0.95)) continue;
    Eigen::MatrixXd Sigma(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Sigma(i, j) = ar2_autocov(a1, a2, i - j);
    Eigen::MatrixXd P = ar2_precision(Ar2Spec::make(a1, a2, n));
    worst = std::max(worst, (Sigma * P - I).norm() / I.norm());
    ++done;
  }
  std::ostringstream d;
  d << "worst relative defect " << worst;
  report(8, "pentadiagonal precision exactness", worst <= 1e-10, d.str());
}

void criterion9_monte_carlo() {
  StudyConfig c = preset_config("table1");
  c.Ns = {3};
  c.estimators = {"blue-2n0"};
  c.replicates = 20000;
  c.seed = 99991;
  McResult mc = run_mc(c);
  std::ostringstream d;
  d << "max relative covariance error " << mc.max_rel_cov_err << ", mean offset "
    << mc.max_mean_sigmas << " sigma";
  report(9, "Monte Carlo estimator validation", mc.max_rel_cov_err <= 0.03 &&
                                                    mc.max_mean_sigmas <= 3.0,
         d.str());
}

void criterion10_property_suites() {
  std::mt19937 gen(771);
  std::uniform_real_distribution<double> lam(0.5, 2.0);
  std::uniform_real_distribution<double> coef(-1.5, 1.5);
  bool pass = true;
  std::ostringstream why;

  auto random_kernel = [&](const Interval& iv) -> KernelPtr {
    switch (gen() % 4) {
      case 0: return make_matern32(lam(gen), iv);
      case 1: {
        double l1 = lam(gen);
        return make_car2_expexp(l1, l1 + 0.5 + lam(gen), iv);
      }
      case 2: return make_integrated_bm(0.0, iv);
      default: return make_car2_expcos(lam(gen), lam(gen), iv);
    }
  };
  auto random_drift = [&](const Interval& iv) {
    std::ostringstream a, b;
    a << coef(gen) << "+" << coef(gen) << "*t";
    b << coef(gen) << "*t+" << coef(gen) << "*t^2";
    return DriftVector::parse(a.str() + "," + b.str(), iv);
  };

  // Unbiasedness, C symmetry, Loewner dominance.
  for (int rep = 0; rep < 20; ++rep) {
    Interval iv{1.0, 2.0};
    KernelPtr k = random_kernel(iv);
    DriftVector f = random_drift(iv);
    if (!f.check_linear_independence().independent) continue;
    BlueSolution sol = solve(k, f, iv);
    ResidualReport vr = verify_wiener_hopf(sol, *k, f, 101);
    if (vr.unbiasedness_defect > 1e-10) {
      pass = false;
      why << "unbiasedness defect " << vr.unbiasedness_defect << "; ";
    }
    double asym = (sol.C - sol.C.transpose()).norm() / sol.C.norm();
    if (asym > 1e-9) {
      pass = false;
      why << "C asymmetry " << asym << "; ";
    }
    DesignSpec d = design_values_with_end_derivatives(20 + gen() % 30, iv, k->smoothness());
    Eigen::MatrixXd X = design_matrix(f, d);
    Eigen::MatrixXd S = joint_covariance(*k, d);
    EstimatorReport blue = discrete_blue(X, S);
    EstimatorReport ols = olse(X, S);
    if (min_eigenvalue(ols.covariance - blue.covariance) < -1e-9) {
      pass = false;
      why << "OLSE below BLUE; ";
    }
    if (min_eigenvalue(blue.covariance - sol.covariance) < -1e-9) {
      pass = false;
      why << "discrete below continuous; ";
    }
  }

  // Reparameterization.
  {
    Interval iv{0.0, 1.0};
    auto kernel = make_matern32(1.0, iv);
    DriftVector f = DriftVector::parse("1,t", iv);
    BlueSolution sol = solve(kernel, f, iv);
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::MatrixXd L(2, 2);
      do {
        for (int i = 0; i < 4; ++i) L(i / 2, i % 2) = coef(gen);
      } while (std::abs(L.determinant()) < 0.2);
      BlueSolution sol_g = solve(kernel, f.linear_transform(L), iv);
      Eigen::MatrixXd expect =
          L.inverse().transpose() * sol.covariance * L.inverse();
      if ((sol_g.covariance - expect).cwiseAbs().maxCoeff() > 1e-9) {
        pass = false;
        why << "reparameterization mismatch; ";
      }
    }
  }

  // Additivity.
  {
    Interval iv{1.0, 2.0};
    auto kernel = make_matern32(0.9, iv);
    for (int rep = 0; rep < 20; ++rep) {
      double c0 = coef(gen), c1 = coef(gen), d0 = coef(gen), d2 = coef(gen);
      std::ostringstream fs, gs, sums;
      fs.precision(17);
      gs.precision(17);
      sums.precision(17);
      fs << c0 << "+" << c1 << "*t";
      gs << d0 << "+" << d2 << "*t^2";
      sums << (c0 + d0) << "+" << c1 << "*t+" << d2 << "*t^2";
      DriftVector f = DriftVector::parse(fs.str(), iv);
      DriftVector g = DriftVector::parse(gs.str(), iv);
      CombinedSolution combined =
          combine_solutions(solve(kernel, f, iv).family, solve(kernel, g, iv).family, f, g);
      BlueSolution direct = solve(kernel, DriftVector::parse(sums.str(), iv), iv);
      if ((combined.C - direct.C).cwiseAbs().maxCoeff() > 1e-9) {
        pass = false;
        why << "additivity mismatch; ";
      }
    }
  }

  // Canonicalization invariance.
  {
    Interval iv{1.0, 2.0};
    auto kernel = make_integrated_bm(0.0, iv);
    DriftVector f = DriftVector::parse("1,t", iv);
    std::uniform_real_distribution<double> loc(iv.a, iv.b);
    for (int rep = 0; rep < 20; ++rep) {
      MeasureFamily fam(2, iv, 1);
      for (int i = 0; i <= 1; ++i) {
        Eigen::VectorXd w(2);
        w << coef(gen), coef(gen);
        fam.comp(i).add_atom(loc(gen), w);
      }
      std::vector<Expr> phi;
      for (int c = 0; c < 2; ++c) {
        phi.push_back(Expr::monomial(coef(gen), 0) + Expr::monomial(coef(gen), 1));
      }
      std::vector<Expr> phi_copy = phi;
      Density dens;
      dens.fn = [phi_copy](double t) {
        Eigen::VectorXd v(2);
        for (int c = 0; c < 2; ++c) v[c] = phi_copy[c].eval(t);
        return v;
      };
      dens.tag = "poly";
      fam.comp(1).set_density(dens);
      MeasureFamily out = canonicalize(fam, 1, phi);
      if ((c_matrix(out, f) - c_matrix(fam, f)).cwiseAbs().maxCoeff() > 1e-9) {
        pass = false;
        why << "canonicalize changed C; ";
      }
      for (double s : linspace(iv.a, iv.b, 17)) {
        Eigen::VectorXd before = apply_kernel(fam, *kernel, s);
        Eigen::VectorXd after = apply_kernel(out, *kernel, s);
        if ((before - after).cwiseAbs().maxCoeff() > 1e-9) {
          pass = false;
          why << "canonicalize changed the kernel image; ";
          break;
        }
      }
    }
  }

  report(10, "randomized property suites", pass, why.str());
}

}  // namespace

int main() {
  try {
    criterion1_table1();
    criterion2_tables23();
    criterion3_residual_suite();
    criterion4_sign_correction();
    criterion5_transfer();
    criterion6_convergence();
    criterion7_weight_asymptotics();
    criterion8_pentadiagonal();
    criterion9_monte_carlo();
    criterion10_property_suites();
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance suite aborted: %s\n", e.what());
    return 1;
  }
  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria failed\n", g_failures);
  return 1;
}
