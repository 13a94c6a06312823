#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "cblue/kernels.hpp"
#include "cblue/linalg.hpp"

using namespace cblue;

namespace {

std::vector<KernelPtr> catalog() {
  Interval unit{0.0, 1.0};
  Interval shifted{1.0, 2.0};
  return {
      make_brownian_motion(unit),
      make_triangular(0.8, unit),
      make_linear_drift(2.0, 1.0, {0.0, 0.5}),
      make_product(Expr::parse("exp(t)"), Expr::parse("exp(-t)"), shifted),
      make_car2_expexp(1.0, 2.0, unit),
      make_car2_expcos(1.0, 2.0, unit),
      make_matern32(1.0, unit),
      make_car3(1.0, 2.0, 3.0, shifted),
      make_matern52(0.8, shifted),
      make_integrated_bm(0.0, shifted),
      make_integrated_bm(0.5, shifted),
      make_integrated_triangular(0.5, shifted),
      make_twice_integrated_bm(shifted),
  };
}

// Fourth-order central differences in the first argument, used as the oracle
// for every closed-form partial derivative away from the diagonal.
double fd_partial(const Kernel& k, int order, double t, double s, double h) {
  if (order == 0) return k.partial_t(0, t, s);
  auto d1 = [&](auto&& g, double x) {
    return (-g(x + 2 * h) + 8 * g(x + h) - 8 * g(x - h) + g(x - 2 * h)) / (12 * h);
  };
  if (order == 1) return d1([&](double x) { return k.partial_t(0, x, s); }, t);
  std::function<double(double)> lower = [&](double x) {
    return fd_partial(k, order - 1, x, s, h);
  };
  return d1(lower, t);
}

}  // namespace

TEST_CASE("triangular kernel point values") {
  auto k = make_triangular(1.0, {0.0, 1.0});
  CHECK(k->value(0.3, 0.5) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(k->partial_t(1, 0.3, 0.5) == doctest::Approx(1.0));
  // Outside the support radius everything vanishes.
  auto wide = make_triangular(2.0, {0.0, 2.0});
  CHECK(wide->value(0.0, 1.7) == 0.0);
}

TEST_CASE("integrated Brownian motion values and partials") {
  auto k = make_integrated_bm(0.0, {0.5, 2.0});
  CHECK(k->value(1.0, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(k->partial_t(1, 1.0, 1.0, Side::left) == doctest::Approx(0.5));
  CHECK(k->partial_t(1, 1.0, 1.0, Side::right) == doctest::Approx(0.5));
  // Derivative process is Brownian motion.
  CHECK(k->cross(1, 1, 0.7, 1.4) == doctest::Approx(0.7).epsilon(1e-13));
  CHECK(k->cross(1, 1, 1.4, 0.7) == doctest::Approx(0.7).epsilon(1e-13));
}

TEST_CASE("stationary kernels normalize at zero lag") {
  CHECK(make_car2_expexp(1.0, 2.0, {0.0, 1.0})->value(0.4, 0.4) == doctest::Approx(1.0));
  CHECK(make_car2_expcos(1.0, 2.0, {0.0, 1.0})->value(0.4, 0.4) == doctest::Approx(1.0));
  CHECK(make_matern32(1.3, {0.0, 1.0})->value(0.4, 0.4) == doctest::Approx(1.0));
  CHECK(make_matern52(1.3, {0.0, 1.0})->value(0.4, 0.4) == doctest::Approx(1.0));
}

TEST_CASE("matern 3/2 second derivative at the diagonal") {
  double lambda = 1.7;
  auto k = make_matern32(lambda, {0.0, 1.0});
  CHECK(k->partial_t(2, 0.5, 0.5, Side::left) == doctest::Approx(-lambda * lambda));
  CHECK(k->partial_t(2, 0.5, 0.5, Side::right) == doctest::Approx(-lambda * lambda));
  CHECK(k->cross(1, 1, 0.5, 0.5) == doctest::Approx(lambda * lambda));
}

TEST_CASE("cross derivative of order zero reduces to the kernel value") {
  std::mt19937 gen(3);
  for (const KernelPtr& k : catalog()) {
    std::uniform_real_distribution<double> pick(k->interval().a, k->interval().b);
    for (int rep = 0; rep < 10; ++rep) {
      double t = pick(gen), s = pick(gen);
      CHECK(k->cross(0, 0, t, s) == doctest::Approx(k->value(t, s)).epsilon(1e-14));
    }
  }
}

TEST_CASE("symmetry on random pairs") {
  std::mt19937 gen(11);
  for (const KernelPtr& k : catalog()) {
    std::uniform_real_distribution<double> pick(k->interval().a, k->interval().b);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      double t = pick(gen), s = pick(gen);
      worst = std::max(worst, std::abs(k->value(t, s) - k->value(s, t)));
    }
    CAPTURE(k->spec());
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("random Gram matrices admit a Cholesky factor with tiny jitter") {
  std::mt19937 gen(17);
  for (const KernelPtr& k : catalog()) {
    std::uniform_real_distribution<double> pick(k->interval().a, k->interval().b);
    std::vector<double> pts(50);
    for (double& p : pts) p = pick(gen);
    Eigen::MatrixXd G(50, 50);
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j <= i; ++j) {
        G(i, j) = G(j, i) = k->value(pts[i], pts[j]);
      }
    }
    CholResult res = chol_with_jitter(G, 1e-8);
    CAPTURE(k->spec());
    CHECK(res.jitter <= 1e-10 * std::max(1.0, G.diagonal().mean()));
  }
}

TEST_CASE("closed-form partials match finite differences off the diagonal") {
  std::mt19937 gen(23);
  for (const KernelPtr& k : catalog()) {
    const Interval& iv = k->interval();
    double len = iv.length();
    std::uniform_real_distribution<double> pick(iv.a + 0.15 * len, iv.b - 0.15 * len);
    int max_order = std::min(3, 2 * k->smoothness() + 1);
    for (int rep = 0; rep < 6; ++rep) {
      double t = pick(gen), s = pick(gen);
      if (std::abs(t - s) < 0.12 * len) continue;
      if (k->family() == KernelFamily::triangular &&
          std::abs(t - s) > 0.8 / k->info().lambda) {
        continue;
      }
      for (int order = 1; order <= max_order; ++order) {
        double h = 1e-2 * len / (1 << order);
        double exact = k->partial_t(order, t, s);
        double approx = fd_partial(*k, order, t, s, h);
        CAPTURE(k->spec());
        CAPTURE(order);
        CHECK(exact ==
              doctest::Approx(approx).epsilon(1e-6).scale(std::max(1.0, std::abs(exact))));
      }
    }
  }
}

TEST_CASE("continuity ladder and jump order") {
  for (const KernelPtr& k : catalog()) {
    if (k->family() == KernelFamily::product) continue;  // jump varies with s
    const Interval& iv = k->interval();
    double s = iv.a + 0.4 * iv.length();
    int q = k->smoothness();
    for (int i = 0; i <= 2 * q; ++i) {
      double gap = k->partial_t(i, s, s, Side::left) - k->partial_t(i, s, s, Side::right);
      CAPTURE(k->spec());
      CAPTURE(i);
      CHECK(std::abs(gap) <= 1e-10);
    }
    double sign = (q % 2 == 0) ? 1.0 : -1.0;
    double jump = sign * (k->partial_t(2 * q + 1, s, s, Side::left) -
                          k->partial_t(2 * q + 1, s, s, Side::right));
    CHECK(jump == doctest::Approx(derivative_jump(*k)).epsilon(1e-8));
  }
}

TEST_CASE("derivative jumps agree with the closed-form constants") {
  double l1 = 1.0, l2 = 2.0;
  CHECK(derivative_jump(*make_car2_expexp(l1, l2, {0.0, 1.0})) ==
        doctest::Approx(2.0 * l1 * l2 * (l1 + l2)).epsilon(1e-12));
  double l = 1.0, w = 1.0;
  CHECK(derivative_jump(*make_car2_expcos(l, w, {0.0, 1.0})) ==
        doctest::Approx(4.0 * l * (l * l + w * w)).epsilon(1e-12));
  // Equal-rate limit checked against one-sided numeric third derivatives.
  double lambda = 1.0;
  auto k = make_matern32(lambda, {0.0, 1.0});
  CHECK(derivative_jump(*k) == doctest::Approx(4.0 * lambda * lambda * lambda).epsilon(1e-12));
  double s = 0.5, h = 1e-3;
  auto left3 = (-k->value(s - 3 * h, s) + 3 * k->value(s - 2 * h, s) - 3 * k->value(s - h, s) +
                k->value(s, s)) /
               (h * h * h);
  auto right3 = (k->value(s + 3 * h, s) - 3 * k->value(s + 2 * h, s) + 3 * k->value(s + h, s) -
                 k->value(s, s)) /
                (h * h * h);
  CHECK(right3 - left3 == doctest::Approx(4.0 * lambda * lambda * lambda).epsilon(1e-2));
}

TEST_CASE("jump constants for the less common families") {
  CHECK(derivative_jump(*make_brownian_motion({0.0, 1.0})) == doctest::Approx(1.0));
  CHECK(derivative_jump(*make_triangular(0.7, {0.0, 1.0})) == doctest::Approx(1.4));
  CHECK(derivative_jump(*make_integrated_bm(0.0, {1.0, 2.0})) == doctest::Approx(1.0));
  CHECK(derivative_jump(*make_integrated_triangular(0.5, {1.0, 2.0})) == doctest::Approx(1.0));
  CHECK(derivative_jump(*make_twice_integrated_bm({1.0, 2.0})) == doctest::Approx(1.0));
  double s5 = derivative_jump(*make_car3(1.0, 2.0, 3.0, {1.0, 2.0}));
  CHECK(s5 == doctest::Approx(120.0).epsilon(1e-10));
  // Equal-root family: 16 lambda^5 / 3.
  double mu = std::sqrt(5.0) * 0.8;
  CHECK(derivative_jump(*make_matern52(0.8, {1.0, 2.0})) ==
        doctest::Approx(16.0 * std::pow(mu, 5) / 3.0).epsilon(1e-10));
}

TEST_CASE("requesting a jump at the wrong order fails") {
  auto tri = make_triangular(1.0, {0.0, 1.0});
  CHECK_THROWS_AS(derivative_jump(*tri, 3), UnsupportedError);
  CHECK_NOTHROW(derivative_jump(*tri, 1));
}

TEST_CASE("out-of-interval evaluation raises a domain error") {
  auto k = make_matern32(1.0, {0.0, 1.0});
  CHECK_THROWS_AS(k->value(-0.5, 0.5), DomainError);
  CHECK_THROWS_AS(eval_kernel(*k, 0.2, 1.5), DomainError);
}

TEST_CASE("cross derivatives beyond smoothness are rejected") {
  auto k = make_matern32(1.0, {0.0, 1.0});
  CHECK_THROWS_AS(k->cross(2, 0, 0.2, 0.8), UnsupportedOrderError);
  auto bm = make_brownian_motion({0.0, 1.0});
  CHECK_THROWS_AS(bm->cross(1, 1, 0.2, 0.8), UnsupportedOrderError);
}

TEST_CASE("integrated kernel closed forms") {
  Interval iv{1.0, 2.0};
  auto ibm = integrated_kernel(make_brownian_motion({0.0, 2.0}), 0.0, iv);
  CHECK(ibm->family() == KernelFamily::integrated_bm);
  for (double t : {1.0, 1.3, 1.9}) {
    for (double s : {1.1, 1.6, 2.0}) {
      double mn = std::min(t, s), mx = std::max(t, s);
      double want = mn * mn * (3 * mx - mn) / 6.0;
      CHECK(ibm->value(t, s) == doctest::Approx(want).epsilon(1e-14));
    }
  }
  auto itri = integrated_kernel(make_triangular(0.5, {0.0, 2.0}), 0.0, iv);
  CHECK(itri->family() == KernelFamily::integrated_triangular);
  for (double t : {1.0, 1.5}) {
    for (double s : {1.2, 2.0}) {
      double mn = std::min(t, s), mx = std::max(t, s);
      double want = t * s - 0.5 * mn * (3 * mx * mx - 3 * t * s + 2 * mn * mn) / 6.0;
      CHECK(itri->value(t, s) == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("numeric integration fallback agrees with the closed forms") {
  Interval iv{1.0, 2.0};
  auto exact_ibm = make_integrated_bm(0.0, iv);
  auto num_ibm = make_integrated_numeric(make_brownian_motion({0.0, 2.0}), 0.0, iv);
  auto exact_itri = make_integrated_triangular(0.4, iv);
  auto num_itri = make_integrated_numeric(make_triangular(0.4, {0.0, 2.0}), 0.0, iv);
  for (double t : {1.0, 1.4, 1.8}) {
    for (double s : {1.1, 1.5, 2.0}) {
      CHECK(num_ibm->value(t, s) == doctest::Approx(exact_ibm->value(t, s)).epsilon(1e-9));
      CHECK(num_ibm->partial_t(1, t, s) ==
            doctest::Approx(exact_ibm->partial_t(1, t, s)).epsilon(1e-9));
      CHECK(num_itri->value(t, s) == doctest::Approx(exact_itri->value(t, s)).epsilon(1e-9));
    }
  }
  // Zero-width integration range at the origin.
  auto num0 = make_integrated_numeric(make_brownian_motion({0.0, 2.0}), 1.0, iv);
  CHECK(num0->value(1.0, 1.7) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(num_ibm->cross(1, 1, 1.2, 1.6) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK_THROWS_AS(num_ibm->partial_t(3, 1.2, 1.6), UnsupportedOrderError);
}

TEST_CASE("integration origin beyond the interval start is rejected") {
  CHECK_THROWS_AS(make_integrated_bm(1.5, {1.0, 2.0}), DomainError);
  CHECK_THROWS_AS(integrated_kernel(make_brownian_motion({0.0, 2.0}), 1.5, {1.0, 2.0}),
                  DomainError);
}

TEST_CASE("kernel spec strings round-trip through the parser") {
  for (const KernelPtr& k : catalog()) {
    KernelPtr back = parse_kernel(k->spec(), k->interval());
    CHECK(back->family() == k->family());
    double t = k->interval().a + 0.3 * k->interval().length();
    double s = k->interval().a + 0.8 * k->interval().length();
    CHECK(back->value(t, s) == doctest::Approx(k->value(t, s)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(parse_kernel("nosuch:lambda=1", {0.0, 1.0}), ParseError);
  CHECK_THROWS_AS(parse_kernel("matern32", {0.0, 1.0}), ParseError);
}

TEST_CASE("linear-drift kernel validity constraints") {
  CHECK_THROWS_AS(make_linear_drift(1.0, 2.0, {0.0, 1.0}), InvalidKernelError);
  CHECK_THROWS_AS(make_linear_drift(2.0, 1.5, {0.0, 1.0}), InvalidKernelError);
  CHECK_NOTHROW(make_linear_drift(2.0, 1.0, {0.0, 0.5}));
}

TEST_CASE("nearly equal CAR(3) rates are rejected") {
  CHECK_THROWS_AS(make_car3(1.0, 1.0 + 1e-8, 3.0, {0.0, 1.0}), InvalidKernelError);
  CHECK_NOTHROW(make_car3(2.0, 2.0, 2.0, {0.0, 1.0}));
}
