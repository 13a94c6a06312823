#include "cblue/drift.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace cblue {

namespace {

// Richardson-extrapolated finite difference for order-i derivatives of a
// tabulated function. Step follows h = L * eps^(1/(i+2)); stencils shift
// inward near the interval ends so no evaluation leaves [a, b].
double numeric_derivative(const NumericFunction& nf, int order, double t, const Interval& iv) {
  if (order == 0) return nf.fn(t);
  const double eps = std::numeric_limits<double>::epsilon();
  // Base step per order; the extrapolation pair sits at 2x and 4x this step
  // so that cancellation noise stays well below the truncation budget.
  const double h0 = iv.length() * std::pow(eps, 1.0 / (order + 2));

  auto stencil_estimate = [&](double h) {
    int half = (order + 1) / 2 + 1;
    std::vector<double> nodes;
    for (int k = -half; k <= half; ++k) nodes.push_back(t + k * h);
    double lo = nodes.front(), hi = nodes.back();
    double shift = 0.0;
    if (lo < iv.a) shift = iv.a - lo;
    if (hi > iv.b) shift = iv.b - hi;
    for (double& x : nodes) x += shift;
    std::vector<double> w = fd_weights(t, nodes, order);
    double s = 0.0;
    for (size_t k = 0; k < nodes.size(); ++k) s += w[k] * nf.fn(nodes[k]);
    return s;
  };

  double coarse = stencil_estimate(4.0 * h0);
  double fine = stencil_estimate(2.0 * h0);
  return (4.0 * fine - coarse) / 3.0;
}

}  // namespace

std::vector<double> fd_weights(double x0, const std::vector<double>& nodes, int order) {
  const int n = static_cast<int>(nodes.size()) - 1;
  const int m = order;
  std::vector<std::vector<std::vector<double>>> c(
      n + 1, std::vector<std::vector<double>>(n + 1, std::vector<double>(m + 1, 0.0)));
  c[0][0][0] = 1.0;
  double c1 = 1.0;
  for (int i = 1; i <= n; ++i) {
    double c2 = 1.0;
    for (int j = 0; j < i; ++j) {
      double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      for (int k = 0; k <= std::min(i, m); ++k) {
        double prev = (k > 0) ? c[i - 1][j][k - 1] : 0.0;
        c[i][j][k] = ((nodes[i] - x0) * c[i - 1][j][k] - k * prev) / c3;
      }
    }
    for (int k = 0; k <= std::min(i, m); ++k) {
      double prev = (k > 0) ? c[i - 1][i - 1][k - 1] : 0.0;
      c[i][i][k] = c1 / c2 * (k * prev - (nodes[i - 1] - x0) * c[i - 1][i - 1][k]);
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int j = 0; j <= n; ++j) w[j] = c[n][j][m];
  return w;
}

DriftVector::DriftVector(std::vector<Component> components, Interval interval, int max_order)
    : components_(std::move(components)), interval_(interval), max_order_(max_order) {
  if (!interval_.valid()) throw DomainError("invalid drift interval");
  if (components_.empty()) throw InvalidParameterError("drift needs at least one component");
  for (const Component& c : components_) {
    if (const Expr* e = std::get_if<Expr>(&c)) {
      if (e->has_negative_power() && interval_.a <= 0.0) {
        throw DomainError("negative powers of t require a strictly positive interval");
      }
    } else {
      approximate_ = true;
    }
  }
}

DriftVector DriftVector::parse(const std::string& text, Interval interval, int max_order) {
  std::vector<Component> comps;
  std::string current;
  int depth = 0;
  auto flush = [&]() {
    if (current.find_first_not_of(" \t") == std::string::npos) {
      throw ParseError("empty drift component");
    }
    comps.emplace_back(Expr::parse(current));
    current.clear();
  };
  for (char ch : text) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      flush();
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return DriftVector(std::move(comps), interval, max_order);
}

double DriftVector::eval_component(int index, int order, double t) const {
  if (order > max_order_) {
    throw UnsupportedOrderError("drift derivative order " + std::to_string(order) +
                                " exceeds max_order " + std::to_string(max_order_));
  }
  const Component& c = components_.at(index);
  if (const Expr* e = std::get_if<Expr>(&c)) return e->eval_derivative(order, t);
  return numeric_derivative(std::get<NumericFunction>(c), order, t, interval_);
}

Eigen::VectorXd DriftVector::eval(int order, double t) const {
  Eigen::VectorXd v(size());
  for (int i = 0; i < size(); ++i) v[i] = eval_component(i, order, t);
  return v;
}

DriftVector DriftVector::integrated(double from) const {
  std::vector<Component> comps;
  for (const Component& c : components_) {
    const Expr* e = std::get_if<Expr>(&c);
    if (!e) throw RepresentationError("cannot integrate a numeric drift component exactly");
    comps.emplace_back(e->antiderivative(from));
  }
  return DriftVector(std::move(comps), interval_, max_order_);
}

DriftVector DriftVector::linear_transform(const Eigen::MatrixXd& L) const {
  if (L.rows() != size() || L.cols() != size()) {
    throw InvalidParameterError("transform dimension mismatch");
  }
  std::vector<Component> comps;
  for (int i = 0; i < size(); ++i) {
    Expr acc;
    for (int j = 0; j < size(); ++j) {
      const Expr* e = std::get_if<Expr>(&components_[j]);
      if (!e) throw RepresentationError("cannot transform a numeric drift component");
      acc = acc + e->scaled(L(i, j));
    }
    comps.emplace_back(std::move(acc));
  }
  return DriftVector(std::move(comps), interval_, max_order_);
}

DriftVector DriftVector::concat(const DriftVector& f, const DriftVector& g) {
  std::vector<Component> comps = f.components_;
  comps.insert(comps.end(), g.components_.begin(), g.components_.end());
  return DriftVector(std::move(comps), f.interval_, std::max(f.max_order_, g.max_order_));
}

DriftVector DriftVector::add(const DriftVector& f, const DriftVector& g) {
  if (f.size() != g.size()) throw InvalidParameterError("drift sum dimension mismatch");
  std::vector<Component> comps;
  for (int i = 0; i < f.size(); ++i) {
    const Expr* a = std::get_if<Expr>(&f.components_[i]);
    const Expr* b = std::get_if<Expr>(&g.components_[i]);
    if (!a || !b) throw RepresentationError("cannot add numeric drift components exactly");
    comps.emplace_back(*a + *b);
  }
  return DriftVector(std::move(comps), f.interval_, std::max(f.max_order_, g.max_order_));
}

std::string DriftVector::str() const {
  std::ostringstream os;
  for (int i = 0; i < size(); ++i) {
    if (i) os << ",";
    if (const Expr* e = std::get_if<Expr>(&components_[i])) {
      os << e->str();
    } else {
      os << std::get<NumericFunction>(components_[i]).label;
    }
  }
  return os.str();
}

DriftVector::IndependenceReport DriftVector::check_linear_independence() const {
  const int grid = 64;
  const int m = size();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < grid; ++k) {
    double t = interval_.a + (interval_.b - interval_.a) * (k + 0.5) / grid;
    Eigen::VectorXd v = eval(0, t);
    G += v * v.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  double lo = es.eigenvalues().minCoeff();
  double hi = es.eigenvalues().maxCoeff();
  IndependenceReport rep;
  rep.condition = (lo <= 0.0) ? std::numeric_limits<double>::infinity() : hi / lo;
  rep.independent = rep.condition < 1e12;
  return rep;
}

}  // namespace cblue
