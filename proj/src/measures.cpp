#include "cblue/measures.hpp"

#include <algorithm>
#include <cmath>

#include "cblue/quadrature.hpp"

namespace cblue {

void SignedVectorMeasure::add_atom(double t, const Eigen::VectorXd& w) {
  if (w.size() != dim_) throw InvalidParameterError("atom weight dimension mismatch");
  double slack = 1e-10 * std::max(1.0, interval_.length());
  if (!interval_.contains(t, slack)) {
    throw DomainError("atom location outside interval");
  }
  double merge_tol = 1e-12 * interval_.length();
  for (Atom& a : atoms_) {
    if (std::abs(a.t - t) <= merge_tol) {
      a.w += w;
      return;
    }
  }
  atoms_.push_back({t, w});
  std::sort(atoms_.begin(), atoms_.end(), [](const Atom& x, const Atom& y) { return x.t < y.t; });
}

SignedVectorMeasure SignedVectorMeasure::scaled(double c) const {
  SignedVectorMeasure out(dim_, interval_);
  for (const Atom& a : atoms_) out.add_atom(a.t, c * a.w);
  if (density_) {
    Density d;
    auto fn = density_->fn;
    d.fn = [fn, c](double t) { return Eigen::VectorXd(c * fn(t)); };
    d.tag = density_->tag;
    out.set_density(std::move(d));
  }
  return out;
}

SignedVectorMeasure SignedVectorMeasure::sum(const SignedVectorMeasure& x,
                                             const SignedVectorMeasure& y) {
  if (x.dim() != y.dim()) throw InvalidParameterError("measure dimension mismatch");
  SignedVectorMeasure out(x.dim(), x.interval());
  for (const Atom& a : x.atoms_) out.add_atom(a.t, a.w);
  for (const Atom& a : y.atoms_) out.add_atom(a.t, a.w);
  if (x.density_ && y.density_) {
    Density d;
    auto f1 = x.density_->fn;
    auto f2 = y.density_->fn;
    d.fn = [f1, f2](double t) { return Eigen::VectorXd(f1(t) + f2(t)); };
    d.tag = x.density_->tag + "+" + y.density_->tag;
    out.set_density(std::move(d));
  } else if (x.density_) {
    out.set_density(*x.density_);
  } else if (y.density_) {
    out.set_density(*y.density_);
  }
  return out;
}

MeasureFamily MeasureFamily::scaled(double c) const {
  MeasureFamily out(dim_, interval_, order());
  for (int i = 0; i <= order(); ++i) out.comps_[i] = comps_[i].scaled(c);
  return out;
}

MeasureFamily MeasureFamily::sum(const MeasureFamily& x, const MeasureFamily& y) {
  if (x.dim() != y.dim() || x.order() != y.order()) {
    throw InvalidParameterError("measure family shape mismatch");
  }
  MeasureFamily out(x.dim(), x.interval_, x.order());
  for (int i = 0; i <= x.order(); ++i) {
    out.comps_[i] = SignedVectorMeasure::sum(x.comps_[i], y.comps_[i]);
  }
  return out;
}

Eigen::MatrixXd pair_integral(const SignedVectorMeasure& measure,
                              const std::function<Eigen::VectorXd(double)>& g,
                              double quad_tol) {
  const int m = measure.dim();
  Eigen::MatrixXd acc;
  bool init = false;
  auto accumulate = [&](const Eigen::MatrixXd& term) {
    if (!init) {
      acc = term;
      init = true;
    } else {
      acc += term;
    }
  };
  for (const Atom& a : measure.atoms()) {
    accumulate(g(a.t) * a.w.transpose());
  }
  if (measure.density()) {
    auto fn = measure.density()->fn;
    std::vector<double> splits;
    for (const Atom& a : measure.atoms()) splits.push_back(a.t);
    auto integrand = [&](double t) -> Eigen::MatrixXd {
      return g(t) * fn(t).transpose();
    };
    accumulate(integrate_with_splits(integrand, measure.interval().a, measure.interval().b,
                                     splits, quad_tol));
  }
  if (!init) {
    int rows = static_cast<int>(g(measure.interval().midpoint()).size());
    return Eigen::MatrixXd::Zero(rows, m);
  }
  return acc;
}

Eigen::MatrixXd c_matrix(const MeasureFamily& family, const DriftVector& drift,
                         double quad_tol) {
  if (drift.max_order() < family.order()) {
    throw UnsupportedOrderError("drift does not provide enough derivatives for this family");
  }
  const int m = family.dim();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i <= family.order(); ++i) {
    if (family.comp(i).is_zero()) continue;
    auto g = [&, i](double t) { return drift.eval(i, t); };
    C += pair_integral(family.comp(i), g, quad_tol).transpose();
  }
  return C;
}

Eigen::VectorXd apply_kernel(const MeasureFamily& family, const Kernel& kernel, double s,
                             double quad_tol) {
  const int m = family.dim();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
  for (int i = 0; i <= family.order(); ++i) {
    const SignedVectorMeasure& zeta = family.comp(i);
    for (const Atom& a : zeta.atoms()) {
      double kval;
      if (a.t == s) {
        kval = 0.5 * (kernel.partial_t(i, a.t, s, Side::left) +
                      kernel.partial_t(i, a.t, s, Side::right));
      } else {
        kval = kernel.partial_t(i, a.t, s);
      }
      acc += kval * a.w;
    }
    if (zeta.density()) {
      auto fn = zeta.density()->fn;
      std::vector<double> splits{s};
      for (const Atom& a : zeta.atoms()) splits.push_back(a.t);
      auto integrand = [&, i](double t) -> Eigen::VectorXd {
        return kernel.partial_t(i, t, s) * fn(t);
      };
      acc += integrate_with_splits(integrand, zeta.interval().a, zeta.interval().b, splits,
                                   quad_tol);
    }
  }
  return acc;
}

MeasureFamily canonicalize(const MeasureFamily& family, int i, const std::vector<Expr>& phi) {
  const int q = family.order();
  const int m = family.dim();
  if (i < 1 || i > q) throw InvalidParameterError("component index must be in 1..q");
  if (static_cast<int>(phi.size()) != m) {
    throw InvalidParameterError("phi dimension mismatch");
  }
  const SignedVectorMeasure& gi = family.comp(i);
  if (!gi.density()) {
    bool zero_phi = std::all_of(phi.begin(), phi.end(), [](const Expr& e) { return e.is_zero(); });
    if (zero_phi) return family;
    throw InvalidParameterError("component has no density but phi is nonzero");
  }
  // Require the declared phi to match the stored density.
  auto fn = gi.density()->fn;
  const Interval& iv = family.interval();
  for (double t : linspace(iv.a, iv.b, 33)) {
    Eigen::VectorXd have = fn(t);
    for (int c = 0; c < m; ++c) {
      if (std::abs(have[c] - phi[c].eval(t)) > 1e-9 * std::max(1.0, have.norm())) {
        throw UnsupportedError("phi does not match the stored density of component i");
      }
    }
  }

  auto phi_deriv_at = [&](int order, double t) {
    Eigen::VectorXd v(m);
    for (int c = 0; c < m; ++c) v[c] = phi[c].eval_derivative(order, t);
    return v;
  };

  MeasureFamily out = family;
  out.comp(i).clear_density();

  double sgn_i = (i % 2 == 0) ? 1.0 : -1.0;
  // Component 0 absorbs the fully integrated-by-parts density plus its
  // boundary terms.
  {
    SignedVectorMeasure add(m, iv);
    Density d;
    std::vector<Expr> di;
    for (int c = 0; c < m; ++c) di.push_back(phi[c].derivative(i).scaled(sgn_i));
    d.fn = [di, m](double t) {
      Eigen::VectorXd v(m);
      for (int c = 0; c < m; ++c) v[c] = di[c].eval(t);
      return v;
    };
    d.tag = "by-parts";
    bool nonzero = std::any_of(di.begin(), di.end(), [](const Expr& e) { return !e.is_zero(); });
    if (nonzero) add.set_density(std::move(d));
    add.add_atom(iv.a, sgn_i * phi_deriv_at(i - 1, iv.a));
    add.add_atom(iv.b, -sgn_i * phi_deriv_at(i - 1, iv.b));
    out.comp(0) = SignedVectorMeasure::sum(out.comp(0), add);
  }
  for (int l = 1; l < i; ++l) {
    double sgn = ((i - l) % 2 == 0) ? 1.0 : -1.0;
    out.comp(l).add_atom(iv.a, sgn * phi_deriv_at(i - l - 1, iv.a));
    out.comp(l).add_atom(iv.b, -sgn * phi_deriv_at(i - l - 1, iv.b));
  }
  return out;
}

CombinedSolution combine_solutions(const MeasureFamily& zeta, const MeasureFamily& eta,
                                   const DriftVector& f, const DriftVector& g) {
  // Full pairing of the summed measures against the summed drift; the cross
  // pairings do not vanish in general.
  Eigen::MatrixXd C = c_matrix(zeta, f) + c_matrix(eta, g) + c_matrix(zeta, g) +
                      c_matrix(eta, f);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
  if (!lu.isInvertible()) {
    throw DegenerateModelError("combined information matrix is singular");
  }
  return {MeasureFamily::sum(zeta, eta), C};
}

nlohmann::json measure_family_to_json(const MeasureFamily& family) {
  nlohmann::json j;
  j["q"] = family.order();
  j["m"] = family.dim();
  j["interval"] = {family.interval().a, family.interval().b};
  nlohmann::json comps = nlohmann::json::array();
  for (int i = 0; i <= family.order(); ++i) {
    nlohmann::json c;
    nlohmann::json atoms = nlohmann::json::array();
    for (const Atom& a : family.comp(i).atoms()) {
      std::vector<double> w(a.w.data(), a.w.data() + a.w.size());
      atoms.push_back({{"t", a.t}, {"w", w}});
    }
    c["atoms"] = atoms;
    if (family.comp(i).density()) {
      c["density"] = {{"kind", "closed-form"}, {"expr", family.comp(i).density()->tag}};
    } else {
      c["density"] = nullptr;
    }
    comps.push_back(c);
  }
  j["components"] = comps;
  return j;
}

MeasureFamily measure_family_from_json(const nlohmann::json& j, const DensityFactory& factory) {
  int q = j.at("q").get<int>();
  int m = j.at("m").get<int>();
  Interval iv{j.at("interval").at(0).get<double>(), j.at("interval").at(1).get<double>()};
  MeasureFamily family(m, iv, q);
  const auto& comps = j.at("components");
  if (static_cast<int>(comps.size()) != q + 1) throw ParseError("component count mismatch");
  for (int i = 0; i <= q; ++i) {
    for (const auto& a : comps.at(i).at("atoms")) {
      std::vector<double> w = a.at("w").get<std::vector<double>>();
      if (static_cast<int>(w.size()) != m) throw ParseError("atom weight size mismatch");
      family.comp(i).add_atom(a.at("t").get<double>(),
                              Eigen::Map<Eigen::VectorXd>(w.data(), m));
    }
    const auto& dj = comps.at(i).at("density");
    if (!dj.is_null()) {
      std::string tag = dj.at("expr").get<std::string>();
      if (!factory) throw ParseError("density present but no reconstruction factory given");
      auto d = factory(tag);
      if (!d) throw ParseError("density tag '" + tag + "' cannot be reconstructed");
      family.comp(i).set_density(std::move(*d));
    }
  }
  return family;
}

}  // namespace cblue
