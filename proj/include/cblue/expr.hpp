#pragma once

#include <string>
#include <vector>

#include "cblue/common.hpp"

namespace cblue {

// Scalar function of time closed under differentiation: a finite sum of
// c*t^k (k integer, possibly negative), c*sin(w t), c*cos(w t), c*exp(r t).
class Expr {
 public:
  struct Term {
    enum class Kind { power, sine, cosine, exponential };
    Kind kind = Kind::power;
    double coef = 0.0;
    int power = 0;      // kind == power
    double freq = 0.0;  // kind == sine/cosine
    double rate = 0.0;  // kind == exponential
  };

  Expr() = default;
  explicit Expr(std::vector<Term> terms) : terms_(std::move(terms)) { normalize(); }

  static Expr constant(double c);
  static Expr monomial(double c, int k);
  static Expr sine(double c, double freq);
  static Expr cosine(double c, double freq);
  static Expr exponential(double c, double rate);

  // Parses the drift grammar: expressions over `t` with + - * / ^ sin cos exp
  // pi and numeric literals, e.g. "1", "t^2", "1/t", "sin(3*pi*t)", "exp(-t)".
  static Expr parse(const std::string& text);

  double eval(double t) const;
  double eval_derivative(int order, double t) const;

  Expr derivative(int order = 1) const;
  // Antiderivative vanishing at `from`; throws RepresentationError for 1/t terms.
  Expr antiderivative(double from) const;

  Expr operator+(const Expr& other) const;
  Expr operator-(const Expr& other) const;
  Expr scaled(double c) const;
  // Product, defined only when the result stays in the closure
  // (either factor constant, or both pure power sums).
  Expr operator*(const Expr& other) const;

  bool is_zero() const { return terms_.empty(); }
  bool has_negative_power() const;
  const std::vector<Term>& terms() const { return terms_; }
  std::string str() const;

 private:
  void normalize();
  std::vector<Term> terms_;
};

}  // namespace cblue
