#include "cblue/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace cblue {

namespace {

double pow_int(double t, int k) {
  if (k >= 0) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= t;
    return r;
  }
  return 1.0 / pow_int(t, -k);
}

// Falling factorial k(k-1)...(k-i+1), valid for negative k as well.
double falling(int k, int i) {
  double r = 1.0;
  for (int j = 0; j < i; ++j) r *= static_cast<double>(k - j);
  return r;
}

}  // namespace

Expr Expr::constant(double c) { return monomial(c, 0); }

Expr Expr::monomial(double c, int k) {
  Term t;
  t.kind = Term::Kind::power;
  t.coef = c;
  t.power = k;
  return Expr({t});
}

Expr Expr::sine(double c, double freq) {
  if (freq == 0.0) return constant(0.0);
  if (freq < 0.0) return sine(-c, -freq);
  Term t;
  t.kind = Term::Kind::sine;
  t.coef = c;
  t.freq = freq;
  return Expr({t});
}

Expr Expr::cosine(double c, double freq) {
  if (freq == 0.0) return constant(c);
  if (freq < 0.0) return cosine(c, -freq);
  Term t;
  t.kind = Term::Kind::cosine;
  t.coef = c;
  t.freq = freq;
  return Expr({t});
}

Expr Expr::exponential(double c, double rate) {
  if (rate == 0.0) return constant(c);
  Term t;
  t.kind = Term::Kind::exponential;
  t.coef = c;
  t.rate = rate;
  return Expr({t});
}

void Expr::normalize() {
  std::map<std::tuple<int, int, double, double>, double> acc;
  for (const Term& t : terms_) {
    auto key = std::make_tuple(static_cast<int>(t.kind), t.power, t.freq, t.rate);
    acc[key] += t.coef;
  }
  terms_.clear();
  for (const auto& [key, coef] : acc) {
    if (coef == 0.0) continue;
    Term t;
    t.kind = static_cast<Term::Kind>(std::get<0>(key));
    t.power = std::get<1>(key);
    t.freq = std::get<2>(key);
    t.rate = std::get<3>(key);
    t.coef = coef;
    terms_.push_back(t);
  }
}

double Expr::eval(double t) const {
  double s = 0.0;
  for (const Term& term : terms_) {
    switch (term.kind) {
      case Term::Kind::power:
        s += term.coef * pow_int(t, term.power);
        break;
      case Term::Kind::sine:
        s += term.coef * std::sin(term.freq * t);
        break;
      case Term::Kind::cosine:
        s += term.coef * std::cos(term.freq * t);
        break;
      case Term::Kind::exponential:
        s += term.coef * std::exp(term.rate * t);
        break;
    }
  }
  return s;
}

double Expr::eval_derivative(int order, double t) const {
  if (order == 0) return eval(t);
  double s = 0.0;
  for (const Term& term : terms_) {
    switch (term.kind) {
      case Term::Kind::power:
        if (term.power >= 0 && order > term.power) break;
        s += term.coef * falling(term.power, order) * pow_int(t, term.power - order);
        break;
      case Term::Kind::sine:
        s += term.coef * pow_int(term.freq, order) *
             std::sin(term.freq * t + 0.5 * std::numbers::pi * order);
        break;
      case Term::Kind::cosine:
        s += term.coef * pow_int(term.freq, order) *
             std::cos(term.freq * t + 0.5 * std::numbers::pi * order);
        break;
      case Term::Kind::exponential:
        s += term.coef * pow_int(term.rate, order) * std::exp(term.rate * t);
        break;
    }
  }
  return s;
}

Expr Expr::derivative(int order) const {
  std::vector<Term> out;
  for (const Term& term : terms_) {
    Term d = term;
    switch (term.kind) {
      case Term::Kind::power:
        d.coef = term.coef * falling(term.power, order);
        d.power = term.power - order;
        if (term.power >= 0 && order > term.power) continue;
        break;
      case Term::Kind::sine:
      case Term::Kind::cosine: {
        // Each d/dt advances the phase by pi/2; fold back into sin/cos terms.
        int quadrant = order % 4;
        if (term.kind == Term::Kind::cosine) quadrant = (quadrant + 1) % 4;
        d.coef = term.coef * pow_int(term.freq, order);
        switch (quadrant) {
          case 0: d.kind = Term::Kind::sine; break;
          case 1: d.kind = Term::Kind::cosine; break;
          case 2: d.kind = Term::Kind::sine; d.coef = -d.coef; break;
          case 3: d.kind = Term::Kind::cosine; d.coef = -d.coef; break;
        }
        break;
      }
      case Term::Kind::exponential:
        d.coef = term.coef * pow_int(term.rate, order);
        break;
    }
    out.push_back(d);
  }
  return Expr(std::move(out));
}

Expr Expr::antiderivative(double from) const {
  Expr out;
  for (const Term& term : terms_) {
    switch (term.kind) {
      case Term::Kind::power:
        if (term.power == -1) {
          throw RepresentationError("antiderivative of 1/t leaves the supported function closure");
        }
        out = out + monomial(term.coef / (term.power + 1), term.power + 1);
        break;
      case Term::Kind::sine:
        out = out + cosine(-term.coef / term.freq, term.freq);
        break;
      case Term::Kind::cosine:
        out = out + sine(term.coef / term.freq, term.freq);
        break;
      case Term::Kind::exponential:
        out = out + exponential(term.coef / term.rate, term.rate);
        break;
    }
  }
  return out + constant(-out.eval(from));
}

Expr Expr::operator+(const Expr& other) const {
  std::vector<Term> all = terms_;
  all.insert(all.end(), other.terms_.begin(), other.terms_.end());
  return Expr(std::move(all));
}

Expr Expr::operator-(const Expr& other) const { return *this + other.scaled(-1.0); }

Expr Expr::scaled(double c) const {
  std::vector<Term> out = terms_;
  for (Term& t : out) t.coef *= c;
  return Expr(std::move(out));
}

namespace {

bool pure_powers(const Expr& e) {
  return std::all_of(e.terms().begin(), e.terms().end(),
                     [](const Expr::Term& t) { return t.kind == Expr::Term::Kind::power; });
}

bool constant_value(const Expr& e, double* out) {
  if (e.is_zero()) {
    *out = 0.0;
    return true;
  }
  if (e.terms().size() == 1 && e.terms()[0].kind == Expr::Term::Kind::power &&
      e.terms()[0].power == 0) {
    *out = e.terms()[0].coef;
    return true;
  }
  return false;
}

// Matches c*t + d; required for arguments of sin/cos/exp.
bool affine_in_t(const Expr& e, double* c, double* d) {
  *c = 0.0;
  *d = 0.0;
  for (const Expr::Term& t : e.terms()) {
    if (t.kind != Expr::Term::Kind::power) return false;
    if (t.power == 0) {
      *d = t.coef;
    } else if (t.power == 1) {
      *c = t.coef;
    } else {
      return false;
    }
  }
  return true;
}

}  // namespace

Expr Expr::operator*(const Expr& other) const {
  double c;
  if (constant_value(other, &c)) return scaled(c);
  if (constant_value(*this, &c)) return other.scaled(c);
  if (pure_powers(*this) && pure_powers(other)) {
    Expr out;
    for (const Term& a : terms_) {
      for (const Term& b : other.terms_) {
        out = out + monomial(a.coef * b.coef, a.power + b.power);
      }
    }
    return out;
  }
  throw RepresentationError("product leaves the supported function closure: (" + str() +
                            ") * (" + other.str() + ")");
}

bool Expr::has_negative_power() const {
  return std::any_of(terms_.begin(), terms_.end(), [](const Term& t) {
    return t.kind == Term::Kind::power && t.power < 0;
  });
}

std::string Expr::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const Term& t : terms_) {
    double c = t.coef;
    if (!first) {
      os << (c < 0 ? " - " : " + ");
      c = std::abs(c);
    }
    first = false;
    switch (t.kind) {
      case Term::Kind::power:
        if (t.power == 0) {
          os << c;
        } else {
          if (c != 1.0) os << c << "*";
          os << "t";
          if (t.power != 1) os << "^" << t.power;
        }
        break;
      case Term::Kind::sine:
        if (c != 1.0) os << c << "*";
        os << "sin(" << t.freq << "*t)";
        break;
      case Term::Kind::cosine:
        if (c != 1.0) os << c << "*";
        os << "cos(" << t.freq << "*t)";
        break;
      case Term::Kind::exponential:
        if (c != 1.0) os << c << "*";
        os << "exp(" << t.rate << "*t)";
        break;
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Token {
  enum class Kind { number, ident, op, end };
  Kind kind = Kind::end;
  double value = 0.0;
  std::string text;
};

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ >= s_.size()) {
      tok_ = Token{};
      return;
    }
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t end = pos_;
      while (end < s_.size() &&
             (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
              s_[end] == 'e' || s_[end] == 'E' ||
              ((s_[end] == '+' || s_[end] == '-') && end > pos_ &&
               (s_[end - 1] == 'e' || s_[end - 1] == 'E')))) {
        ++end;
      }
      tok_.kind = Token::Kind::number;
      tok_.text = s_.substr(pos_, end - pos_);
      try {
        tok_.value = std::stod(tok_.text);
      } catch (const std::exception&) {
        throw ParseError("bad numeric literal '" + tok_.text + "'");
      }
      pos_ = end;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t end = pos_;
      while (end < s_.size() && std::isalnum(static_cast<unsigned char>(s_[end]))) ++end;
      tok_.kind = Token::Kind::ident;
      tok_.text = s_.substr(pos_, end - pos_);
      pos_ = end;
      return;
    }
    if (std::string("+-*/^()").find(c) != std::string::npos) {
      tok_.kind = Token::Kind::op;
      tok_.text = std::string(1, c);
      ++pos_;
      return;
    }
    throw ParseError(std::string("unexpected character '") + c + "' in expression");
  }

  std::string s_;
  size_t pos_ = 0;
  Token tok_;
};

class Parser {
 public:
  explicit Parser(const std::string& s) : lex_(s) {}

  Expr parse() {
    Expr e = sum();
    if (lex_.peek().kind != Token::Kind::end) {
      throw ParseError("trailing input after expression: '" + lex_.peek().text + "'");
    }
    return e;
  }

 private:
  bool is_op(const char* s) const {
    return lex_.peek().kind == Token::Kind::op && lex_.peek().text == s;
  }

  Expr sum() {
    Expr e = product();
    while (is_op("+") || is_op("-")) {
      bool minus = lex_.take().text == "-";
      Expr rhs = product();
      e = minus ? e - rhs : e + rhs;
    }
    return e;
  }

  Expr product() {
    Expr e = unary();
    while (is_op("*") || is_op("/")) {
      bool div = lex_.take().text == "/";
      Expr rhs = unary();
      if (div) {
        e = divide(e, rhs);
      } else {
        e = e * rhs;
      }
    }
    return e;
  }

  Expr unary() {
    if (is_op("-")) {
      lex_.take();
      return unary().scaled(-1.0);
    }
    if (is_op("+")) lex_.take();
    return power();
  }

  Expr power() {
    Expr base = atom();
    if (!is_op("^")) return base;
    lex_.take();
    int sign = 1;
    if (is_op("-")) {
      lex_.take();
      sign = -1;
    }
    Token t = lex_.take();
    if (t.kind != Token::Kind::number || t.value != std::floor(t.value)) {
      throw ParseError("exponent must be an integer");
    }
    int n = sign * static_cast<int>(t.value);
    return pow_expr(base, n);
  }

  Expr atom() {
    Token t = lex_.take();
    if (t.kind == Token::Kind::number) return Expr::constant(t.value);
    if (t.kind == Token::Kind::ident) {
      if (t.text == "t") return Expr::monomial(1.0, 1);
      if (t.text == "pi") return Expr::constant(std::numbers::pi);
      if (t.text == "sin" || t.text == "cos" || t.text == "exp") {
        if (!is_op("(")) throw ParseError(t.text + " requires parentheses");
        lex_.take();
        Expr arg = sum();
        if (!is_op(")")) throw ParseError("missing ')'");
        lex_.take();
        return apply_function(t.text, arg);
      }
      throw ParseError("unknown identifier '" + t.text + "'");
    }
    if (t.kind == Token::Kind::op && t.text == "(") {
      Expr e = sum();
      if (!is_op(")")) throw ParseError("missing ')'");
      lex_.take();
      return e;
    }
    throw ParseError("unexpected token '" + t.text + "'");
  }

  static Expr apply_function(const std::string& name, const Expr& arg) {
    double c, d;
    if (!affine_in_t(arg, &c, &d)) {
      throw RepresentationError(name + " argument must be affine in t");
    }
    if (name == "exp") return Expr::exponential(std::exp(d), c);
    // sin(c t + d) and cos(c t + d) expand over the phase offset d.
    if (name == "sin") {
      if (c == 0.0) return Expr::constant(std::sin(d));
      return Expr::sine(std::cos(d), c) + Expr::cosine(std::sin(d), c);
    }
    if (c == 0.0) return Expr::constant(std::cos(d));
    return Expr::cosine(std::cos(d), c) + Expr::sine(-std::sin(d), c);
  }

  static Expr divide(const Expr& num, const Expr& den) {
    double c;
    if (constant_value(den, &c)) {
      if (c == 0.0) throw ParseError("division by zero");
      return num.scaled(1.0 / c);
    }
    if (pure_powers(den) && den.terms().size() == 1 && pure_powers(num)) {
      const Expr::Term& d = den.terms()[0];
      Expr out;
      for (const Expr::Term& a : num.terms()) {
        out = out + Expr::monomial(a.coef / d.coef, a.power - d.power);
      }
      return out;
    }
    throw RepresentationError("division leaves the supported function closure");
  }

  static Expr pow_expr(const Expr& base, int n) {
    if (n == 0) return Expr::constant(1.0);
    if (pure_powers(base) && base.terms().size() == 1) {
      const Expr::Term& t = base.terms()[0];
      return Expr::monomial(pow_int(t.coef, n), t.power * n);
    }
    if (n < 0) throw RepresentationError("negative power of a non-monomial");
    if (!pure_powers(base)) throw RepresentationError("power of a non-polynomial");
    Expr out = Expr::constant(1.0);
    for (int i = 0; i < n; ++i) out = out * base;
    return out;
  }

  Lexer lex_;
};

}  // namespace

Expr Expr::parse(const std::string& text) { return Parser(text).parse(); }

}  // namespace cblue
