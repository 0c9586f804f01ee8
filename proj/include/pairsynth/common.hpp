#pragma once

// Shared primitives: process identifiers, error types, deterministic RNG,
// and the s-expression reader used by the guard and formula grammars.

#include <cstdint>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pairsynth {

// Opaque process identifier drawn from a countable universe.
struct Pid {
  std::string id;

  Pid() = default;
  explicit Pid(std::string s) : id(std::move(s)) {}

  bool empty() const { return id.empty(); }
  bool operator==(const Pid& o) const { return id == o.id; }
  bool operator!=(const Pid& o) const { return id != o.id; }
  bool operator<(const Pid& o) const { return id < o.id; }
};

inline std::ostream& operator<<(std::ostream& os, const Pid& p) { return os << p.id; }

// Unordered process pair {i,j}; stored with min first so it can key maps.
struct PidPair {
  Pid a, b;

  PidPair() = default;
  PidPair(Pid x, Pid y) {
    if (y < x) std::swap(x, y);
    a = std::move(x);
    b = std::move(y);
  }

  bool contains(const Pid& p) const { return a == p || b == p; }
  Pid other(const Pid& p) const {
    if (p == a) return b;
    if (p == b) return a;
    throw std::logic_error("PidPair::other: pid " + p.id + " not in pair");
  }
  std::string str() const { return "{" + a.id + "," + b.id + "}"; }

  bool operator==(const PidPair& o) const { return a == o.a && b == o.b; }
  bool operator!=(const PidPair& o) const { return !(*this == o); }
  bool operator<(const PidPair& o) const {
    if (a != o.a) return a < o.a;
    return b < o.b;
  }
};

// ---------------------------------------------------------------------------
// Errors

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnresolvedSymbol : InputError {
  using InputError::InputError;
};

struct ForeignSymbol : InputError {
  using InputError::InputError;
};

struct InvalidSkeleton : InputError {
  using InputError::InputError;
};

struct UndefinedProjection : std::logic_error {
  using std::logic_error::logic_error;
};

struct BudgetExceeded : std::runtime_error {
  std::size_t states;
  explicit BudgetExceeded(std::size_t n)
      : std::runtime_error("state budget exceeded at " + std::to_string(n) + " states"),
        states(n) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG. All randomness in the toolkit flows from one seed.

using Rng = std::mt19937_64;

inline std::size_t pick_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// ---------------------------------------------------------------------------
// S-expressions. Atoms and lists; the concrete syntax for guards, bodies and
// formulae. Parsing is shared here, interpretation lives with each grammar.

struct Sexpr {
  // Atom iff items is unused and atom non-empty (the empty list "()" has
  // is_atom == false and no items).
  bool is_atom = false;
  std::string atom;
  std::vector<Sexpr> items;

  static Sexpr make_atom(std::string s) {
    Sexpr e;
    e.is_atom = true;
    e.atom = std::move(s);
    return e;
  }
  static Sexpr make_list(std::vector<Sexpr> xs) {
    Sexpr e;
    e.items = std::move(xs);
    return e;
  }

  const std::string& head() const {
    if (is_atom || items.empty() || !items[0].is_atom)
      throw InputError("s-expression has no head symbol: " + str());
    return items[0].atom;
  }
  std::size_t arity() const { return is_atom ? 0 : items.size() - 1; }
  const Sexpr& arg(std::size_t i) const { return items.at(i + 1); }

  std::string str() const {
    if (is_atom) return atom;
    std::string out = "(";
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) out += ' ';
      out += items[i].str();
    }
    out += ')';
    return out;
  }
};

namespace detail {

inline void skip_ws(const std::string& s, std::size_t& pos) {
  while (pos < s.size() && (std::isspace(static_cast<unsigned char>(s[pos])) != 0)) ++pos;
}

inline Sexpr parse_sexpr_at(const std::string& s, std::size_t& pos) {
  skip_ws(s, pos);
  if (pos >= s.size()) throw InputError("unexpected end of s-expression: " + s);
  if (s[pos] == '(') {
    ++pos;
    std::vector<Sexpr> items;
    for (;;) {
      skip_ws(s, pos);
      if (pos >= s.size()) throw InputError("unterminated list in s-expression: " + s);
      if (s[pos] == ')') {
        ++pos;
        return Sexpr::make_list(std::move(items));
      }
      items.push_back(parse_sexpr_at(s, pos));
    }
  }
  if (s[pos] == ')') throw InputError("unexpected ')' in s-expression: " + s);
  std::size_t start = pos;
  while (pos < s.size() && s[pos] != '(' && s[pos] != ')' &&
         std::isspace(static_cast<unsigned char>(s[pos])) == 0)
    ++pos;
  return Sexpr::make_atom(s.substr(start, pos - start));
}

}  // namespace detail

inline Sexpr parse_sexpr(const std::string& s) {
  std::size_t pos = 0;
  Sexpr e = detail::parse_sexpr_at(s, pos);
  detail::skip_ws(s, pos);
  if (pos != s.size()) throw InputError("trailing characters after s-expression: " + s);
  return e;
}

// Least-squares fit y = a + b*x returning (a, b, r_squared).
struct LinearFit {
  double intercept = 0, slope = 0, r2 = 0;
};

inline LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    syy += ys[i] * ys[i];
  }
  LinearFit f;
  const double denom = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, mean = sy / n, ss_tot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = f.intercept + f.slope * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - mean) * (ys[i] - mean);
  }
  f.r2 = ss_tot == 0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return f;
}

}  // namespace pairsynth
