#pragma once

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace acs {

using cplx = std::complex<double>;

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// Global worker count for parallel_for; settable from the CLI (--threads).
int worker_count();
void set_worker_count(int n);

// Deterministic parallel loop: each index writes only its own slots, so the
// result is independent of the thread schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Least-squares fit of y = a + b*x. Returns {a, b, r2}.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 1.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Fit y = c * x (in log space: log y = log c + log x), i.e. a one-parameter
// proportionality model. Returns c and the R^2 of log-residuals.
struct PropFit {
  double coeff = 0.0;
  double r2 = 1.0;
};
PropFit fit_proportional_log(const std::vector<double>& x, const std::vector<double>& y);

// log-log slope of y against x (order fits, decay exponents).
inline double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(std::max(y[i], 1e-300));
  }
  return fit_line(lx, ly).slope;
}

// Exact rational arithmetic on int64 (used by the parameter formulas where the
// inputs are rational and the discriminant is a perfect rational square).
struct Rational {
  long long num = 0;
  long long den = 1;
  Rational() = default;
  Rational(long long n, long long d);
  static Rational of(long long n) { return Rational(n, 1); }
  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  bool try_sqrt(Rational& out) const;  // true iff this is a perfect square
  double value() const { return double(num) / double(den); }
};

}  // namespace acs
