#include "acs/grid.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>

namespace acs {

int g_workers = int(std::thread::hardware_concurrency());

int worker_count() { return g_workers > 0 ? g_workers : 1; }
void set_worker_count(int n) { g_workers = n > 0 ? n : 1; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  int nw = worker_count();
  if (nw <= 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(nw);
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex err_mutex;
  for (int w = 0; w < nw; ++w) {
    pool.emplace_back([&] {
      const std::size_t chunk = std::max<std::size_t>(1, n / (8 * std::size_t(nw)));
      for (;;) {
        std::size_t i0 = next.fetch_add(chunk);
        if (i0 >= n || failed.load()) return;
        std::size_t i1 = std::min(n, i0 + chunk);
        try {
          for (std::size_t i = i0; i < i1; ++i) body(i);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lk(err_mutex);
          if (!failed.exchange(true)) first_error = e.what();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) fail(first_error);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need >= 2 points");
  double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
  }
  double det = n * sxx - sx * sx;
  LineFit f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0, ybar = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double p = f.intercept + f.slope * x[i];
    ss_res += (y[i] - p) * (y[i] - p);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

PropFit fit_proportional_log(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && !x.empty(), "fit_proportional_log: empty");
  double s = 0;
  std::vector<double> ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    ly[i] = std::log(std::max(y[i], 1e-300));
    s += ly[i] - std::log(std::max(x[i], 1e-300));
  }
  PropFit f;
  double lc = s / double(x.size());
  f.coeff = std::exp(lc);
  double ss_res = 0, ss_tot = 0, ybar = 0;
  for (double v : ly) ybar += v;
  ybar /= double(ly.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double p = lc + std::log(std::max(x[i], 1e-300));
    ss_res += (ly[i] - p) * (ly[i] - p);
    ss_tot += (ly[i] - ybar) * (ly[i] - ybar);
  }
  f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

static long long gcd_ll(long long a, long long b) {
  a = std::llabs(a); b = std::llabs(b);
  while (b) { long long t = a % b; a = b; b = t; }
  return a ? a : 1;
}

Rational::Rational(long long n, long long d) {
  require(d != 0, "Rational: zero denominator");
  if (d < 0) { n = -n; d = -d; }
  long long g = gcd_ll(n, d);
  num = n / g; den = d / g;
}
Rational Rational::operator+(const Rational& o) const {
  return Rational(num * o.den + o.num * den, den * o.den);
}
Rational Rational::operator-(const Rational& o) const {
  return Rational(num * o.den - o.num * den, den * o.den);
}
Rational Rational::operator*(const Rational& o) const {
  return Rational(num * o.num, den * o.den);
}
Rational Rational::operator/(const Rational& o) const {
  require(o.num != 0, "Rational: divide by zero");
  return Rational(num * o.den, den * o.num);
}
static bool isqrt_ll(long long v, long long& r) {
  if (v < 0) return false;
  long long s = llround(std::sqrt(double(v)));
  for (long long c = std::max(0LL, s - 2); c <= s + 2; ++c)
    if (c * c == v) { r = c; return true; }
  return false;
}
bool Rational::try_sqrt(Rational& out) const {
  long long rn, rd;
  if (!isqrt_ll(num, rn) || !isqrt_ll(den, rd)) return false;
  out = Rational(rn, rd);
  return true;
}

GridSpec::GridSpec(const Vec4& lo, const Vec4& hi, const Idx4& n)
    : lower(lo), upper(hi), npts(n) {
  for (int a = 0; a < kND; ++a) {
    require(npts[a] >= 5 && npts[a] % 2 == 1,
            "GridSpec: points-per-axis must be odd and >= 5");
    require(upper[a] > lower[a], "GridSpec: empty box");
  }
}

GridSpec GridSpec::cube(double halfwidth, int n_per_axis) {
  Vec4 lo, hi;
  Idx4 n;
  for (int a = 0; a < kND; ++a) {
    lo[a] = -halfwidth; hi[a] = halfwidth; n[a] = n_per_axis;
  }
  return GridSpec(lo, hi, n);
}

double GridSpec::h_max() const {
  double m = 0;
  for (int a = 0; a < kND; ++a) m = std::max(m, h(a));
  return m;
}
double GridSpec::h_min() const {
  double m = 1e300;
  for (int a = 0; a < kND; ++a) m = std::min(m, h(a));
  return m;
}

std::size_t GridSpec::node_count() const {
  std::size_t c = 1;
  for (int a = 0; a < kND; ++a) c *= std::size_t(npts[a]);
  return c;
}

Vec4 GridSpec::coord(const Idx4& i) const {
  Vec4 x;
  for (int a = 0; a < kND; ++a) x[a] = lower[a] + i[a] * h(a);
  return x;
}

std::size_t GridSpec::flat(const Idx4& i) const {
  std::size_t k = 0;
  for (int a = 0; a < kND; ++a) k = k * std::size_t(npts[a]) + std::size_t(i[a]);
  return k;
}

Idx4 GridSpec::unflat(std::size_t k) const {
  Idx4 i{};
  for (int a = kND - 1; a >= 0; --a) {
    i[a] = int(k % std::size_t(npts[a]));
    k /= std::size_t(npts[a]);
  }
  return i;
}

bool GridSpec::contains(const Vec4& x, double pad) const {
  for (int a = 0; a < kND; ++a)
    if (x[a] < lower[a] - pad || x[a] > upper[a] + pad) return false;
  return true;
}

bool GridSpec::operator==(const GridSpec& o) const {
  for (int a = 0; a < kND; ++a)
    if (lower[a] != o.lower[a] || upper[a] != o.upper[a] || npts[a] != o.npts[a])
      return false;
  return true;
}

GridFunction::GridFunction(GridSpec spec, Rank rank)
    : spec_(spec), rank_(rank), mult_(rank_mult(rank)),
      values_(spec.node_count() * std::size_t(rank_mult(rank)), cplx(0, 0)) {}

void GridFunction::set_mask(std::vector<std::uint8_t> mask) {
  require(mask.size() == nodes(), "mask size mismatch");
  mask_ = std::move(mask);
}

std::size_t GridFunction::mask_count() const {
  if (mask_.empty()) return nodes();
  std::size_t c = 0;
  for (auto m : mask_) c += (m != 0);
  return c;
}

void GridFunction::seal_mask() {
  if (mask_.empty()) return;
  for (std::size_t k = 0; k < nodes(); ++k)
    if (!mask_[k])
      for (int c = 0; c < mult_; ++c) values_[k * mult_ + c] = unset();
}

double GridFunction::sup_abs() const {
  double m = 0;
  for (std::size_t k = 0; k < nodes(); ++k) {
    if (!in_mask(k)) continue;
    for (int c = 0; c < mult_; ++c) m = std::max(m, std::abs(at(k, c)));
  }
  return m;
}

GridFunction GridFunction::component(int c) const {
  GridFunction out(spec_, Rank::Scalar);
  for (std::size_t k = 0; k < nodes(); ++k) out.at(k) = at(k, c);
  if (has_mask()) { out.set_mask(mask_); out.seal_mask(); }
  return out;
}

GridFunction make_grid(const GridSpec& spec, Rank rank,
                       const std::function<void(const Vec4&, cplx*)>& expr) {
  GridFunction u(spec, rank);
  const int m = u.mult();
  std::vector<cplx> buf(m);
  for (std::size_t k = 0; k < u.nodes(); ++k) {
    Vec4 x = spec.coord(spec.unflat(k));
    expr(x, buf.data());
    for (int c = 0; c < m; ++c) {
      if (!std::isfinite(buf[c].real()) || !std::isfinite(buf[c].imag())) {
        std::ostringstream os;
        os << "make_grid: non-finite sample at node (" << x[0] << ", " << x[1]
           << ", " << x[2] << ", " << x[3] << "), component " << c;
        fail(os.str());
      }
      u.at(k, c) = buf[c];
    }
  }
  return u;
}

GridFunction make_grid_scalar(const GridSpec& spec,
                              const std::function<cplx(const Vec4&)>& expr) {
  return make_grid(spec, Rank::Scalar, [&](const Vec4& x, cplx* out) { out[0] = expr(x); });
}

GridFunction axpy(cplx a, const GridFunction& x, const GridFunction& y) {
  require(x.spec() == y.spec() && x.rank() == y.rank(), "axpy: shape mismatch");
  GridFunction out(x.spec(), x.rank());
  std::vector<std::uint8_t> mask;
  bool masked = x.has_mask() || y.has_mask();
  if (masked) mask.assign(x.nodes(), 1);
  for (std::size_t k = 0; k < x.nodes(); ++k) {
    bool in = x.in_mask(k) && y.in_mask(k);
    if (masked) mask[k] = in ? 1 : 0;
    if (!in) continue;
    for (int c = 0; c < x.mult(); ++c) out.at(k, c) = a * x.at(k, c) + y.at(k, c);
  }
  if (masked) { out.set_mask(std::move(mask)); out.seal_mask(); }
  return out;
}

GridFunction scale(cplx a, const GridFunction& x) {
  GridFunction out = x;
  for (std::size_t k = 0; k < x.nodes(); ++k) {
    if (!x.in_mask(k)) continue;
    for (int c = 0; c < x.mult(); ++c) out.at(k, c) = a * x.at(k, c);
  }
  return out;
}

GridFunction restrict_mask(const GridFunction& u,
                           const std::function<bool(std::size_t)>& keep) {
  GridFunction out = u;
  std::vector<std::uint8_t> mask(u.nodes(), 0);
  for (std::size_t k = 0; k < u.nodes(); ++k) mask[k] = (u.in_mask(k) && keep(k)) ? 1 : 0;
  out.set_mask(std::move(mask));
  out.seal_mask();
  return out;
}

void dump_csv(const GridFunction& u, std::ostream& os) {
  os << "i0,i1,i2,i3,x0,x1,x2,x3,mask";
  for (int c = 0; c < u.mult(); ++c) os << ",re" << c << ",im" << c;
  os << "\n";
  char buf[64];
  for (std::size_t k = 0; k < u.nodes(); ++k) {
    Idx4 i = u.spec().unflat(k);
    Vec4 x = u.spec().coord(i);
    os << i[0] << ',' << i[1] << ',' << i[2] << ',' << i[3];
    for (int a = 0; a < kND; ++a) {
      std::snprintf(buf, sizeof buf, ",%.17g", x[a]);
      os << buf;
    }
    os << ',' << (u.in_mask(k) ? 1 : 0);
    for (int c = 0; c < u.mult(); ++c) {
      cplx v = u.in_mask(k) ? u.at(k, c) : cplx(0, 0);
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", v.real(), v.imag());
      os << buf;
    }
    os << "\n";
  }
}

namespace {
constexpr char kMagic[8] = {'A', 'C', 'S', 'G', 'R', 'I', 'D', '1'};
}

void dump_binary(const GridFunction& u, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), "dump_binary: cannot open " + path);
  os.write(kMagic, 8);
  std::int32_t rank = std::int32_t(u.rank());
  std::int32_t masked = u.has_mask() ? 1 : 0;
  os.write(reinterpret_cast<const char*>(&rank), 4);
  os.write(reinterpret_cast<const char*>(&masked), 4);
  for (int a = 0; a < kND; ++a) {
    double lo = u.spec().lower[a], hi = u.spec().upper[a];
    std::int32_t n = u.spec().npts[a];
    os.write(reinterpret_cast<const char*>(&lo), 8);
    os.write(reinterpret_cast<const char*>(&hi), 8);
    os.write(reinterpret_cast<const char*>(&n), 4);
  }
  if (u.has_mask())
    os.write(reinterpret_cast<const char*>(u.mask().data()), std::streamsize(u.nodes()));
  os.write(reinterpret_cast<const char*>(u.raw().data()),
           std::streamsize(u.raw().size() * sizeof(cplx)));
  require(bool(os), "dump_binary: write failed for " + path);
}

GridFunction load_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), "load_binary: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  require(is && std::memcmp(magic, kMagic, 8) == 0, "load_binary: bad header in " + path);
  std::int32_t rank = 0, masked = 0;
  is.read(reinterpret_cast<char*>(&rank), 4);
  is.read(reinterpret_cast<char*>(&masked), 4);
  Vec4 lo, hi;
  Idx4 n;
  for (int a = 0; a < kND; ++a) {
    std::int32_t na = 0;
    is.read(reinterpret_cast<char*>(&lo[a]), 8);
    is.read(reinterpret_cast<char*>(&hi[a]), 8);
    is.read(reinterpret_cast<char*>(&na), 4);
    n[a] = na;
  }
  GridFunction u(GridSpec(lo, hi, n), Rank(rank));
  if (masked) {
    std::vector<std::uint8_t> mask(u.nodes());
    is.read(reinterpret_cast<char*>(mask.data()), std::streamsize(mask.size()));
    u.set_mask(std::move(mask));
  }
  is.read(reinterpret_cast<char*>(u.raw().data()),
          std::streamsize(u.raw().size() * sizeof(cplx)));
  require(bool(is), "load_binary: truncated file " + path);
  return u;
}

}  // namespace acs
