#include "synmix/special.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <vector>

namespace synmix::special {
namespace {

template <std::size_t N>
double horner(const std::array<double, N>& c, double x) {
  double r = 0.0;
  for (std::size_t i = N; i-- > 0;) r = r * x + c[i];
  return r;
}

constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;

// Series for P(a, x), valid for x < a + 1.
double gamma_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 0; n < 10000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x), valid for x >= a + 1 (modified Lentz).
double gamma_cfrac(double a, double x) {
  double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double beta_cfrac(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < 10000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

// Gauss-Kronrod 15-point nodes (positive half) and weights.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double kronrod;
  double error;
};

Panel gk15(const std::function<double(double)>& f, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(centre);
  double resk = fc * kWgk[7];
  double resg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[static_cast<std::size_t>(j)];
    const double f1 = f(centre - dx);
    const double f2 = f(centre + dx);
    resk += kWgk[static_cast<std::size_t>(j)] * (f1 + f2);
    if (j % 2 == 1) resg += kWg[static_cast<std::size_t>(j / 2)] * (f1 + f2);
  }
  return {resk * half, std::abs((resk - resg) * half)};
}

double integrate_rec(const std::function<double(double)>& f, double a, double b, double tol,
                     int depth, const Panel& whole) {
  if (whole.error <= tol || depth <= 0) return whole.kronrod;
  const double mid = 0.5 * (a + b);
  const Panel left = gk15(f, a, mid);
  const Panel right = gk15(f, mid, b);
  return integrate_rec(f, a, mid, 0.5 * tol, depth - 1, left) +
         integrate_rec(f, mid, b, 0.5 * tol, depth - 1, right);
}

// 1 - P(range of k standard normals < w), written so small tails keep
// their relative precision.
double range_sf_normal(double w, int k) {
  if (w <= 0.0) return 1.0;
  const int km1 = k - 1;
  auto integrand = [&](double z) {
    const double pz = normal_cdf(z);
    const double inside = pz - normal_cdf(z - w);
    return normal_pdf(z) * (std::pow(pz, km1) - std::pow(std::max(inside, 0.0), km1));
  };
  const double val = k * integrate(integrand, -8.5, 8.5 + w, 1e-11);
  return std::clamp(val, 0.0, 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  static constexpr std::array<double, 8> a = {
      3.3871328727963666080e0, 1.3314166789178437745e+2, 1.9715909503065514427e+3,
      1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
      3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr std::array<double, 8> b = {
      1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2, 5.3941960214247511077e+3,
      2.1213794301586595867e+4, 3.9307895800092710610e+4, 2.8729085735721942674e+4,
      5.2264952788528545610e+3};
  static constexpr std::array<double, 8> c = {
      1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr std::array<double, 8> d = {
      1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9};
  static constexpr std::array<double, 8> e = {
      6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr std::array<double, 8> f = {
      1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15};

  const double q = p - 0.5;
  double x;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    x = q * horner(a, r) / horner(b, r);
  } else {
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      r -= 1.6;
      x = horner(c, r) / horner(d, r);
    } else {
      r -= 5.0;
      x = horner(e, r) / horner(f, r);
    }
    if (q < 0) x = -x;
  }
  // One Newton polish step against erfc.
  const double err = (x < 0 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x));
  const double pdf = normal_pdf(x);
  if (pdf > 0.0) x -= err / pdf;
  return x;
}

double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  return x < a + 1.0 ? gamma_series(a, x) : 1.0 - gamma_cfrac(a, x);
}

double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - gamma_series(a, x) : gamma_cfrac(a, x);
}

double beta_inc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cfrac(a, b, x) / a;
  return 1.0 - front * beta_cfrac(b, a, 1.0 - x) / b;
}

double chi2_sf(double x, double dof) { return gamma_q(0.5 * dof, 0.5 * x); }

double f_sf(double f, double d1, double d2) {
  if (f <= 0.0) return 1.0;
  return beta_inc(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

double t_two_sided(double t, double dof) {
  return beta_inc(0.5 * dof, 0.5, dof / (dof + t * t));
}

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                 int max_depth) {
  if (a == b) return 0.0;
  return integrate_rec(f, a, b, abs_tol, max_depth, gk15(f, a, b));
}

double studentized_range_sf(double q, int k, double dof) {
  if (q <= 0.0) return 1.0;
  if (k < 2) return 0.0;
  if (dof <= 0.0 || dof > 1e5) return range_sf_normal(q, k);

  // Mix the normal-theory range tail over s = sqrt(chi2_dof / dof).
  const double log_norm = 0.5 * dof * std::log(dof) - std::lgamma(0.5 * dof) -
                          (0.5 * dof - 1.0) * std::log(2.0);
  auto density = [&](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(log_norm + (dof - 1.0) * std::log(s) - 0.5 * dof * s * s);
  };
  auto integrand = [&](double s) {
    const double dens = density(s);
    return dens > 1e-300 ? dens * range_sf_normal(q * s, k) : 0.0;
  };

  const double mode = std::sqrt(std::max(dof - 1.0, 0.0) / dof);
  const double sd = 1.0 / std::sqrt(2.0 * dof);
  const double upper = mode + 14.0 * std::max(sd, 0.5);
  std::vector<double> cuts = {0.0, upper};
  for (double m : {-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0}) {
    const double c = mode + m * sd;
    if (c > 0.0 && c < upper) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) total += integrate(integrand, cuts[i], cuts[i + 1], 1e-9);
  }
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace synmix::special
