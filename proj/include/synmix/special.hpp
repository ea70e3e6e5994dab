#pragma once

#include <cmath>
#include <functional>

namespace synmix::special {

inline double normal_pdf(double x) { return 0.3989422804014327 * std::exp(-0.5 * x * x); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865476); }
inline double normal_sf(double x) { return 0.5 * std::erfc(x * 0.7071067811865476); }

/// Inverse standard normal CDF (Wichura's AS 241, ~1e-16 relative).
double normal_quantile(double p);

/// Regularized lower / upper incomplete gamma P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

double chi2_sf(double x, double dof);
/// Upper tail of the F(d1, d2) distribution.
double f_sf(double f, double d1, double d2);
/// Two-sided p-value of Student's t.
double t_two_sided(double t, double dof);

/// Upper tail P(Q > q) of the studentized range for k means and `dof`
/// error degrees of freedom (infinite when dof <= 0 or very large).
double studentized_range_sf(double q, int k, double dof);

/// Adaptive Gauss-Kronrod (7/15) quadrature on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                 int max_depth = 30);

}  // namespace synmix::special
