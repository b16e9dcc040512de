#include "timeleak/timing_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace timeleak {

double erfcx(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) {
    // erfcx(-x) = 2 exp(x^2) - erfcx(x); overflows for x < -26.6 as the
    // true value does.
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x <= 26.0) {
    // exp(x^2) stays below DBL_MAX and erfc(x) is still a normal double.
    return std::exp(x * x) * std::erfc(x);
  }
  // Asymptotic series 1/(x sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2x^2)^k.
  // For x > 26 the terms shrink by < 0.03 each, machine precision in ~20 terms.
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 40; ++k) {
    term *= -static_cast<double>(2 * k - 1) * inv2x2;
    const double prev = sum;
    sum += term;
    if (sum == prev) break;
  }
  return sum * std::numbers::inv_sqrtpi / x;
}

DetectorResponse::DetectorResponse(double t0_ps, double tau_e_ps, double tau_g_ps)
    : t0_(t0_ps), tau_e_(tau_e_ps), tau_g_(tau_g_ps) {
  if (!std::isfinite(t0_ps))
    throw ArgumentError("DetectorResponse: t0 must be finite");
  if (!(std::isfinite(tau_e_ps) && tau_e_ps > 0.0))
    throw ArgumentError("DetectorResponse: tau_e must be finite and > 0");
  if (!(std::isfinite(tau_g_ps) && tau_g_ps > 0.0))
    throw ArgumentError("DetectorResponse: tau_g must be finite and > 0");
}

DetectorResponse DetectorResponse::with_offset(double new_t0_ps) const {
  return DetectorResponse(new_t0_ps, tau_e_, tau_g_);
}

TimeGrid::TimeGrid(double start_ps, double step_ps, std::size_t count_)
    : start(start_ps), step(step_ps), count(count_) {
  if (!std::isfinite(start_ps)) throw ArgumentError("TimeGrid: start must be finite");
  if (!(std::isfinite(step_ps) && step_ps > 0.0))
    throw ArgumentError("TimeGrid: step must be finite and > 0");
  if (count < 2) throw ArgumentError("TimeGrid: count must be >= 2");
}

double density(const DetectorResponse& resp, double t_ps) {
  if (!std::isfinite(t_ps)) throw ArgumentError("density: non-finite time");
  const double u = t_ps - resp.t0();
  const double b = u / resp.tau_g();
  const double half_ratio = resp.tau_g() / (2.0 * resp.tau_e());
  double val;
  if (b <= 0.0) {
    // exp argument is <= -tau_g^2/(4 tau_e^2) < 0 here, no overflow.
    const double a = u / resp.tau_e() - half_ratio * half_ratio;
    val = std::exp(a) * std::erfc(b) / (2.0 * resp.tau_e());
  } else {
    // exp(a)*erfc(b) = exp(a - b^2)*erfcx(b) and a - b^2 = -(b - half_ratio)^2
    // exactly, so both factors are bounded by 1.
    const double v = b - half_ratio;
    val = std::exp(-v * v) * erfcx(b) / (2.0 * resp.tau_e());
  }
  return val > 0.0 ? val : 0.0;
}

double cdf(const DetectorResponse& resp, double t_ps) {
  if (!std::isfinite(t_ps)) throw ArgumentError("cdf: non-finite time");
  const double u = t_ps - resp.t0();
  const double v = u / resp.tau_g() - resp.tau_g() / (2.0 * resp.tau_e());
  const double c = resp.tau_e() * density(resp, t_ps) + 0.5 * std::erfc(-v);
  return std::clamp(c, 0.0, 1.0);
}

double integrate_density(const DetectorResponse& resp, double from_ps, double to_ps) {
  if (!(std::isfinite(from_ps) && std::isfinite(to_ps)))
    throw ArgumentError("integrate_density: non-finite bounds");
  if (from_ps > to_ps) throw ArgumentError("integrate_density: from > to");
  const double m = cdf(resp, to_ps) - cdf(resp, from_ps);
  return std::clamp(m, 0.0, 1.0);
}

Moments moments(const DetectorResponse& resp) {
  const double te = resp.tau_e();
  const double tg = resp.tau_g();
  return {resp.t0() + tg * tg / (2.0 * te) - te, 0.5 * tg * tg + te * te};
}

double sample_one(const DetectorResponse& resp, RandomStream& rng) {
  const double z = rng.next_normal();
  const double e = rng.next_exponential();
  const double te = resp.tau_e();
  const double tg = resp.tau_g();
  return resp.t0() + tg * tg / (2.0 * te) + tg * (std::numbers::sqrt2 / 2.0) * z - te * e;
}

std::vector<double> sample(const DetectorResponse& resp, RandomStream& rng, std::size_t n) {
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(resp, rng));
  return out;
}

double support_lo(const DetectorResponse& resp) {
  return resp.t0() - 20.0 * (resp.tau_e() + resp.tau_g());
}

double support_hi(const DetectorResponse& resp) {
  return resp.t0() + 20.0 * (resp.tau_e() + resp.tau_g());
}

}  // namespace timeleak
