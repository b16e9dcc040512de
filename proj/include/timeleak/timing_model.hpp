#ifndef TIMELEAK_TIMING_MODEL_HPP
#define TIMELEAK_TIMING_MODEL_HPP

#include <cstddef>
#include <vector>

#include "timeleak/errors.hpp"
#include "timeleak/random.hpp"

namespace timeleak {

// Scaled complementary error function exp(x^2)*erfc(x), stable for large x.
double erfcx(double x);

// Single-detector timing response
//
//   d(t) = 1/(2 tau_e) * exp(-tau_g^2/(4 tau_e^2))
//        * exp((t - t0)/tau_e) * erfc((t - t0)/tau_g)
//
// a Gaussian smeared by an exponential tail on the early-time side.
// Equivalently the law of G - E with G ~ N(t0 + tau_g^2/(2 tau_e), tau_g^2/2)
// and E exponential with mean tau_e. All times in picoseconds, densities per
// picosecond. Immutable after construction.
class DetectorResponse {
 public:
  DetectorResponse(double t0_ps, double tau_e_ps, double tau_g_ps);

  double t0() const { return t0_; }
  double tau_e() const { return tau_e_; }
  double tau_g() const { return tau_g_; }

  // Copy with the time offset replaced; shape parameters unchanged.
  DetectorResponse with_offset(double new_t0_ps) const;

  bool operator==(const DetectorResponse&) const = default;

 private:
  double t0_;
  double tau_e_;
  double tau_g_;
};

// Uniform time grid: start + k*step for k in [0, count).
struct TimeGrid {
  TimeGrid(double start_ps, double step_ps, std::size_t count);

  double start;
  double step;
  std::size_t count;

  double end() const { return start + static_cast<double>(count - 1) * step; }
  double point(std::size_t k) const { return start + static_cast<double>(k) * step; }
};

// Probability density per picosecond at time t. Finite and >= 0 for all
// finite t; |t - t0| up to 1e6 ps evaluates without overflow.
double density(const DetectorResponse& resp, double t_ps);

// P(T <= t), exact closed form: tau_e*d(t) + erfc(tau_g/(2 tau_e) - (t-t0)/tau_g)/2.
double cdf(const DetectorResponse& resp, double t_ps);

// Probability mass on [from, to]; absolute error well below 1e-9.
double integrate_density(const DetectorResponse& resp, double from_ps, double to_ps);

struct Moments {
  double mean_ps;
  double variance_ps2;
};

// Exact first two moments: mean = t0 + tau_g^2/(2 tau_e) - tau_e,
// variance = tau_g^2/2 + tau_e^2.
Moments moments(const DetectorResponse& resp);

// One draw from the response law.
double sample_one(const DetectorResponse& resp, RandomStream& rng);

// n i.i.d. draws; deterministic for a given stream state.
std::vector<double> sample(const DetectorResponse& resp, RandomStream& rng, std::size_t n);

// Conservative support bounds: t0 -/+ 20*(tau_e + tau_g). Mass outside is
// below 1e-9 on each side.
double support_lo(const DetectorResponse& resp);
double support_hi(const DetectorResponse& resp);

}  // namespace timeleak

#endif
