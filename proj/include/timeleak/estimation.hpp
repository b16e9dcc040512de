#ifndef TIMELEAK_ESTIMATION_HPP
#define TIMELEAK_ESTIMATION_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "timeleak/timing_model.hpp"

namespace timeleak {

// Binned photoevent counts over uniform bins [bin_start + i*w, bin_start + (i+1)*w).
class TimingHistogram {
 public:
  TimingHistogram(double bin_start_ps, double bin_width_ps,
                  std::vector<std::uint64_t> counts);

  double bin_start() const { return bin_start_; }
  double bin_width() const { return bin_width_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }
  std::size_t size() const { return counts_.size(); }

  double edge(std::size_t i) const {
    return bin_start_ + static_cast<double>(i) * bin_width_;
  }
  double center(std::size_t i) const {
    return bin_start_ + (static_cast<double>(i) + 0.5) * bin_width_;
  }

 private:
  double bin_start_;
  double bin_width_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_;
};

TimingHistogram histogram_from_samples(std::span<const double> samples,
                                       double bin_width_ps);

struct FitResult {
  DetectorResponse params;
  std::array<double, 3> std_errors;  // (t0, tau_e, tau_g), picoseconds
  double chi2_per_dof;
  std::size_t n_iterations;
  bool converged;
  double log_likelihood;  // Poisson, additive constants dropped
  std::optional<double> background_fraction;
};

struct FitOptions {
  std::optional<DetectorResponse> guess;
  bool uniform_background = false;  // adds one amplitude parameter
  std::uint64_t min_events = 1000;
};

// Poisson maximum likelihood of the binned counts against expected masses
// total * integrate_density(bin). Nelder-Mead on (t0, log tau_e, log tau_g);
// standard errors from the inverse observed-information matrix.
FitResult fit_response(const TimingHistogram& hist, const FitOptions& options);
FitResult fit_response(const TimingHistogram& hist,
                       const std::optional<DetectorResponse>& guess = std::nullopt);

// Moment-based optimizer seed; always returns a valid response.
DetectorResponse initial_guess(const TimingHistogram& hist);

// Bootstrap cross-check of the observed-information standard errors:
// refits `resamples` count-resampled histograms and returns the spread of
// the fitted (t0, tau_e, tau_g).
std::array<double, 3> bootstrap_std_errors(const TimingHistogram& hist,
                                           const FitOptions& options,
                                           std::size_t resamples,
                                           std::uint64_t seed);

// Pearson chi-square per degree of freedom, low-expectation bins merged,
// dof = used groups - 3.
double goodness_of_fit(const TimingHistogram& hist, const DetectorResponse& resp);

// Poisson log-likelihood (constants dropped) of the histogram under resp.
double poisson_log_likelihood(const TimingHistogram& hist, const DetectorResponse& resp);

}  // namespace timeleak

#endif
