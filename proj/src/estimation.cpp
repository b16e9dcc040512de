#include "timeleak/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>

namespace timeleak {

namespace {

constexpr double kMassFloor = 1e-300;

// Bin masses under a response, one CDF sweep over the edges.
std::vector<double> bin_masses(const TimingHistogram& hist, const DetectorResponse& resp) {
  std::vector<double> masses(hist.size());
  double prev = cdf(resp, hist.edge(0));
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double next = cdf(resp, hist.edge(i + 1));
    masses[i] = std::max(next - prev, 0.0);
    prev = next;
  }
  return masses;
}

double log_likelihood_from_masses(const TimingHistogram& hist,
                                  std::span<const double> masses) {
  const double total = static_cast<double>(hist.total());
  double ll = 0.0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double mu = std::max(total * masses[i], kMassFloor);
    const double n = static_cast<double>(hist.counts()[i]);
    ll += n * std::log(mu) - mu;
  }
  return ll;
}

struct ModelPoint {
  DetectorResponse resp;
  double background;  // 0 when the uniform term is disabled
};

// Optimizer coordinates: (t0, log tau_e, log tau_g [, logit beta]).
ModelPoint decode(std::span<const double> x, bool background) {
  const double tau_e = std::max(std::exp(x[1]), 1e-12);
  const double tau_g = std::max(std::exp(x[2]), 1e-12);
  double beta = 0.0;
  if (background) beta = 1.0 / (1.0 + std::exp(-x[3]));
  return {DetectorResponse(x[0], tau_e, tau_g), beta};
}

double objective(const TimingHistogram& hist, const ModelPoint& m) {
  std::vector<double> masses = bin_masses(hist, m.resp);
  if (m.background > 0.0) {
    const double uniform = 1.0 / static_cast<double>(hist.size());
    for (double& q : masses) q = (1.0 - m.background) * q + m.background * uniform;
  }
  return -log_likelihood_from_masses(hist, masses);
}

struct SimplexOutcome {
  std::vector<double> best;
  double f_best;
  std::size_t iterations;
  bool converged;
};

// Parameter distance in picosecond-equivalents; log coordinates are scaled
// by the corresponding time constant.
double ps_distance(std::span<const double> a, std::span<const double> b) {
  const double te = std::exp(a[1]);
  const double tg = std::exp(a[2]);
  double d = std::abs(a[0] - b[0]);
  d = std::max(d, te * std::abs(a[1] - b[1]));
  d = std::max(d, tg * std::abs(a[2] - b[2]));
  return d;
}

SimplexOutcome nelder_mead(const std::function<double(std::span<const double>)>& f,
                           std::vector<double> x0, std::vector<double> steps,
                           std::size_t max_iterations) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> v(n + 1, x0);
  for (std::size_t j = 0; j < n; ++j) v[j + 1][j] += steps[j];
  std::vector<double> fv(n + 1);
  for (std::size_t j = 0; j <= n; ++j) fv[j] = f(v[j]);

  std::size_t iter = 0;
  bool converged = false;
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  while (iter < max_iterations) {
    // order: best first, worst last
    std::vector<std::size_t> idx(n + 1);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return fv[a] < fv[b];
    });
    {
      std::vector<std::vector<double>> vo(n + 1);
      std::vector<double> fo(n + 1);
      for (std::size_t j = 0; j <= n; ++j) {
        vo[j] = v[idx[j]];
        fo[j] = fv[idx[j]];
      }
      v.swap(vo);
      fv.swap(fo);
    }

    const double f_spread = std::abs(fv[n] - fv[0]);
    double x_spread = 0.0;
    for (std::size_t j = 1; j <= n; ++j)
      x_spread = std::max(x_spread, ps_distance(v[0], v[j]));
    if (f_spread <= 1e-10 * std::max(1.0, std::abs(fv[0])) && x_spread < 1e-3) {
      converged = true;
      break;
    }

    ++iter;
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += v[j][k];
      centroid[k] = s / static_cast<double>(n);
    }
    for (std::size_t k = 0; k < n; ++k) xr[k] = centroid[k] + (centroid[k] - v[n][k]);
    const double fr = f(xr);
    if (fr < fv[0]) {
      for (std::size_t k = 0; k < n; ++k) xe[k] = centroid[k] + 2.0 * (centroid[k] - v[n][k]);
      const double fe = f(xe);
      if (fe < fr) {
        v[n] = xe;
        fv[n] = fe;
      } else {
        v[n] = xr;
        fv[n] = fr;
      }
      continue;
    }
    if (fr < fv[n - 1]) {
      v[n] = xr;
      fv[n] = fr;
      continue;
    }
    const bool outside = fr < fv[n];
    if (outside) {
      for (std::size_t k = 0; k < n; ++k) xc[k] = centroid[k] + 0.5 * (xr[k] - centroid[k]);
    } else {
      for (std::size_t k = 0; k < n; ++k) xc[k] = centroid[k] + 0.5 * (v[n][k] - centroid[k]);
    }
    const double fc = f(xc);
    if (fc < std::min(fr, fv[n])) {
      v[n] = xc;
      fv[n] = fc;
      continue;
    }
    // shrink toward best
    for (std::size_t j = 1; j <= n; ++j) {
      for (std::size_t k = 0; k < n; ++k) v[j][k] = v[0][k] + 0.5 * (v[j][k] - v[0][k]);
      fv[j] = f(v[j]);
    }
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j <= n; ++j)
    if (fv[j] < fv[best]) best = j;
  return {v[best], fv[best], iter, converged};
}

// Solve H * x = I for the inverse via Gauss-Jordan with partial pivoting.
// Returns false when H is numerically singular.
bool invert(std::vector<std::vector<double>>& h, std::vector<std::vector<double>>& inv) {
  const std::size_t n = h.size();
  inv.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(h[r][col]) > std::abs(h[pivot][col])) pivot = r;
    if (!(std::abs(h[pivot][col]) > 0.0)) return false;
    std::swap(h[pivot], h[col]);
    std::swap(inv[pivot], inv[col]);
    const double scale = 1.0 / h[col][col];
    for (std::size_t c = 0; c < n; ++c) {
      h[col][c] *= scale;
      inv[col][c] *= scale;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = h[r][col];
      if (factor == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        h[r][c] -= factor * h[col][c];
        inv[r][c] -= factor * inv[col][c];
      }
    }
  }
  return true;
}

}  // namespace

TimingHistogram::TimingHistogram(double bin_start_ps, double bin_width_ps,
                                 std::vector<std::uint64_t> counts)
    : bin_start_(bin_start_ps), bin_width_(bin_width_ps), counts_(std::move(counts)) {
  if (!std::isfinite(bin_start_ps))
    throw ArgumentError("TimingHistogram: bin_start must be finite");
  if (!(std::isfinite(bin_width_ps) && bin_width_ps > 0.0))
    throw ArgumentError("TimingHistogram: bin_width must be > 0");
  if (counts_.size() < 3)
    throw ArgumentError("TimingHistogram: need at least 3 bins");
  total_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

TimingHistogram histogram_from_samples(std::span<const double> samples,
                                       double bin_width_ps) {
  if (samples.empty()) throw ArgumentError("histogram_from_samples: no samples");
  if (!(std::isfinite(bin_width_ps) && bin_width_ps > 0.0))
    throw ArgumentError("histogram_from_samples: bin_width must be > 0");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const std::size_t n_bins =
      static_cast<std::size_t>(std::floor((*hi_it - lo) / bin_width_ps)) + 1;
  std::vector<std::uint64_t> counts(std::max<std::size_t>(n_bins, 3), 0);
  for (double s : samples) {
    auto idx = static_cast<std::size_t>(std::floor((s - lo) / bin_width_ps));
    if (idx >= counts.size()) idx = counts.size() - 1;
    ++counts[idx];
  }
  return TimingHistogram(lo, bin_width_ps, std::move(counts));
}

DetectorResponse initial_guess(const TimingHistogram& hist) {
  const double w = hist.bin_width();
  const double floor_tau = 0.5 * w;
  const double total = static_cast<double>(hist.total());
  if (total == 0.0) {
    return DetectorResponse(0.5 * (hist.edge(0) + hist.edge(hist.size())),
                            floor_tau, floor_tau);
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < hist.size(); ++i)
    mean += hist.center(i) * static_cast<double>(hist.counts()[i]);
  mean /= total;
  double var = 0.0;
  double mu3 = 0.0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double d = hist.center(i) - mean;
    const double n = static_cast<double>(hist.counts()[i]);
    var += d * d * n;
    mu3 += d * d * d * n;
  }
  var /= total;
  mu3 /= total;

  // Model moments: mean = t0 + tau_g^2/(2 tau_e) - tau_e,
  // var = tau_g^2/2 + tau_e^2, third central moment = -2 tau_e^3.
  double tau_e;
  double tau_g;
  const double sd = std::sqrt(std::max(var, 0.0));
  if (mu3 < 0.0 && std::cbrt(-0.5 * mu3) < sd) {
    tau_e = std::cbrt(-0.5 * mu3);
    tau_g = std::sqrt(2.0 * std::max(var - tau_e * tau_e, 0.0));
  } else {
    // degenerate skewness
    tau_e = sd / std::numbers::sqrt2;
    tau_g = tau_e;
  }
  tau_e = std::max(tau_e, floor_tau);
  tau_g = std::max(tau_g, floor_tau);
  const double t0 = mean - tau_g * tau_g / (2.0 * tau_e) + tau_e;
  return DetectorResponse(t0, tau_e, tau_g);
}

double poisson_log_likelihood(const TimingHistogram& hist, const DetectorResponse& resp) {
  return log_likelihood_from_masses(hist, bin_masses(hist, resp));
}

namespace {

double pearson_chi2_per_dof(const TimingHistogram& hist, std::span<const double> masses) {
  const double total = static_cast<double>(hist.total());

  struct Group {
    double observed = 0.0;
    double expected = 0.0;
  };
  std::vector<Group> groups;
  Group acc;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    acc.observed += static_cast<double>(hist.counts()[i]);
    acc.expected += total * masses[i];
    if (acc.expected >= 5.0) {
      groups.push_back(acc);
      acc = Group{};
    }
  }
  if ((acc.expected > 0.0 || acc.observed > 0.0) && !groups.empty()) {
    groups.back().observed += acc.observed;
    groups.back().expected += acc.expected;
  }
  if (groups.size() < 5)
    throw InsufficientDataError("goodness_of_fit: fewer than 5 usable bins");

  double chi2 = 0.0;
  for (const Group& g : groups) {
    const double d = g.observed - g.expected;
    chi2 += d * d / g.expected;
  }
  return chi2 / static_cast<double>(groups.size() - 3);
}

}  // namespace

double goodness_of_fit(const TimingHistogram& hist, const DetectorResponse& resp) {
  return pearson_chi2_per_dof(hist, bin_masses(hist, resp));
}

FitResult fit_response(const TimingHistogram& hist, const FitOptions& options) {
  if (hist.total() < options.min_events)
    throw InsufficientDataError("fit_response: " + std::to_string(hist.total()) +
                                " events, need at least " +
                                std::to_string(options.min_events));

  const DetectorResponse seed = options.guess ? *options.guess : initial_guess(hist);
  const bool background = options.uniform_background;
  const std::size_t dim = background ? 4 : 3;

  std::vector<double> x0{seed.t0(), std::log(seed.tau_e()), std::log(seed.tau_g())};
  std::vector<double> steps{std::max(0.25 * seed.tau_g(), hist.bin_width()), 0.15, 0.15};
  if (background) {
    x0.push_back(std::log(0.01 / 0.99));  // beta = 1%
    steps.push_back(1.0);
  }

  auto f = [&](std::span<const double> x) {
    return objective(hist, decode(x, background));
  };
  const SimplexOutcome opt = nelder_mead(f, x0, steps, 10000);
  const ModelPoint fitted = decode(opt.best, background);

  // Observed information: numerical Hessian of -loglik in the original
  // parameters (t0, tau_e, tau_g [, beta]).
  std::vector<double> theta{fitted.resp.t0(), fitted.resp.tau_e(), fitted.resp.tau_g()};
  if (background) theta.push_back(fitted.background);
  auto f_orig = [&](const std::vector<double>& q) {
    double beta = background ? std::clamp(q[3], 0.0, 0.999999) : 0.0;
    return objective(hist, {DetectorResponse(q[0], std::max(q[1], 1e-9),
                                             std::max(q[2], 1e-9)),
                            beta});
  };
  std::vector<double> h(dim);
  for (std::size_t j = 0; j < 3; ++j) h[j] = std::max(1e-3 * std::abs(theta[j]), 1e-2);
  if (background) h[3] = 1e-4;
  std::vector<std::vector<double>> hess(dim, std::vector<double>(dim, 0.0));
  const double f0 = f_orig(theta);
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t k = j; k < dim; ++k) {
      double value;
      if (j == k) {
        auto qp = theta, qm = theta;
        qp[j] += h[j];
        qm[j] -= h[j];
        value = (f_orig(qp) - 2.0 * f0 + f_orig(qm)) / (h[j] * h[j]);
      } else {
        auto qpp = theta, qpm = theta, qmp = theta, qmm = theta;
        qpp[j] += h[j]; qpp[k] += h[k];
        qpm[j] += h[j]; qpm[k] -= h[k];
        qmp[j] -= h[j]; qmp[k] += h[k];
        qmm[j] -= h[j]; qmm[k] -= h[k];
        value = (f_orig(qpp) - f_orig(qpm) - f_orig(qmp) + f_orig(qmm)) /
                (4.0 * h[j] * h[k]);
      }
      hess[j][k] = value;
      hess[k][j] = value;
    }
  }
  std::array<double, 3> std_errors{0.0, 0.0, 0.0};
  std::vector<std::vector<double>> cov;
  if (invert(hess, cov)) {
    for (std::size_t j = 0; j < 3; ++j)
      std_errors[j] = cov[j][j] > 0.0 ? std::sqrt(cov[j][j]) : 0.0;
  }

  double chi2 = 0.0;
  try {
    // grade the model that was actually fitted, background term included
    std::vector<double> masses = bin_masses(hist, fitted.resp);
    if (fitted.background > 0.0) {
      const double uniform = 1.0 / static_cast<double>(hist.size());
      for (double& q : masses) q = (1.0 - fitted.background) * q + fitted.background * uniform;
    }
    chi2 = pearson_chi2_per_dof(hist, masses);
  } catch (const InsufficientDataError&) {
    chi2 = 0.0;  // too few groups to grade the fit
  }

  FitResult result{fitted.resp,
                   std_errors,
                   chi2,
                   opt.iterations,
                   opt.converged,
                   -opt.f_best,
                   background ? std::optional<double>(fitted.background)
                              : std::nullopt};
  return result;
}

FitResult fit_response(const TimingHistogram& hist,
                       const std::optional<DetectorResponse>& guess) {
  FitOptions options;
  options.guess = guess;
  return fit_response(hist, options);
}

namespace {

// Poisson draw; Knuth for small means, normal approximation beyond (more
// than adequate for resampling bin counts).
std::uint64_t poisson_draw(double lambda, RandomStream& rng) {
  if (lambda <= 0.0) return 0;
  if (lambda < 50.0) {
    const double limit = std::exp(-lambda);
    double p = 1.0;
    std::uint64_t k = 0;
    do {
      ++k;
      p *= 1.0 - rng.next_unit();
    } while (p > limit);
    return k - 1;
  }
  const double v = lambda + std::sqrt(lambda) * rng.next_normal();
  return v > 0.0 ? static_cast<std::uint64_t>(std::llround(v)) : 0;
}

}  // namespace

std::array<double, 3> bootstrap_std_errors(const TimingHistogram& hist,
                                           const FitOptions& options,
                                           std::size_t resamples,
                                           std::uint64_t seed) {
  if (resamples < 2)
    throw ArgumentError("bootstrap_std_errors: need at least 2 resamples");
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  std::array<double, 3> sum2{0.0, 0.0, 0.0};
  FitOptions refit = options;
  for (std::size_t r = 0; r < resamples; ++r) {
    RandomStream rng(RandomStream::derive(seed, r));
    std::vector<std::uint64_t> counts(hist.size());
    for (std::size_t i = 0; i < hist.size(); ++i)
      counts[i] = poisson_draw(static_cast<double>(hist.counts()[i]), rng);
    const TimingHistogram resampled(hist.bin_start(), hist.bin_width(),
                                    std::move(counts));
    refit.min_events = 1;  // resampling noise must not trip the gate
    const FitResult fit = fit_response(resampled, refit);
    const double p[3] = {fit.params.t0(), fit.params.tau_e(), fit.params.tau_g()};
    for (int j = 0; j < 3; ++j) {
      sum[static_cast<std::size_t>(j)] += p[j];
      sum2[static_cast<std::size_t>(j)] += p[j] * p[j];
    }
  }
  std::array<double, 3> errors{};
  const double n = static_cast<double>(resamples);
  for (std::size_t j = 0; j < 3; ++j) {
    const double mean = sum[j] / n;
    const double var = std::max(sum2[j] / n - mean * mean, 0.0) * n / (n - 1.0);
    errors[j] = std::sqrt(var);
  }
  return errors;
}

}  // namespace timeleak
