#include "timeleak/leakage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "timeleak/quadrature.hpp"

namespace timeleak {

namespace {

// Floor applied inside logarithms; shifts entropy integrals by < 1e-9 bits.
constexpr double kLogFloor = 1e-300;

double xlog2x(double p) {
  return p > 0.0 ? p * std::log2(std::max(p, kLogFloor)) : 0.0;
}

struct Bounds {
  double lo;
  double hi;
};

Bounds channel_bounds(const BitChannel& ch) {
  return {std::min(support_lo(ch.d0()), support_lo(ch.d1())),
          std::max(support_hi(ch.d0()), support_hi(ch.d1()))};
}

double binary_entropy_bits(double p) { return -xlog2x(p) - xlog2x(1.0 - p); }

EntropyTerms entropy_terms_at(const BitChannel& ch, double tol_bits) {
  const Bounds b = channel_bounds(ch);
  const double p0 = ch.prior();
  const double p1 = 1.0 - p0;
  const double h_x = binary_entropy_bits(p0);
  const double h_t = integrate_adaptive(
      [&](double t) {
        const double mix = mixture_density(ch, t);
        return -xlog2x(mix);
      },
      b.lo, b.hi, tol_bits, 32);
  const double h_xt = integrate_adaptive(
      [&](double t) {
        const double j0 = p0 * density(ch.d0(), t);
        const double j1 = p1 * density(ch.d1(), t);
        return -xlog2x(j0) - xlog2x(j1);
      },
      b.lo, b.hi, tol_bits, 32);
  return {h_t, h_x, h_xt};
}

double mutual_information_at(const BitChannel& ch, double tol_bits) {
  const EntropyTerms e = entropy_terms_at(ch, tol_bits);
  return std::clamp(e.h_x_bits + e.h_t_bits - e.h_xt_bits, 0.0, e.h_x_bits);
}

}  // namespace

char basis_label(Basis b) { return b == Basis::A ? 'A' : 'B'; }

BitChannel::BitChannel(DetectorResponse d0, DetectorResponse d1, double prior_bit0)
    : d0_(d0), d1_(d1), prior_(prior_bit0) {
  if (!(std::isfinite(prior_bit0) && prior_bit0 > 0.0 && prior_bit0 < 1.0))
    throw ArgumentError("BitChannel: prior must lie strictly in (0, 1)");
}

ReceiverModel::ReceiverModel(std::array<DetectorResponse, 4> detectors,
                             std::array<Basis, 4> basis_of,
                             std::array<int, 4> bit_of, double prior_bit0)
    : detectors_(detectors), basis_of_(basis_of), bit_of_(bit_of), prior_(prior_bit0) {
  if (!(std::isfinite(prior_bit0) && prior_bit0 > 0.0 && prior_bit0 < 1.0))
    throw ArgumentError("ReceiverModel: prior must lie strictly in (0, 1)");
  int cell_count[2][2] = {{0, 0}, {0, 0}};
  for (int i = 0; i < 4; ++i) {
    if (bit_of_[i] != 0 && bit_of_[i] != 1)
      throw ArgumentError("ReceiverModel: bit assignment must be 0 or 1");
    ++cell_count[static_cast<int>(basis_of_[i])][bit_of_[i]];
  }
  for (int b = 0; b < 2; ++b)
    for (int x = 0; x < 2; ++x)
      if (cell_count[b][x] != 1)
        throw ArgumentError(
            "ReceiverModel: each basis needs exactly one detector per bit value");
}

const DetectorResponse& ReceiverModel::detector(int id) const {
  if (id < 1 || id > 4) throw ArgumentError("ReceiverModel: detector id must be 1..4");
  return detectors_[static_cast<std::size_t>(id - 1)];
}

Basis ReceiverModel::basis_of(int id) const {
  if (id < 1 || id > 4) throw ArgumentError("ReceiverModel: detector id must be 1..4");
  return basis_of_[static_cast<std::size_t>(id - 1)];
}

int ReceiverModel::bit_of(int id) const {
  if (id < 1 || id > 4) throw ArgumentError("ReceiverModel: detector id must be 1..4");
  return bit_of_[static_cast<std::size_t>(id - 1)];
}

int ReceiverModel::detector_for(Basis basis, int bit) const {
  for (int i = 0; i < 4; ++i)
    if (basis_of_[i] == basis && bit_of_[i] == bit) return i + 1;
  throw ArgumentError("ReceiverModel: no detector for requested basis/bit");
}

BitChannel ReceiverModel::channel(Basis basis) const {
  return BitChannel(detector(detector_for(basis, 0)),
                    detector(detector_for(basis, 1)), prior_);
}

ReceiverModel ReceiverModel::with_common_offset(double t0_ps) const {
  std::array<DetectorResponse, 4> shifted{
      detectors_[0].with_offset(t0_ps), detectors_[1].with_offset(t0_ps),
      detectors_[2].with_offset(t0_ps), detectors_[3].with_offset(t0_ps)};
  return ReceiverModel(shifted, basis_of_, bit_of_, prior_);
}

double mixture_density(const BitChannel& ch, double t_ps) {
  return ch.prior() * density(ch.d0(), t_ps) +
         (1.0 - ch.prior()) * density(ch.d1(), t_ps);
}

EntropyTerms entropy_terms(const BitChannel& ch) {
  return entropy_terms_at(ch, 1e-10);
}

double mutual_information(const BitChannel& ch) {
  // Tighten the quadrature until the estimate is stable to < 1e-6 bits.
  double tol = 1e-8;
  double prev = mutual_information_at(ch, tol);
  for (int round = 0; round < 3; ++round) {
    tol /= 16.0;
    const double next = mutual_information_at(ch, tol);
    if (std::abs(next - prev) < 1e-6) return next;
    prev = next;
  }
  return prev;
}

double binned_mutual_information(const BitChannel& ch, double bin_width_ps,
                                 double phase_ps) {
  if (!(std::isfinite(bin_width_ps) && bin_width_ps > 0.0))
    throw ArgumentError("binned_mutual_information: bin_width must be > 0");
  if (!(phase_ps >= 0.0 && phase_ps < bin_width_ps))
    throw ArgumentError("binned_mutual_information: phase must lie in [0, bin_width)");
  const Bounds b = channel_bounds(ch);
  const double k0 = std::floor((b.lo - phase_ps) / bin_width_ps) - 1.0;
  const double k1 = std::ceil((b.hi - phase_ps) / bin_width_ps) + 1.0;
  const double n_bins = k1 - k0;
  if (!(n_bins < 1e8))
    throw ArgumentError("binned_mutual_information: bin_width too small for the support");

  const double p0 = ch.prior();
  const double p1 = 1.0 - p0;

  // Closed-form CDF gives exact bin masses; the two open tail bins make the
  // partition cover the whole axis.
  double sum_joint = 0.0;  // sum over cells of p ln p (nats)
  double sum_bin = 0.0;    // sum over bins of p ln p
  double c0_prev = 0.0;
  double c1_prev = 0.0;
  auto accumulate = [&](double m0, double m1) {
    const double j0 = p0 * m0;
    const double j1 = p1 * m1;
    const double pk = j0 + j1;
    if (j0 > 0.0) sum_joint += j0 * std::log(j0);
    if (j1 > 0.0) sum_joint += j1 * std::log(j1);
    if (pk > 0.0) sum_bin += pk * std::log(pk);
  };
  const long long kk0 = static_cast<long long>(k0);
  const long long kk1 = static_cast<long long>(k1);
  for (long long k = kk0; k <= kk1; ++k) {
    const double edge = phase_ps + bin_width_ps * static_cast<double>(k);
    const double c0 = cdf(ch.d0(), edge);
    const double c1 = cdf(ch.d1(), edge);
    if (k == kk0) {
      accumulate(c0, c1);  // (-inf, first edge)
    } else {
      accumulate(std::max(c0 - c0_prev, 0.0), std::max(c1 - c1_prev, 0.0));
    }
    c0_prev = c0;
    c1_prev = c1;
  }
  accumulate(1.0 - c0_prev, 1.0 - c1_prev);  // [last edge, inf)

  const double sum_x = p0 * std::log(p0) + p1 * std::log(p1);
  const double mi_bits = (sum_joint - sum_x - sum_bin) / std::numbers::ln2;
  return std::clamp(mi_bits, 0.0, binary_entropy_bits(p0));
}

double binned_mutual_information_phase_averaged(const BitChannel& ch,
                                                double bin_width_ps,
                                                std::size_t phases) {
  if (phases < 1)
    throw ArgumentError("binned_mutual_information_phase_averaged: phases must be >= 1");
  double sum = 0.0;
  for (std::size_t k = 0; k < phases; ++k) {
    const double phase =
        bin_width_ps * static_cast<double>(k) / static_cast<double>(phases);
    sum += binned_mutual_information(ch, bin_width_ps, phase);
  }
  return sum / static_cast<double>(phases);
}

double map_success_probability(const BitChannel& ch) {
  const Bounds b = channel_bounds(ch);
  const double p0 = ch.prior();
  const double p1 = 1.0 - p0;
  auto posterior_gap = [&](double t) {
    return p0 * density(ch.d0(), t) - p1 * density(ch.d1(), t);
  };

  // Locate decision boundaries, then integrate the winning density on each
  // segment with the closed-form CDF.
  const TimeGrid grid(b.lo, (b.hi - b.lo) / 4095.0, 4096);
  std::vector<double> crossings;
  double g_prev = posterior_gap(grid.point(0));
  for (std::size_t i = 1; i < grid.count; ++i) {
    const double g_next = posterior_gap(grid.point(i));
    if ((g_prev < 0.0 && g_next > 0.0) || (g_prev > 0.0 && g_next < 0.0)) {
      double lo = grid.point(i - 1);
      double hi = grid.point(i);
      double g_lo = g_prev;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double g_mid = posterior_gap(mid);
        if ((g_lo < 0.0) == (g_mid < 0.0)) {
          lo = mid;
          g_lo = g_mid;
        } else {
          hi = mid;
        }
      }
      crossings.push_back(0.5 * (lo + hi));
    }
    g_prev = g_next;
  }

  double success = 0.0;
  double seg_lo = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j <= crossings.size(); ++j) {
    const double seg_hi =
        j < crossings.size() ? crossings[j] : std::numeric_limits<double>::infinity();
    const double rep_lo = std::max(seg_lo, b.lo);
    const double rep_hi = std::min(seg_hi, b.hi);
    const double rep = 0.5 * (rep_lo + rep_hi);
    const int winner = posterior_gap(rep) >= 0.0 ? 0 : 1;  // ties toward bit 0
    const DetectorResponse& d = winner == 0 ? ch.d0() : ch.d1();
    const double c_lo = std::isinf(seg_lo) ? 0.0 : cdf(d, seg_lo);
    const double c_hi = std::isinf(seg_hi) ? 1.0 : cdf(d, seg_hi);
    success += (winner == 0 ? p0 : p1) * std::max(c_hi - c_lo, 0.0);
    seg_lo = seg_hi;
  }
  return std::clamp(success, std::max(p0, p1), 1.0);
}

LeakageReport average_leakage(const ReceiverModel& rcv) {
  LeakageReport report;
  double mi_sum = 0.0;
  double success_sum = 0.0;
  for (Basis basis : {Basis::A, Basis::B}) {
    const BitChannel ch = rcv.channel(basis);
    const double mi = mutual_information(ch);
    report.mi_per_basis_bits[static_cast<std::size_t>(basis)] = mi;
    mi_sum += mi;
    success_sum += map_success_probability(ch);
  }
  report.mi_continuous_bits = 0.5 * mi_sum;
  report.eve_map_success = 0.5 * success_sum;
  for (int id = 1; id <= 4; ++id) {
    report.grouping_basis[static_cast<std::size_t>(id - 1)] = rcv.basis_of(id);
    report.grouping_bit[static_cast<std::size_t>(id - 1)] = rcv.bit_of(id);
  }
  return report;
}

GroupingResult best_grouping(const std::array<DetectorResponse, 4>& detectors) {
  // The 3 ways to split {1,2,3,4} into two basis pairs, keyed by detector 1's
  // partner. Bit labels within a pair do not change the MI.
  static constexpr std::array<std::array<int, 4>, 3> pairings{{
      {0, 1, 2, 3},  // (1,2) vs (3,4)
      {0, 2, 1, 3},  // (1,3) vs (2,4)
      {0, 3, 1, 2},  // (1,4) vs (2,3)
  }};
  std::optional<GroupingResult> best;
  for (const auto& p : pairings) {
    std::array<Basis, 4> basis_of{};
    std::array<int, 4> bit_of{};
    basis_of[static_cast<std::size_t>(p[0])] = Basis::A;
    basis_of[static_cast<std::size_t>(p[1])] = Basis::A;
    basis_of[static_cast<std::size_t>(p[2])] = Basis::B;
    basis_of[static_cast<std::size_t>(p[3])] = Basis::B;
    bit_of[static_cast<std::size_t>(p[0])] = 0;
    bit_of[static_cast<std::size_t>(p[1])] = 1;
    bit_of[static_cast<std::size_t>(p[2])] = 0;
    bit_of[static_cast<std::size_t>(p[3])] = 1;
    ReceiverModel candidate(detectors, basis_of, bit_of, 0.5);
    const double mi = average_leakage(candidate).mi_continuous_bits;
    if (!best || mi > best->mi_bits) best = GroupingResult{candidate, mi};
  }
  return *best;
}

SweepResult delay_sweep(double tau_e_ps, double tau_g_ps,
                        std::span<const double> delays_ps,
                        std::span<const double> bin_widths_ps,
                        std::size_t phases) {
  for (double d : delays_ps)
    if (!(std::isfinite(d) && d >= 0.0))
      throw ArgumentError("delay_sweep: delays must be non-negative");
  const DetectorResponse reference(0.0, tau_e_ps, tau_g_ps);
  SweepResult result;
  result.delta_t0_ps.assign(delays_ps.begin(), delays_ps.end());
  result.bin_widths_ps.assign(bin_widths_ps.begin(), bin_widths_ps.end());
  result.binned_bits.resize(bin_widths_ps.size());
  for (double delay : delays_ps) {
    const BitChannel ch(reference, reference.with_offset(delay), 0.5);
    result.continuous_bits.push_back(mutual_information(ch));
    for (std::size_t w = 0; w < bin_widths_ps.size(); ++w) {
      result.binned_bits[w].push_back(
          binned_mutual_information_phase_averaged(ch, bin_widths_ps[w], phases));
    }
  }
  return result;
}

double compensated_leakage(const ReceiverModel& rcv) {
  // Any common offset gives the same MI; the mean keeps timestamps in range.
  double t0_sum = 0.0;
  for (int id = 1; id <= 4; ++id) t0_sum += rcv.detector(id).t0();
  return average_leakage(rcv.with_common_offset(0.25 * t0_sum)).mi_continuous_bits;
}

std::uint64_t privacy_amplification_budget(double mi_bits, std::int64_t sifted_key_length) {
  if (sifted_key_length < 0)
    throw ArgumentError("privacy_amplification_budget: negative key length");
  if (!(mi_bits >= 0.0 && mi_bits <= 1.0))
    throw ArgumentError("privacy_amplification_budget: mi_bits must lie in [0, 1]");
  const double raw = mi_bits * static_cast<double>(sifted_key_length);
  const double nearest = std::round(raw);
  // Treat products within 1e-9 relative of an integer as exact so decimal
  // rates like 0.038 * 10000 do not ceil up from representation error.
  if (std::abs(raw - nearest) <= 1e-9 * std::max(1.0, std::abs(raw)))
    return static_cast<std::uint64_t>(nearest);
  return static_cast<std::uint64_t>(std::ceil(raw));
}

}  // namespace timeleak
