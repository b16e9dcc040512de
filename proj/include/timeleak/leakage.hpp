#ifndef TIMELEAK_LEAKAGE_HPP
#define TIMELEAK_LEAKAGE_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "timeleak/timing_model.hpp"

namespace timeleak {

enum class Basis : int { A = 0, B = 1 };

char basis_label(Basis b);

// Binary channel: the secret bit selects which detector response generated
// the (public) timestamp.
class BitChannel {
 public:
  BitChannel(DetectorResponse d0, DetectorResponse d1, double prior_bit0 = 0.5);

  const DetectorResponse& d0() const { return d0_; }
  const DetectorResponse& d1() const { return d1_; }
  double prior() const { return prior_; }

 private:
  DetectorResponse d0_;
  DetectorResponse d1_;
  double prior_;
};

// Four detectors with their basis/bit assignment: each basis has exactly one
// detector per bit value. Detector ids run 1..4.
class ReceiverModel {
 public:
  ReceiverModel(std::array<DetectorResponse, 4> detectors,
                std::array<Basis, 4> basis_of, std::array<int, 4> bit_of,
                double prior_bit0 = 0.5);

  const DetectorResponse& detector(int id) const;  // id in 1..4
  Basis basis_of(int id) const;
  int bit_of(int id) const;
  double prior() const { return prior_; }

  int detector_for(Basis basis, int bit) const;  // inverse assignment
  BitChannel channel(Basis basis) const;

  // Copy with every t0 replaced by a common offset.
  ReceiverModel with_common_offset(double t0_ps) const;

 private:
  std::array<DetectorResponse, 4> detectors_;
  std::array<Basis, 4> basis_of_;
  std::array<int, 4> bit_of_;
  double prior_;
};

struct LeakageReport {
  double mi_continuous_bits = 0.0;
  std::array<double, 2> mi_per_basis_bits{0.0, 0.0};  // indexed by Basis
  std::map<double, double> mi_binned_bits;            // bin width ps -> bits
  double eve_map_success = 0.0;
  std::optional<double> compensated_mi_bits;
  std::array<Basis, 4> grouping_basis{};  // assignment the figures refer to
  std::array<int, 4> grouping_bit{};
};

struct SweepResult {
  std::vector<double> delta_t0_ps;
  std::vector<double> continuous_bits;       // aligned with delta_t0_ps
  std::vector<double> bin_widths_ps;         // one binned curve per width
  std::vector<std::vector<double>> binned_bits;  // [width index][delay index]
};

// Click density of the detector ensemble: p0*d0(t) + (1-p0)*d1(t).
double mixture_density(const BitChannel& ch, double t_ps);

// Entropy pieces of the mutual information; H(T) is a differential entropy
// and may be negative on its own. Exposed for debugging only.
struct EntropyTerms {
  double h_t_bits;
  double h_x_bits;
  double h_xt_bits;
};
EntropyTerms entropy_terms(const BitChannel& ch);

// I(X;T) = H(X) + H(T) - H(X,T) in bits, clamped to [0, H(X)].
// Quadrature is re-tightened until the estimate moves by < 1e-6 bits.
double mutual_information(const BitChannel& ch);

// I(X; bin index) for bins [phase + k*w, phase + (k+1)*w).
double binned_mutual_information(const BitChannel& ch, double bin_width_ps,
                                 double phase_ps = 0.0);

// Mean of binned_mutual_information over `phases` offsets uniform in [0, w).
double binned_mutual_information_phase_averaged(const BitChannel& ch,
                                                double bin_width_ps,
                                                std::size_t phases);

// Probability that a maximum-a-posteriori guess from the timestamp is
// correct: integral of max(p0*d0, p1*d1).
double map_success_probability(const BitChannel& ch);

// Per-basis mutual information plus the 50/50 basis average and the MAP
// success probability. Binned and compensated fields are left for callers
// that request them.
LeakageReport average_leakage(const ReceiverModel& rcv);

struct GroupingResult {
  ReceiverModel receiver;
  double mi_bits;
};

// Enumerates the 3 basis pairings of 4 detectors and returns the one with
// the largest average leakage (bit labels are irrelevant by relabeling
// invariance). Prior 0.5.
GroupingResult best_grouping(const std::array<DetectorResponse, 4>& detectors);

// MI vs relative delay for shape-identical detectors; binned curves are
// phase-averaged.
SweepResult delay_sweep(double tau_e_ps, double tau_g_ps,
                        std::span<const double> delays_ps,
                        std::span<const double> bin_widths_ps,
                        std::size_t phases = 16);

// Leakage after replacing every t0 with their mean.
double compensated_leakage(const ReceiverModel& rcv);

// Extra key shrinkage charged to this side channel: ceil(mi_bits * length).
std::uint64_t privacy_amplification_budget(double mi_bits, std::int64_t sifted_key_length);

}  // namespace timeleak

#endif
