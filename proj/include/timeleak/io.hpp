#ifndef TIMELEAK_IO_HPP
#define TIMELEAK_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "timeleak/estimation.hpp"
#include "timeleak/leakage.hpp"
#include "timeleak/simulation.hpp"

namespace timeleak {

enum class RenderFormat { Text, Structured };

// "500", "500ps", "0.5ns" -> picoseconds.
double parse_time_ps(const std::string& text);

// Receiver configuration: JSON with prior_bit0 and a 4-entry detectors array
// of {t0_ps, tau_e_ps, tau_g_ps, basis, bit}, array order = detector id.
// Malformed documents raise DataError, invalid values raise ArgumentError,
// both with the offending field path.
ReceiverModel parse_receiver_config(const std::string& text);
ReceiverModel load_receiver_config(const std::filesystem::path& path);
std::string receiver_config_to_json(const ReceiverModel& rcv);

// Histogram CSV: header "time_ps,count", one row per bin left edge, uniform
// ascending edges. Parse errors carry the line number.
TimingHistogram parse_histogram_csv(std::istream& in);
TimingHistogram load_histogram_csv(const std::filesystem::path& path);
void write_histogram_csv(std::ostream& out, const TimingHistogram& hist);

// Event stream CSV: header "detector,basis,bit,time_ps".
void write_events_csv(std::ostream& out, std::span<const EventRecord> events);
std::vector<EventRecord> parse_events_csv(std::istream& in);

// Public stream CSV: header "basis,time_ps".
void write_public_csv(std::ostream& out, std::span<const PublicRecord> records);
std::vector<PublicRecord> parse_public_csv(std::istream& in);

// Reports: fixed field order; text uses 6 significant digits, structured is
// JSON at full precision.
std::string render_leakage_report(const LeakageReport& report, RenderFormat format);
std::string render_fit_result(const FitResult& fit, RenderFormat format);
std::string render_attack_outcome(const AttackOutcome& outcome, RenderFormat format);

// Sweep: tab-separated table (one row per delay, one column per curve) or
// JSON arrays.
std::string render_sweep(const SweepResult& sweep, RenderFormat format);

}  // namespace timeleak

#endif
