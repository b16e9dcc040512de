#include "timeleak/simulation.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "timeleak/random.hpp"

namespace timeleak {

namespace {

double xlnx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

// Plug-in MI of a 2x2 joint distribution, in bits.
double confusion_mi_bits(const double joint[2][2]) {
  double row[2] = {joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]};
  double col[2] = {joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]};
  double nats = 0.0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) nats += xlnx(joint[x][y]);
  for (int x = 0; x < 2; ++x) nats -= xlnx(row[x]);
  for (int y = 0; y < 2; ++y) nats -= xlnx(col[y]);
  return std::max(nats / std::numbers::ln2, 0.0);
}

}  // namespace

std::vector<EventRecord> simulate_session(const ReceiverModel& rcv, std::size_t n,
                                          std::uint64_t seed) {
  std::vector<EventRecord> events;
  events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream stream(RandomStream::derive(seed, i));
    const Basis basis = stream.next_unit() < 0.5 ? Basis::A : Basis::B;
    const int bit = stream.next_unit() < rcv.prior() ? 0 : 1;
    const int detector = rcv.detector_for(basis, bit);
    const double t = sample_one(rcv.detector(detector), stream);
    events.push_back({detector, bit, basis, t});
  }
  return events;
}

std::vector<PublicRecord> publish(std::span<const EventRecord> events,
                                  std::optional<double> resolution_ps) {
  if (resolution_ps && !(*resolution_ps > 0.0 && std::isfinite(*resolution_ps)))
    throw ArgumentError("publish: resolution must be > 0");
  std::vector<PublicRecord> records;
  records.reserve(events.size());
  for (const EventRecord& ev : events) {
    double t = ev.timestamp_ps;
    if (resolution_ps) t = *resolution_ps * std::round(t / *resolution_ps);
    records.push_back({ev.basis, t});
  }
  return records;
}

std::vector<int> eve_map_attack(std::span<const PublicRecord> public_records,
                                const ReceiverModel& rcv,
                                std::optional<double> resolution_ps) {
  if (resolution_ps && !(*resolution_ps > 0.0 && std::isfinite(*resolution_ps)))
    throw ArgumentError("eve_map_attack: resolution must be > 0");
  const double p0 = rcv.prior();
  const double p1 = 1.0 - p0;
  std::vector<int> guesses;
  guesses.reserve(public_records.size());
  for (const PublicRecord& rec : public_records) {
    const BitChannel ch = rcv.channel(rec.basis);
    double score0;
    double score1;
    if (resolution_ps) {
      const double half = 0.5 * *resolution_ps;
      score0 = p0 * integrate_density(ch.d0(), rec.timestamp_ps - half,
                                      rec.timestamp_ps + half);
      score1 = p1 * integrate_density(ch.d1(), rec.timestamp_ps - half,
                                      rec.timestamp_ps + half);
    } else {
      score0 = p0 * density(ch.d0(), rec.timestamp_ps);
      score1 = p1 * density(ch.d1(), rec.timestamp_ps);
    }
    guesses.push_back(score1 > score0 ? 1 : 0);
  }
  return guesses;
}

AttackOutcome attack_report(std::span<const EventRecord> events,
                            std::span<const int> guesses, const ReceiverModel& rcv,
                            std::optional<double> resolution_ps) {
  if (events.size() != guesses.size())
    throw ArgumentError("attack_report: " + std::to_string(events.size()) +
                        " events vs " + std::to_string(guesses.size()) + " guesses");
  AttackOutcome outcome;
  outcome.n_events = events.size();
  double joint[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  for (std::size_t i = 0; i < events.size(); ++i) {
    const int x = events[i].secret_bit;
    const int y = guesses[i] ? 1 : 0;
    joint[x][y] += 1.0;
    if (x == y) ++outcome.n_correct;
  }
  if (outcome.n_events > 0) {
    const double n = static_cast<double>(outcome.n_events);
    for (auto& r : joint)
      for (double& c : r) c /= n;
    outcome.empirical_success = static_cast<double>(outcome.n_correct) / n;
    outcome.empirical_mi_bits = confusion_mi_bits(joint);
  }

  double analytic = 0.0;
  for (Basis basis : {Basis::A, Basis::B}) {
    const BitChannel ch = rcv.channel(basis);
    if (resolution_ps) {
      // round-to-nearest quantization = bins centered on the multiples
      analytic += binned_mutual_information(ch, *resolution_ps, 0.5 * *resolution_ps);
    } else {
      analytic += mutual_information(ch);
    }
  }
  outcome.analytic_mi_bits = 0.5 * analytic;
  return outcome;
}

}  // namespace timeleak
