#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "timeleak/io.hpp"

namespace {

using namespace timeleak;

constexpr int kExitOk = 0;
constexpr int kExitArgument = 2;
constexpr int kExitData = 3;
constexpr int kExitNoConvergence = 4;

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string output;
  std::string format = "text";

  RenderFormat render_format() const {
    return format == "structured" ? RenderFormat::Structured : RenderFormat::Text;
  }
};

void emit(const GlobalOptions& global, const std::string& text) {
  if (global.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(global.output);
  if (!out) throw DataError("cannot open output file: " + global.output);
  out << text;
}

std::vector<double> parse_width_list(const std::vector<std::string>& items) {
  std::vector<double> widths;
  for (const std::string& item : items) {
    std::stringstream ss(item);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
      if (piece.empty()) continue;
      const double w = parse_time_ps(piece);
      if (!(w > 0.0)) throw ArgumentError("bin width must be > 0, got '" + piece + "'");
      widths.push_back(w);
    }
  }
  return widths;
}

// "LO:HI:STEP" with ps/ns suffixes allowed per component, HI inclusive.
std::vector<double> parse_delay_range(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string piece;
  while (std::getline(ss, piece, ':')) parts.push_back(piece);
  if (parts.size() != 3)
    throw ArgumentError("--delays expects LO:HI:STEP, got '" + spec + "'");
  const double lo = parse_time_ps(parts[0]);
  const double hi = parse_time_ps(parts[1]);
  const double step = parse_time_ps(parts[2]);
  if (!(step > 0.0)) throw ArgumentError("--delays step must be > 0");
  if (hi < lo) throw ArgumentError("--delays range is empty (HI < LO)");
  const auto count =
      static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  if (count < 2) return {lo};
  TimeGrid grid(lo, step, count);
  std::vector<double> delays;
  for (std::size_t k = 0; k < grid.count; ++k) delays.push_back(grid.point(k));
  return delays;
}

int run_fit(const GlobalOptions& global, const std::string& hist_path,
            bool background, std::uint64_t min_events,
            const std::optional<double>& guess_t0,
            const std::optional<double>& guess_tau_e,
            const std::optional<double>& guess_tau_g) {
  const TimingHistogram hist = load_histogram_csv(hist_path);
  FitOptions options;
  options.uniform_background = background;
  options.min_events = min_events;
  if (guess_t0 || guess_tau_e || guess_tau_g) {
    const DetectorResponse seed = initial_guess(hist);
    options.guess = DetectorResponse(guess_t0.value_or(seed.t0()),
                                     guess_tau_e.value_or(seed.tau_e()),
                                     guess_tau_g.value_or(seed.tau_g()));
  }
  const FitResult fit = fit_response(hist, options);
  emit(global, render_fit_result(fit, global.render_format()));
  return fit.converged ? kExitOk : kExitNoConvergence;
}

int run_leak(const GlobalOptions& global, const std::string& config_path,
             const std::vector<double>& bin_widths, std::size_t phases,
             bool compensate) {
  const ReceiverModel rcv = load_receiver_config(config_path);
  LeakageReport report = average_leakage(rcv);
  for (double width : bin_widths) {
    double sum = 0.0;
    for (Basis basis : {Basis::A, Basis::B})
      sum += binned_mutual_information_phase_averaged(rcv.channel(basis), width, phases);
    report.mi_binned_bits[width] = 0.5 * sum;
  }
  if (compensate) report.compensated_mi_bits = compensated_leakage(rcv);
  emit(global, render_leakage_report(report, global.render_format()));
  return kExitOk;
}

int run_sweep(const GlobalOptions& global, double tau_e, double tau_g,
              const std::string& delay_spec, const std::vector<double>& bin_widths,
              std::size_t phases) {
  const std::vector<double> delays = parse_delay_range(delay_spec);
  const SweepResult sweep = delay_sweep(tau_e, tau_g, delays, bin_widths, phases);
  emit(global, render_sweep(sweep, global.render_format()));
  return kExitOk;
}

int run_simulate(const GlobalOptions& global, const std::string& config_path,
                 std::size_t n, const std::optional<double>& resolution,
                 const std::string& events_path, const std::string& public_path) {
  const ReceiverModel rcv = load_receiver_config(config_path);
  const std::vector<EventRecord> events = simulate_session(rcv, n, global.seed);
  const std::vector<PublicRecord> records = publish(events, resolution);
  {
    std::ofstream out(events_path);
    if (!out) throw DataError("cannot open output file: " + events_path);
    write_events_csv(out, events);
  }
  {
    std::ofstream out(public_path);
    if (!out) throw DataError("cannot open output file: " + public_path);
    write_public_csv(out, records);
  }
  std::map<int, std::size_t> per_detector{{1, 0}, {2, 0}, {3, 0}, {4, 0}};
  for (const EventRecord& ev : events) ++per_detector[ev.detector_id];
  std::ostringstream summary;
  for (const auto& [id, count] : per_detector)
    summary << "detector_" << id << "_count: " << count << '\n';
  summary << "total: " << events.size() << '\n';
  std::cout << summary.str();
  return kExitOk;
}

int run_attack(const GlobalOptions& global, const std::string& public_path,
               const std::string& events_path, const std::string& config_path,
               const std::optional<double>& resolution) {
  const ReceiverModel rcv = load_receiver_config(config_path);
  std::ifstream public_in(public_path);
  if (!public_in) throw DataError("cannot open public records: " + public_path);
  const std::vector<PublicRecord> records = parse_public_csv(public_in);
  std::ifstream events_in(events_path);
  if (!events_in) throw DataError("cannot open events: " + events_path);
  const std::vector<EventRecord> events = parse_events_csv(events_in);
  const std::vector<int> guesses = eve_map_attack(records, rcv, resolution);
  const AttackOutcome outcome = attack_report(events, guesses, rcv, resolution);
  emit(global, render_attack_outcome(outcome, global.render_format()));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timing side-channel leakage analysis for QKD receivers"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "seed for randomized commands");
  app.add_option("--output", global.output, "write the report to this file");
  app.add_option("--format", global.format, "report format")
      ->check(CLI::IsMember({"text", "structured"}));

  // fit
  std::string fit_hist;
  bool fit_background = false;
  std::uint64_t fit_min_events = 1000;
  std::string fit_t0, fit_tau_e, fit_tau_g;
  CLI::App* fit = app.add_subcommand("fit", "fit a detector response to a histogram");
  fit->add_option("histogram", fit_hist, "histogram CSV (time_ps,count)")->required();
  fit->add_flag("--background", fit_background, "add a uniform background term");
  fit->add_option("--min-events", fit_min_events, "refuse fits below this total");
  fit->add_option("--guess-t0", fit_t0, "override the t0 seed (time)");
  fit->add_option("--guess-tau-e", fit_tau_e, "override the tau_e seed (time)");
  fit->add_option("--guess-tau-g", fit_tau_g, "override the tau_g seed (time)");

  // leak
  std::string leak_config;
  std::vector<std::string> leak_widths;
  std::size_t leak_phases = 16;
  bool leak_compensate = false;
  CLI::App* leak = app.add_subcommand("leak", "eavesdropper information for a receiver");
  leak->add_option("receiver", leak_config, "receiver config JSON")->required();
  leak->add_option("--bin-widths", leak_widths,
                   "comma-separated bin widths (times) for binned MI");
  leak->add_option("--phases", leak_phases, "bin phases to average over");
  leak->add_flag("--compensate", leak_compensate,
                 "also report leakage with equalized offsets");

  // sweep
  std::string sweep_tau_e, sweep_tau_g, sweep_delays;
  std::vector<std::string> sweep_widths;
  std::size_t sweep_phases = 16;
  CLI::App* sweep = app.add_subcommand("sweep", "MI vs delay for identical shapes");
  sweep->add_option("--tau-e", sweep_tau_e, "exponential constant (time)")->required();
  sweep->add_option("--tau-g", sweep_tau_g, "Gaussian constant (time)")->required();
  sweep->add_option("--delays", sweep_delays, "delay range LO:HI:STEP")->required();
  sweep->add_option("--bin-widths", sweep_widths, "comma-separated bin widths (times)");
  sweep->add_option("--phases", sweep_phases, "bin phases to average over");

  // simulate
  std::string sim_config, sim_events_out = "events.csv", sim_public_out = "public.csv";
  std::size_t sim_n = 0;
  std::string sim_resolution;
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo detection session");
  simulate->add_option("receiver", sim_config, "receiver config JSON")->required();
  simulate->add_option("-n,--events", sim_n, "number of events")->required();
  simulate->add_option("--resolution", sim_resolution,
                       "quantize public timestamps to this resolution (time)");
  simulate->add_option("--events-out", sim_events_out, "events CSV path");
  simulate->add_option("--public-out", sim_public_out, "public records CSV path");

  // attack
  std::string atk_public, atk_events, atk_config, atk_resolution;
  CLI::App* attack = app.add_subcommand("attack", "MAP attack on public records");
  attack->add_option("public", atk_public, "public records CSV")->required();
  attack->add_option("events", atk_events, "ground-truth events CSV")->required();
  attack->add_option("receiver", atk_config, "receiver config JSON")->required();
  attack->add_option("--resolution", atk_resolution,
                     "declared timestamp resolution (time)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitArgument;
  }

  try {
    if (*fit) {
      auto opt_time = [](const std::string& s) -> std::optional<double> {
        if (s.empty()) return std::nullopt;
        return parse_time_ps(s);
      };
      return run_fit(global, fit_hist, fit_background, fit_min_events,
                     opt_time(fit_t0), opt_time(fit_tau_e), opt_time(fit_tau_g));
    }
    if (*leak)
      return run_leak(global, leak_config, parse_width_list(leak_widths),
                      leak_phases, leak_compensate);
    if (*sweep)
      return run_sweep(global, parse_time_ps(sweep_tau_e), parse_time_ps(sweep_tau_g),
                       sweep_delays, parse_width_list(sweep_widths), sweep_phases);
    if (*simulate) {
      if (sim_n < 1) throw ArgumentError("simulate: --events must be >= 1");
      std::optional<double> resolution;
      if (!sim_resolution.empty()) {
        resolution = parse_time_ps(sim_resolution);
        if (!(*resolution > 0.0)) throw ArgumentError("simulate: resolution must be > 0");
      }
      return run_simulate(global, sim_config, sim_n, resolution, sim_events_out,
                          sim_public_out);
    }
    if (*attack) {
      std::optional<double> resolution;
      if (!atk_resolution.empty()) {
        resolution = parse_time_ps(atk_resolution);
        if (!(*resolution > 0.0)) throw ArgumentError("attack: resolution must be > 0");
      }
      return run_attack(global, atk_public, atk_events, atk_config, resolution);
    }
  } catch (const InsufficientDataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitArgument;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
