#include "timeleak/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace timeleak {

namespace {

using nlohmann::json;

std::string fmt(double value, int significant) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant, value);
  return buf;
}

std::string fmt_full(double value) { return fmt(value, 17); }

std::string trimmed(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double_strict(const std::string& text, const std::string& where) {
  const std::string t = trimmed(text);
  if (t.empty()) throw DataError(where + ": empty number");
  std::size_t used = 0;
  double value;
  try {
    value = std::stod(t, &used);
  } catch (const std::exception&) {
    throw DataError(where + ": not a number: '" + t + "'");
  }
  if (used != t.size()) throw DataError(where + ": trailing characters in '" + t + "'");
  if (!std::isfinite(value)) throw DataError(where + ": non-finite value");
  return value;
}

std::uint64_t parse_count_strict(const std::string& text, const std::string& where) {
  const std::string t = trimmed(text);
  if (t.empty()) throw DataError(where + ": empty count");
  for (char c : t)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw DataError(where + ": count must be a non-negative integer, got '" + t + "'");
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    throw DataError(where + ": count out of range: '" + t + "'");
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == sep) {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

// Reads a line and strips a trailing '\r' so CRLF files parse.
bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

Basis parse_basis(const std::string& text, const std::string& where) {
  const std::string t = trimmed(text);
  if (t == "A") return Basis::A;
  if (t == "B") return Basis::B;
  throw DataError(where + ": basis must be A or B, got '" + t + "'");
}

const json& require_key(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw DataError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(path + "." + key + ": missing");
  return *it;
}

double require_number(const json& obj, const char* key, const std::string& path) {
  const json& v = require_key(obj, key, path);
  if (!v.is_number()) throw DataError(path + "." + key + ": expected a number");
  return v.get<double>();
}

}  // namespace

double parse_time_ps(const std::string& text) {
  std::string t = trimmed(text);
  double scale = 1.0;
  if (t.size() >= 2) {
    const std::string suffix = t.substr(t.size() - 2);
    if (suffix == "ns") {
      scale = 1000.0;
      t = trimmed(t.substr(0, t.size() - 2));
    } else if (suffix == "ps") {
      t = trimmed(t.substr(0, t.size() - 2));
    }
  }
  std::size_t used = 0;
  double value;
  try {
    value = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ArgumentError("invalid time value '" + text + "' (expected e.g. 500, 150ps, 0.5ns)");
  }
  if (used != t.size() || !std::isfinite(value))
    throw ArgumentError("invalid time value '" + text + "' (expected e.g. 500, 150ps, 0.5ns)");
  return value * scale;
}

ReceiverModel parse_receiver_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("receiver config: ") + e.what());
  }
  const json& dets = require_key(doc, "detectors", "receiver");
  if (!dets.is_array() || dets.size() != 4)
    throw DataError("receiver.detectors: expected an array of exactly 4 entries");

  double prior = 0.5;
  if (doc.contains("prior_bit0")) {
    prior = require_number(doc, "prior_bit0", "receiver");
    if (!(prior > 0.0 && prior < 1.0))
      throw ArgumentError("receiver.prior_bit0: must lie strictly in (0, 1)");
  }

  std::vector<DetectorResponse> responses;
  std::array<Basis, 4> basis_of{};
  std::array<int, 4> bit_of{};
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string path = "receiver.detectors[" + std::to_string(i) + "]";
    const json& d = dets[i];
    const double t0 = require_number(d, "t0_ps", path);
    const double tau_e = require_number(d, "tau_e_ps", path);
    const double tau_g = require_number(d, "tau_g_ps", path);
    if (!(tau_e > 0.0)) throw ArgumentError(path + ".tau_e_ps: must be > 0");
    if (!(tau_g > 0.0)) throw ArgumentError(path + ".tau_g_ps: must be > 0");
    const json& basis = require_key(d, "basis", path);
    if (!basis.is_string() ||
        (basis.get<std::string>() != "A" && basis.get<std::string>() != "B"))
      throw DataError(path + ".basis: expected \"A\" or \"B\"");
    const json& bit = require_key(d, "bit", path);
    if (!bit.is_number_integer() || (bit.get<int>() != 0 && bit.get<int>() != 1))
      throw DataError(path + ".bit: expected 0 or 1");
    responses.emplace_back(t0, tau_e, tau_g);
    basis_of[i] = basis.get<std::string>() == "A" ? Basis::A : Basis::B;
    bit_of[i] = bit.get<int>();
  }
  return ReceiverModel({responses[0], responses[1], responses[2], responses[3]},
                       basis_of, bit_of, prior);
}

ReceiverModel load_receiver_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open receiver config: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_receiver_config(buf.str());
}

std::string receiver_config_to_json(const ReceiverModel& rcv) {
  json doc;
  doc["prior_bit0"] = rcv.prior();
  doc["detectors"] = json::array();
  for (int id = 1; id <= 4; ++id) {
    const DetectorResponse& d = rcv.detector(id);
    doc["detectors"].push_back(
        {{"t0_ps", d.t0()},
         {"tau_e_ps", d.tau_e()},
         {"tau_g_ps", d.tau_g()},
         {"basis", std::string(1, basis_label(rcv.basis_of(id)))},
         {"bit", rcv.bit_of(id)}});
  }
  return doc.dump(2) + "\n";
}

TimingHistogram parse_histogram_csv(std::istream& in) {
  std::string line;
  if (!read_line(in, line)) throw DataError("line 1: empty histogram file");
  if (trimmed(line) != "time_ps,count")
    throw DataError("line 1: expected header 'time_ps,count', got '" + trimmed(line) + "'");

  std::vector<double> edges;
  std::vector<std::uint64_t> counts;
  std::size_t line_no = 1;
  while (read_line(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != 2) throw DataError(where + ": expected 2 fields, got " +
                                            std::to_string(fields.size()));
    edges.push_back(parse_double_strict(fields[0], where));
    counts.push_back(parse_count_strict(fields[1], where));
  }
  if (edges.size() < 3) throw DataError("histogram needs at least 3 bins, got " +
                                        std::to_string(edges.size()));
  const double width = edges[1] - edges[0];
  if (!(width > 0.0)) throw DataError("line 3: bin edges must be strictly increasing");
  for (std::size_t i = 1; i + 1 < edges.size(); ++i) {
    const double step = edges[i + 1] - edges[i];
    if (std::abs(step - width) > 1e-6 * std::abs(width))
      throw DataError("line " + std::to_string(i + 3) +
                      ": non-uniform bin spacing (" + fmt(step, 12) + " vs " +
                      fmt(width, 12) + ")");
  }
  return TimingHistogram(edges[0], width, std::move(counts));
}

TimingHistogram load_histogram_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open histogram: " + path.string());
  return parse_histogram_csv(in);
}

void write_histogram_csv(std::ostream& out, const TimingHistogram& hist) {
  out << "time_ps,count\n";
  for (std::size_t i = 0; i < hist.size(); ++i)
    out << fmt_full(hist.edge(i)) << ',' << hist.counts()[i] << '\n';
}

void write_events_csv(std::ostream& out, std::span<const EventRecord> events) {
  out << "detector,basis,bit,time_ps\n";
  for (const EventRecord& ev : events)
    out << ev.detector_id << ',' << basis_label(ev.basis) << ',' << ev.secret_bit
        << ',' << fmt_full(ev.timestamp_ps) << '\n';
}

std::vector<EventRecord> parse_events_csv(std::istream& in) {
  std::string line;
  if (!read_line(in, line)) throw DataError("line 1: empty events file");
  if (trimmed(line) != "detector,basis,bit,time_ps")
    throw DataError("line 1: expected header 'detector,basis,bit,time_ps'");
  std::vector<EventRecord> events;
  std::size_t line_no = 1;
  while (read_line(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != 4)
      throw DataError(where + ": expected 4 fields, got " + std::to_string(fields.size()));
    const double det = parse_double_strict(fields[0], where);
    if (det != 1.0 && det != 2.0 && det != 3.0 && det != 4.0)
      throw DataError(where + ": detector must be 1..4");
    const Basis basis = parse_basis(fields[1], where);
    const double bit = parse_double_strict(fields[2], where);
    if (bit != 0.0 && bit != 1.0) throw DataError(where + ": bit must be 0 or 1");
    const double t = parse_double_strict(fields[3], where);
    events.push_back({static_cast<int>(det), static_cast<int>(bit), basis, t});
  }
  return events;
}

void write_public_csv(std::ostream& out, std::span<const PublicRecord> records) {
  out << "basis,time_ps\n";
  for (const PublicRecord& rec : records)
    out << basis_label(rec.basis) << ',' << fmt_full(rec.timestamp_ps) << '\n';
}

std::vector<PublicRecord> parse_public_csv(std::istream& in) {
  std::string line;
  if (!read_line(in, line)) throw DataError("line 1: empty public file");
  if (trimmed(line) != "basis,time_ps")
    throw DataError("line 1: expected header 'basis,time_ps'");
  std::vector<PublicRecord> records;
  std::size_t line_no = 1;
  while (read_line(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != 2)
      throw DataError(where + ": expected 2 fields, got " + std::to_string(fields.size()));
    records.push_back({parse_basis(fields[0], where),
                       parse_double_strict(fields[1], where)});
  }
  return records;
}

std::string render_leakage_report(const LeakageReport& report, RenderFormat format) {
  if (format == RenderFormat::Structured) {
    json doc;
    doc["mi_continuous_bits"] = report.mi_continuous_bits;
    doc["mi_per_basis_bits"] = {{"A", report.mi_per_basis_bits[0]},
                                {"B", report.mi_per_basis_bits[1]}};
    json binned = json::object();
    for (const auto& [width, mi] : report.mi_binned_bits) binned[fmt(width, 12)] = mi;
    doc["mi_binned_bits"] = binned;
    doc["eve_map_success"] = report.eve_map_success;
    if (report.compensated_mi_bits)
      doc["compensated_mi_bits"] = *report.compensated_mi_bits;
    json grouping = json::object();
    for (int i = 0; i < 4; ++i)
      grouping[std::to_string(i + 1)] =
          std::string(1, basis_label(report.grouping_basis[static_cast<std::size_t>(i)])) +
          std::to_string(report.grouping_bit[static_cast<std::size_t>(i)]);
    doc["grouping"] = grouping;
    return doc.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "mi_continuous_bits: " << fmt(report.mi_continuous_bits, 6) << '\n';
  out << "mi_basis_A_bits: " << fmt(report.mi_per_basis_bits[0], 6) << '\n';
  out << "mi_basis_B_bits: " << fmt(report.mi_per_basis_bits[1], 6) << '\n';
  for (const auto& [width, mi] : report.mi_binned_bits)
    out << "mi_binned_bits[" << fmt(width, 12) << "]: " << fmt(mi, 6) << '\n';
  out << "eve_map_success: " << fmt(report.eve_map_success, 6) << '\n';
  if (report.compensated_mi_bits)
    out << "compensated_mi_bits: " << fmt(*report.compensated_mi_bits, 6) << '\n';
  out << "grouping:";
  for (int i = 0; i < 4; ++i)
    out << ' ' << (i + 1) << '='
        << basis_label(report.grouping_basis[static_cast<std::size_t>(i)])
        << report.grouping_bit[static_cast<std::size_t>(i)];
  out << '\n';
  return out.str();
}

std::string render_fit_result(const FitResult& fit, RenderFormat format) {
  if (format == RenderFormat::Structured) {
    json doc;
    doc["params"] = {{"t0_ps", fit.params.t0()},
                     {"tau_e_ps", fit.params.tau_e()},
                     {"tau_g_ps", fit.params.tau_g()}};
    doc["std_errors_ps"] = {{"t0_ps", fit.std_errors[0]},
                            {"tau_e_ps", fit.std_errors[1]},
                            {"tau_g_ps", fit.std_errors[2]}};
    doc["chi2_per_dof"] = fit.chi2_per_dof;
    doc["n_iterations"] = fit.n_iterations;
    doc["converged"] = fit.converged;
    doc["log_likelihood"] = fit.log_likelihood;
    if (fit.background_fraction) doc["background_fraction"] = *fit.background_fraction;
    return doc.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "t0_ps: " << fmt(fit.params.t0(), 6) << '\n';
  out << "tau_e_ps: " << fmt(fit.params.tau_e(), 6) << '\n';
  out << "tau_g_ps: " << fmt(fit.params.tau_g(), 6) << '\n';
  out << "std_error_t0_ps: " << fmt(fit.std_errors[0], 6) << '\n';
  out << "std_error_tau_e_ps: " << fmt(fit.std_errors[1], 6) << '\n';
  out << "std_error_tau_g_ps: " << fmt(fit.std_errors[2], 6) << '\n';
  out << "chi2_per_dof: " << fmt(fit.chi2_per_dof, 6) << '\n';
  out << "n_iterations: " << fit.n_iterations << '\n';
  out << "converged: " << (fit.converged ? "true" : "false") << '\n';
  out << "log_likelihood: " << fmt(fit.log_likelihood, 10) << '\n';
  if (fit.background_fraction)
    out << "background_fraction: " << fmt(*fit.background_fraction, 6) << '\n';
  return out.str();
}

std::string render_attack_outcome(const AttackOutcome& outcome, RenderFormat format) {
  if (format == RenderFormat::Structured) {
    json doc;
    doc["n_events"] = outcome.n_events;
    doc["n_correct"] = outcome.n_correct;
    doc["empirical_success"] = outcome.empirical_success;
    doc["empirical_mi_bits"] = outcome.empirical_mi_bits;
    doc["analytic_mi_bits"] = outcome.analytic_mi_bits;
    return doc.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "n_events: " << outcome.n_events << '\n';
  out << "n_correct: " << outcome.n_correct << '\n';
  out << "empirical_success: " << fmt(outcome.empirical_success, 6) << '\n';
  out << "empirical_mi_bits: " << fmt(outcome.empirical_mi_bits, 6) << '\n';
  out << "analytic_mi_bits: " << fmt(outcome.analytic_mi_bits, 6) << '\n';
  return out.str();
}

std::string render_sweep(const SweepResult& sweep, RenderFormat format) {
  if (format == RenderFormat::Structured) {
    json doc;
    doc["delta_t0_ps"] = sweep.delta_t0_ps;
    doc["mi_continuous_bits"] = sweep.continuous_bits;
    json binned = json::object();
    for (std::size_t w = 0; w < sweep.bin_widths_ps.size(); ++w)
      binned[fmt(sweep.bin_widths_ps[w], 12)] = sweep.binned_bits[w];
    doc["mi_binned_bits"] = binned;
    return doc.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "delay_ps\tmi_continuous_bits";
  for (double w : sweep.bin_widths_ps) out << "\tmi_bin" << fmt(w, 12) << "ps_bits";
  out << '\n';
  for (std::size_t i = 0; i < sweep.delta_t0_ps.size(); ++i) {
    out << fmt_full(sweep.delta_t0_ps[i]) << '\t' << fmt_full(sweep.continuous_bits[i]);
    for (std::size_t w = 0; w < sweep.bin_widths_ps.size(); ++w)
      out << '\t' << fmt_full(sweep.binned_bits[w][i]);
    out << '\n';
  }
  return out.str();
}

}  // namespace timeleak
