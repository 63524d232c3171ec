#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "gapscan/eva/gap.hpp"

// Report JSON schema (schema_version 1) and CSV layouts are documented in docs/report_format.md.
namespace gapscan::eva {

inline constexpr int kReportSchemaVersion = 1;

// Shortest text that round-trips the double; identical values always print identically.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json to_json(const GapReport& r) {
  using nlohmann::json;
  json labels = json::array();
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    const LabelGap& g = r.details[i];
    json classes = json::array();
    for (const ClassGap& c : g.classes) {
      json peaks = json::array();
      for (const SamplePeak& s : c.samples) {
        peaks.push_back({{"sample", s.index},
                         {"peak", s.peak},
                         {"converged", s.converged},
                         {"stop_reason", blackbox::to_string(s.stop_reason)},
                         {"queries", s.queries}});
      }
      classes.push_back({{"source", c.source},
                         {"max_peak", c.max_peak},
                         {"argmax_sample", c.argmax ? json(*c.argmax) : json(nullptr)},
                         {"partial", c.partial},
                         {"queries", c.queries},
                         {"samples", std::move(peaks)}});
    }
    const bool infected = std::find(r.infected.begin(), r.infected.end(), r.labels[i]) != r.infected.end();
    labels.push_back({{"label", r.labels[i]},
                      {"score", r.scores[i]},
                      {"anomaly_index", r.anomaly_indices[i]},
                      {"infected", infected},
                      {"partial", g.partial},
                      {"queries", g.queries},
                      {"classes", std::move(classes)}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"verdict", r.infected.empty() ? "benign" : "infected"},
          {"tau", r.tau},
          {"infected_labels", r.infected},
          {"low_confidence", r.low_confidence},
          {"total_queries", r.total_queries},
          {"labels", std::move(labels)}};
}

// label,score,anomaly_index,infected,partial,queries
inline std::string scores_csv(const GapReport& r) {
  std::ostringstream os;
  os << "label,score,anomaly_index,infected,partial,queries\n";
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    const bool infected = std::find(r.infected.begin(), r.infected.end(), r.labels[i]) != r.infected.end();
    os << r.labels[i] << ',' << format_real(r.scores[i]) << ',' << format_real(r.anomaly_indices[i]) << ','
       << (infected ? 1 : 0) << ',' << (r.details[i].partial ? 1 : 0) << ',' << r.details[i].queries << '\n';
  }
  return os.str();
}

// One line per image row, comma-separated values; expects a single-channel map.
inline std::string heatmap_csv(const Tensor& heat) {
  std::ostringstream os;
  const Shape s = heat.shape();
  for (std::size_t row = 0; row < s.height; ++row) {
    for (std::size_t col = 0; col < s.width; ++col) {
      if (col) os << ',';
      double v = 0.0;
      for (std::size_t ch = 0; ch < s.channels; ++ch) v += heat.at(row, col, ch);
      os << format_real(v);
    }
    os << '\n';
  }
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

}  // namespace gapscan::eva
