#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmn/data.hpp"
#include "dmn/model.hpp"

namespace dmn {

// Machine-readable attention trace for one story (schema version 1):
//   {facts:[string], question:string, answer:[string],
//    passes:[[number]], chosen:[int], stop_pass:int}
// Gate values carry 4 decimals; `chosen` holds 0-based slot indices where a
// value of facts.size() names the end-of-passes slot; stop_pass is the
// 1-based pass that picked it, or 0 when iteration ran to its limit.
struct TraceRecord {
  std::vector<std::string> facts;
  std::string question;
  std::vector<std::string> answer;
  std::vector<std::vector<double>> passes;
  std::vector<int> chosen;
  int stop_pass = 0;
};

inline double round4(double v) { return std::round(v * 10000.0) / 10000.0; }

inline TraceRecord make_trace_record(const Story& story,
                                     const std::vector<std::string>& answer,
                                     const GateTrace& trace) {
  TraceRecord rec;
  for (const auto& f : story.facts) rec.facts.push_back(join(f.tokens));
  rec.question = join(story.question);
  rec.answer = answer;
  for (const auto& pass : trace.passes) {
    std::vector<double> row;
    row.reserve(pass.gates.size());
    for (double gv : pass.gates) row.push_back(round4(gv));
    rec.passes.push_back(std::move(row));
    rec.chosen.push_back(int(pass.chosen));
  }
  rec.stop_pass = int(trace.stop_pass);
  return rec;
}

inline nlohmann::json trace_to_json(const TraceRecord& rec) {
  return {
      {"version", 1},      {"facts", rec.facts},   {"question", rec.question},
      {"answer", rec.answer}, {"passes", rec.passes}, {"chosen", rec.chosen},
      {"stop_pass", rec.stop_pass},
  };
}

// Five shading buckets; gates under 0.01 stay blank.
inline const char* gate_glyph(double v) {
  if (v < 0.01) return " ";
  if (v < 0.25) return "░";  // light shade
  if (v < 0.50) return "▒";  // medium shade
  if (v < 0.75) return "▓";  // dark shade
  return "█";                // full block
}

// Monospaced heatmap: one row per pass, one column per fact, darker cells
// for higher gates; a trailing column shows the end-of-passes slot.
inline std::string render_heatmap(const TraceRecord& rec) {
  std::string out;
  for (std::size_t i = 0; i < rec.facts.size(); ++i) {
    out += "  " + std::to_string(i + 1) + ": " + rec.facts[i] + "\n";
  }
  out += "  Q: " + rec.question + "\n";
  out += "  A: " + join(rec.answer) + "\n";
  for (std::size_t i = 0; i < rec.passes.size(); ++i) {
    out += "  pass " + std::to_string(i + 1) + " |";
    for (double gv : rec.passes[i]) out += gate_glyph(gv);
    out += "|";
    const std::size_t chosen = std::size_t(rec.chosen[i]);
    if (chosen >= rec.facts.size()) {
      out += " -> stop";
    } else {
      out += " -> fact " + std::to_string(chosen + 1);
    }
    out += "\n";
  }
  return out;
}

}  // namespace dmn
