#pragma once

// Machine-readable outputs: report.json, eao_curve.csv, train_history.csv.

#include <cstdio>
#include <string>

#include <nlohmann/json.hpp>

#include "cltrack/protocol.hpp"
#include "cltrack/tracker/train.hpp"

namespace cltrack {

inline constexpr int kReportVersion = 1;

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_sequence.size(); ++i) {
    const auto& s = r.per_sequence[i];
    nlohmann::json status = nlohmann::json::array();
    if (i < r.traces.size())
      for (const auto& o : r.traces[i].outcomes) status.push_back(to_string(o.status));
    per.push_back({{"id", s.id},
                   {"n_frames", s.n_frames},
                   {"n_fails", s.n_fails},
                   {"n_tracked", s.n_tracked},
                   {"accuracy", detail::optional_number(s.accuracy)},
                   {"robustness", s.robustness},
                   {"status", std::move(status)}});
  }
  return {{"version", kReportVersion},
          {"accuracy", detail::optional_number(r.accuracy)},
          {"robustness", r.robustness},
          {"eao", r.eao},
          {"eao_interval", {r.eao_lo, r.eao_hi}},
          {"per_sequence", std::move(per)}};
}

inline std::string report_text(const EvalReport& r) { return report_json(r).dump(2) + "\n"; }

inline std::string eao_curve_csv(const std::vector<EaoPoint>& curve) {
  std::string out = "N,phi\n";
  for (const auto& p : curve) out += std::to_string(p.n) + "," + detail::format_double(p.phi) + "\n";
  return out;
}

inline std::string train_history_csv(const TrainHistory& h) {
  std::string out = "step,area,angle,arc,total,lr\n";
  for (const auto& s : h.steps) {
    out += std::to_string(s.step);
    for (double v : {s.loss.area, s.loss.angle, s.loss.arc, s.loss.total, s.lr}) out += "," + detail::format_double(v);
    out += "\n";
  }
  return out;
}

}  // namespace cltrack
