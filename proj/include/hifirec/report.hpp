// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Plain-text tables from JSON-lines run outputs.
//
//   overall   one row per record: HR/NDCG at 10, 50, 100
//   ablation  one row per variant with the W/P/F-NB and U/I-NS markers
//             followed by HR@100 and NDCG@100

#pragma once

#include "hifirec/config.hpp"
#include "hifirec/io.hpp"

#include <iomanip>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

namespace hifirec {

enum class ReportStyle { kOverall, kAblation };

inline ReportStyle parse_report_style(const std::string& s) {
  const std::string v = to_lower(s);
  if (v == "overall") return ReportStyle::kOverall;
  if (v == "ablation") return ReportStyle::kAblation;
  throw ConfigError("unknown report style '" + s + "'");
}

// Records carrying a `metrics` object; other lines (epoch logs) are skipped.
inline std::vector<json> read_metric_records(std::istream& in) {
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw ParseError("report: invalid JSON", line_no);
    }
    if (j.contains("metrics") && j["metrics"].is_object()) out.push_back(std::move(j));
  }
  return out;
}

namespace detail {

inline std::string record_label(const json& j, std::size_t index) {
  for (const char* key : {"variant", "name", "label"})
    if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
  if (j.contains("C") && j.contains("x"))
    return "C=" + format_double(j["C"].get<double>()) + " x=" + format_double(j["x"].get<double>());
  if (j.contains("reference")) return "ref=" + j["reference"].get<std::string>();
  return "run" + std::to_string(index + 1);
}

inline std::string metric_cell(const json& metrics, const std::string& key) {
  if (!metrics.contains(key)) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << metrics[key].get<double>();
  return s.str();
}

inline std::string render(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out << "  ";
      if (c == 0) out << std::left;
      else out << std::right;
      out << std::setw(static_cast<int>(width[c])) << cells[c];
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

}  // namespace detail

inline std::string render_report(const std::vector<json>& records, ReportStyle style) {
  std::vector<std::vector<std::string>> rows;
  if (style == ReportStyle::kOverall) {
    const std::vector<std::string> keys{"HR@10", "NDCG@10", "HR@50", "NDCG@50", "HR@100", "NDCG@100"};
    std::vector<std::string> header{"Method"};
    header.insert(header.end(), keys.begin(), keys.end());
    for (std::size_t i = 0; i < records.size(); ++i) {
      std::vector<std::string> row{detail::record_label(records[i], i)};
      for (const auto& k : keys) row.push_back(detail::metric_cell(records[i]["metrics"], k));
      rows.push_back(std::move(row));
    }
    return detail::render(header, rows);
  }
  const std::vector<std::string> header{"Variant", "W-NB", "P-NB", "F-NB", "U-NS", "I-NS", "HR@100", "NDCG@100"};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string label = detail::record_label(records[i], i);
    std::vector<std::string> row{label};
    VariantSpec spec;
    bool known = true;
    try {
      spec = parse_variant(label);
    } catch (const ConfigError&) {
      known = false;
    }
    auto mark = [&](bool on) { return known ? (on ? "*" : "o") : "?"; };
    row.push_back(mark(spec.neighborhood == NeighborhoodMode::kWithout));
    row.push_back(mark(spec.neighborhood == NeighborhoodMode::kPartial));
    row.push_back(mark(spec.neighborhood == NeighborhoodMode::kFull));
    row.push_back(mark(spec.sampling == SamplingMode::kUniform));
    row.push_back(mark(spec.sampling == SamplingMode::kIntensity));
    row.push_back(detail::metric_cell(records[i]["metrics"], "HR@100"));
    row.push_back(detail::metric_cell(records[i]["metrics"], "NDCG@100"));
    rows.push_back(std::move(row));
  }
  return detail::render(header, rows);
}

}  // namespace hifirec
