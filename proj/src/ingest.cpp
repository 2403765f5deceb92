#include "tke/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "tke/error.hpp"

namespace tke {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool is_skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

double parse_number(std::string_view cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(value)) {
    throw Error(ErrorCode::parse, "row " + std::to_string(row) + ", column " + column + ": cannot parse '" +
                                      std::string(cell) + "' as a number");
  }
  return value;
}

// Shortest %g form that reads back to v.
std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::pre_burn: return "pre-burn";
    case Phase::burn: return "burn";
    case Phase::post_burn: return "post-burn";
  }
  return "unknown";
}

void PhaseSegmentation::validate() const {
  if (!(std::isfinite(burn_start_s) && std::isfinite(burn_end_s) && burn_start_s < burn_end_s)) {
    throw Error(ErrorCode::parameter, "burn_start_s must be less than burn_end_s (got " + format_double(burn_start_s) +
                                          ", " + format_double(burn_end_s) + ")");
  }
}

Phase PhaseSegmentation::label(double time_s) const {
  if (time_s < burn_start_s) return Phase::pre_burn;
  if (time_s > burn_end_s) return Phase::post_burn;
  return Phase::burn;
}

PhaseSegmentation segmentation_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("burn_start_s") || !j.contains("burn_end_s")) {
    throw Error(ErrorCode::schema, "segmentation must be an object with burn_start_s and burn_end_s");
  }
  PhaseSegmentation seg;
  try {
    seg.burn_start_s = j.at("burn_start_s").get<double>();
    seg.burn_end_s = j.at("burn_end_s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, std::string("segmentation: ") + e.what());
  }
  seg.validate();
  return seg;
}

PhaseSegmentation load_segmentation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open segmentation file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
  return segmentation_from_json(j);
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> columns{"time_s", "u_ms", "v_ms", "w_ms", "sonic_T_C", "T1_C", "T2_C",
                                                "T3_C",   "T4_C", "T5_C", "T6_C", "T7_C"};
  return columns;
}

ClusterDataset read_csv(std::istream& in, const std::string& name, const std::string& source) {
  const auto& columns = csv_columns();
  std::string line;
  std::size_t line_no = 0;

  bool have_header = false;
  std::vector<std::size_t> position(columns.size());
  std::size_t field_count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_skippable(line)) continue;
    const auto header = split_fields(line);
    field_count = header.size();
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index.emplace(header[i], i);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto it = index.find(columns[c]);
      if (it == index.end()) throw Error(ErrorCode::schema, source + ": missing column " + columns[c]);
      position[c] = it->second;
    }
    have_header = true;
    break;
  }
  if (!have_header) throw Error(ErrorCode::schema, source + ": no header row");

  ClusterDataset ds;
  ds.name = name;
  std::size_t row = 0;
  std::array<double, 12> values{};
  while (std::getline(in, line)) {
    ++line_no;
    if (is_skippable(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != field_count) {
      throw Error(ErrorCode::parse, source + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                                        ") has " + std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(field_count));
    }
    for (std::size_t c = 0; c < columns.size(); ++c) values[c] = parse_number(fields[position[c]], row, columns[c]);
    SampleRecord r;
    r.time_s = values[0];
    r.u_ms = values[1];
    r.v_ms = values[2];
    r.w_ms = values[3];
    r.sonic_T_C = values[4];
    std::copy(values.begin() + 5, values.end(), r.T_C.begin());
    ds.records.push_back(r);
    ++row;
  }
  ds.provenance.push_back({source, ds.records.size()});
  validate_cadence(ds);
  return ds;
}

ClusterDataset parse_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return read_csv(in, path.stem().string(), path.filename().string());
}

void write_csv(std::ostream& out, const ClusterDataset& ds) {
  const auto& columns = csv_columns();
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& r : ds.records) {
    out << format_double(r.time_s) << ',' << format_double(r.u_ms) << ',' << format_double(r.v_ms) << ','
        << format_double(r.w_ms) << ',' << format_double(r.sonic_T_C);
    for (double t : r.T_C) out << ',' << format_double(t);
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const ClusterDataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  write_csv(out, ds);
}

void validate_cadence(const ClusterDataset& ds) {
  std::size_t begin = 0;
  auto check_block = [&](std::size_t first, std::size_t last) {
    for (std::size_t i = first + 1; i < last; ++i) {
      const double gap = ds.records[i].time_s - ds.records[i - 1].time_s;
      if (!(std::abs(gap - kSamplePeriodS) <= kCadenceToleranceS)) {
        throw Error(ErrorCode::cadence, ds.name + ": gap of " + format_double(gap) + " s before t = " +
                                            format_double(ds.records[i].time_s) + " (record " + std::to_string(i) + ")");
      }
    }
  };
  if (ds.provenance.empty()) {
    check_block(0, ds.records.size());
    return;
  }
  for (const auto& seg : ds.provenance) {
    check_block(begin, begin + seg.count);
    begin += seg.count;
  }
}

ClusterDataset segment_phases(const ClusterDataset& ds, const PhaseSegmentation& seg, Phase phase) {
  seg.validate();
  ClusterDataset out;
  out.name = ds.name;
  out.phase = phase;
  std::size_t begin = 0;
  auto take = [&](const std::string& source, std::size_t first, std::size_t last) {
    std::size_t kept = 0;
    for (std::size_t i = first; i < last; ++i) {
      if (seg.label(ds.records[i].time_s) == phase) {
        out.records.push_back(ds.records[i]);
        ++kept;
      }
    }
    if (kept > 0) out.provenance.push_back({source, kept});
  };
  if (ds.provenance.empty()) {
    take(ds.name, 0, ds.records.size());
  } else {
    for (const auto& src : ds.provenance) {
      take(src.source, begin, begin + src.count);
      begin += src.count;
    }
  }
  if (out.records.empty()) {
    throw Error(ErrorCode::empty_phase, ds.name + ": no records in " + std::string(to_string(phase)) + " window [" +
                                            format_double(seg.burn_start_s) + ", " + format_double(seg.burn_end_s) + "]");
  }
  return out;
}

ClusterDataset clamp_outliers(const ClusterDataset& ds, double lo_C, double hi_C) {
  if (!(lo_C < hi_C)) throw Error(ErrorCode::parameter, "clamp bounds must satisfy lo < hi");
  ClusterDataset out = ds;
  for (auto& r : out.records) {
    for (double& t : r.T_C) t = std::min(hi_C, std::max(lo_C, t));
  }
  return out;
}

ClusterDataset merge_clusters(const ClusterDataset& a, const ClusterDataset& b) {
  if (!a.empty() && !b.empty() && a.phase != b.phase) {
    auto describe = [](const ClusterDataset& d) {
      return d.phase ? std::string(to_string(*d.phase)) : std::string("unsegmented");
    };
    throw Error(ErrorCode::merge, "cannot merge " + a.name + " (" + describe(a) + ") with " + b.name + " (" +
                                      describe(b) + ")");
  }
  ClusterDataset out;
  out.name = a.name + b.name;
  out.phase = a.empty() ? b.phase : a.phase;
  out.records.reserve(a.size() + b.size());
  out.records.insert(out.records.end(), a.records.begin(), a.records.end());
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());
  for (const auto* d : {&a, &b}) {
    for (const auto& seg : d->provenance) {
      if (seg.count > 0) out.provenance.push_back(seg);
    }
    if (d->provenance.empty() && !d->empty()) out.provenance.push_back({d->name, d->size()});
  }
  return out;
}

}  // namespace tke
