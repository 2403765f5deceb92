#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tke {

inline constexpr std::size_t kThermocoupleCount = 7;

// Thermocouple mounting heights above the fuel bed, cm (T1..T7).
inline constexpr std::array<double, kThermocoupleCount> kThermocoupleHeightsCm{0, 5, 10, 20, 30, 50, 100};

inline constexpr double kSamplePeriodS = 0.1;
inline constexpr double kCadenceToleranceS = 1e-6;

// One 10 Hz observation.
struct SampleRecord {
  double time_s = 0.0;
  double u_ms = 0.0;
  double v_ms = 0.0;
  double w_ms = 0.0;
  double sonic_T_C = 0.0;
  std::array<double, kThermocoupleCount> T_C{};

  bool operator==(const SampleRecord&) const = default;
};

enum class Phase { pre_burn, burn, post_burn };

std::string_view to_string(Phase phase);

struct PhaseSegmentation {
  double burn_start_s = 0.0;
  double burn_end_s = 0.0;

  // Throws parameter error unless burn_start_s < burn_end_s.
  void validate() const;
  Phase label(double time_s) const;
};

PhaseSegmentation segmentation_from_json(const nlohmann::json& j);
PhaseSegmentation load_segmentation(const std::filesystem::path& path);

// A contiguous block of records that came from one source file. Timestamps are
// strictly increasing inside a segment, not across segments of a merged set.
struct SourceSegment {
  std::string source;
  std::size_t count = 0;

  bool operator==(const SourceSegment&) const = default;
};

struct ClusterDataset {
  std::string name;
  std::vector<SampleRecord> records;
  std::vector<SourceSegment> provenance;
  // Set once the dataset has been restricted to a phase.
  std::optional<Phase> phase;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// Column schema, in file order.
const std::vector<std::string>& csv_columns();

ClusterDataset parse_csv(const std::filesystem::path& path);
ClusterDataset read_csv(std::istream& in, const std::string& name, const std::string& source);

// Writes records at full round-trip precision.
void write_csv(std::ostream& out, const ClusterDataset& ds);
void write_csv(const std::filesystem::path& path, const ClusterDataset& ds);

// Throws cadence error unless consecutive timestamps within each source
// segment step by kSamplePeriodS within kCadenceToleranceS.
void validate_cadence(const ClusterDataset& ds);

ClusterDataset segment_phases(const ClusterDataset& ds, const PhaseSegmentation& seg, Phase phase = Phase::burn);

ClusterDataset clamp_outliers(const ClusterDataset& ds, double lo_C = -50.0, double hi_C = 50.0);

ClusterDataset merge_clusters(const ClusterDataset& a, const ClusterDataset& b);

}  // namespace tke
