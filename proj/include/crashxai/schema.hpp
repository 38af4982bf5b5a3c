#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crashxai/keyvalue.hpp"

namespace crashxai {

enum class Severity { NoApparentOrMinor, SeriousOrFatal };

std::string_view to_string(Severity s);
/// Accepts the enum names, the label strings used in prompts, and 0/1.
std::optional<Severity> parse_severity(std::string_view text);

struct LocalDateTime {
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;

  auto operator<=>(const LocalDateTime&) const = default;
};

/// "2022-06-29" + "20:00" -> LocalDateTime; nullopt on malformed input.
std::optional<LocalDateTime> parse_date_time(std::string_view date, std::string_view time);
std::string format_iso(const LocalDateTime& t);

struct CrashRecord {
  std::string caseno;
  LocalDateTime occurred_at;
  std::string county;
  std::string route_id;
  double milepost = 0.0;
  std::string weather;
  std::string lighting;
  std::string surface_condition;
  std::optional<double> latitude;
  std::optional<double> longitude;
  bool hit_and_run = false;
  Severity severity = Severity::NoApparentOrMinor;
  std::map<std::string, std::string> extra;

  bool operator==(const CrashRecord&) const = default;
};

enum class Locale { Rural, Urban };

struct RoadSegment {
  std::string route_id;
  double from_measure = 0.0;
  double to_measure = 0.0;
  int lane_count = 1;
  std::optional<double> lane_width;
  std::optional<double> left_shoulder_width;
  std::optional<double> right_shoulder_width;
  std::optional<int> speed_limit;
  std::string surface_type;
  std::optional<long long> aadt;
  Locale locale = Locale::Rural;

  bool operator==(const RoadSegment&) const = default;
};

struct VehicleRecord {
  std::string caseno;
  int unit_id = 0;
  std::string make;
  std::string model;
  std::optional<int> model_year;
  std::string maneuver;
  std::map<std::string, std::string> extra;

  bool operator==(const VehicleRecord&) const = default;
};

enum class PersonRole { Driver, Passenger, Pedestrian };

std::string_view to_string(PersonRole r);
std::optional<PersonRole> parse_person_role(std::string_view text);

struct PersonRecord {
  std::string caseno;
  int unit_id = 0;
  PersonRole role = PersonRole::Driver;
  std::optional<int> age;
  std::string sex;
  std::string restraint;
  std::string airbag;
  std::string sobriety;

  bool operator==(const PersonRecord&) const = default;
};

struct Unit {
  VehicleRecord vehicle;
  std::vector<PersonRecord> persons;

  bool operator==(const Unit&) const = default;
};

/// One crash with its road segment and the vehicle/person hierarchy.
struct CrashCase {
  CrashRecord crash;
  std::optional<RoadSegment> segment;
  std::vector<Unit> units;

  bool operator==(const CrashCase&) const = default;
};

/// A row that failed type coercion or a row-level invariant.
struct Reject {
  std::string table;
  std::size_t line = 0;
  std::string reason;
};

struct TableSet {
  std::vector<CrashRecord> crashes;
  std::vector<RoadSegment> segments;
  std::vector<VehicleRecord> vehicles;
  std::vector<PersonRecord> persons;
  std::vector<Reject> rejects;
};

/// Header names for each typed field. Any crash or vehicle column not listed
/// here lands in the record's `extra` map under its header name.
struct ColumnMap {
  std::map<std::string, std::string> crash{
      {"caseno", "CASENO"},       {"date", "DATE"},
      {"time", "TIME"},           {"county", "COUNTY"},
      {"route_id", "ROUTE_ID"},   {"milepost", "MILEPOST"},
      {"weather", "WEATHER"},     {"lighting", "LIGHTING"},
      {"surface_condition", "SURFACE_COND"},
      {"latitude", "LATITUDE"},   {"longitude", "LONGITUDE"},
      {"hit_and_run", "HIT_AND_RUN"},
      {"severity", "SEVERITY"}};
  std::map<std::string, std::string> segment{
      {"route_id", "ROUTE_ID"},         {"from_measure", "FROM_MEASURE"},
      {"to_measure", "TO_MEASURE"},     {"lane_count", "LANE_CNT"},
      {"lane_width", "LANE_WIDTH"},     {"left_shoulder_width", "LSHLD_WIDTH"},
      {"right_shoulder_width", "RSHLD_WIDTH"},
      {"speed_limit", "SPEED_LIMIT"},   {"surface_type", "SURFACE_TYPE"},
      {"aadt", "AADT"},                 {"locale", "LOCALE"}};
  std::map<std::string, std::string> vehicle{
      {"caseno", "CASENO"}, {"unit_id", "UNIT_ID"},       {"make", "MAKE"},
      {"model", "MODEL"},   {"model_year", "MODEL_YEAR"}, {"maneuver", "MANEUVER"}};
  std::map<std::string, std::string> person{
      {"caseno", "CASENO"}, {"unit_id", "UNIT_ID"},     {"role", "ROLE"},
      {"age", "AGE"},       {"sex", "SEX"},             {"restraint", "RESTRAINT"},
      {"airbag", "AIRBAG"}, {"sobriety", "SOBRIETY"}};

  /// Applies `column.<table>.<field> = HEADER` overrides; unknown tables or
  /// fields are rejected.
  void apply_override(const std::string& key, const std::string& header);
};

/// Loads the four CSV tables. Throws on a missing file, a missing key column
/// or a duplicate CASENO; rows that fail coercion go to `rejects`.
TableSet load_tables(const std::string& crash_path, const std::string& segment_path,
                     const std::string& vehicle_path, const std::string& person_path,
                     const ColumnMap& columns = {}, int current_year = 2026);

/// Same as load_tables but on in-memory CSV text.
TableSet load_tables_from_text(std::string_view crash_csv, std::string_view segment_csv,
                               std::string_view vehicle_csv, std::string_view person_csv,
                               const ColumnMap& columns = {}, int current_year = 2026);

/// Half-open interval lookup of the crash milepost on its route. When several
/// segments match, the one with the smallest from_measure wins and a warning
/// is appended to `warnings` (if given).
std::optional<RoadSegment> link_segment(const CrashRecord& crash,
                                        const std::vector<RoadSegment>& segments,
                                        std::vector<std::string>* warnings = nullptr);

struct IntegrationResult {
  std::vector<CrashCase> cases;
  std::vector<VehicleRecord> orphan_vehicles;
  std::vector<PersonRecord> orphan_persons;
  std::vector<std::string> warnings;
};

/// One CrashCase per crash row, vehicles ordered by unit_id, persons in input
/// order under their vehicle. Children without a parent are reported.
IntegrationResult integrate(const TableSet& tables);

/// Keeps every minority-class case and a seeded uniform sample of
/// round(target_ratio * |minority|) majority cases, in input order.
std::vector<CrashCase> stratified_downsample(const std::vector<CrashCase>& cases,
                                             double target_ratio, std::uint64_t seed);

std::string serialize_cases(const std::vector<CrashCase>& cases);
std::vector<CrashCase> deserialize_cases(std::string_view jsonl);
void serialize_cases(const std::vector<CrashCase>& cases, const std::string& path);
std::vector<CrashCase> deserialize_cases_file(const std::string& path);

}  // namespace crashxai
