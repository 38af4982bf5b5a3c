#include "crashxai/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "crashxai/csv.hpp"
#include "crashxai/error.hpp"
#include "crashxai/util.hpp"

namespace crashxai {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Severity s) {
  return s == Severity::SeriousOrFatal ? "SeriousOrFatal" : "NoApparentOrMinor";
}

std::optional<Severity> parse_severity(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t == "noapparentorminor" || t == "no apparent or minor injury" || t == "0" || t == "minor") {
    return Severity::NoApparentOrMinor;
  }
  if (t == "seriousorfatal" || t == "serious injury or fatal" ||
      t == "serious injury or fatal accident" || t == "1" || t == "severe") {
    return Severity::SeriousOrFatal;
  }
  return std::nullopt;
}

std::string_view to_string(PersonRole r) {
  switch (r) {
    case PersonRole::Driver: return "driver";
    case PersonRole::Passenger: return "passenger";
    case PersonRole::Pedestrian: return "pedestrian";
  }
  return "driver";
}

std::optional<PersonRole> parse_person_role(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t == "driver" || t == "d") return PersonRole::Driver;
  if (t == "passenger" || t == "p") return PersonRole::Passenger;
  if (t == "pedestrian" || t == "ped") return PersonRole::Pedestrian;
  return std::nullopt;
}

namespace {

template <typename T>
std::optional<T> parse_exact(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) return std::nullopt;
  }
  return value;
}

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : kDays[m - 1];
}

}  // namespace

std::optional<LocalDateTime> parse_date_time(std::string_view date, std::string_view time) {
  date = trim(date);
  time = trim(time);
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') return std::nullopt;
  auto y = parse_exact<int>(date.substr(0, 4));
  auto mo = parse_exact<int>(date.substr(5, 2));
  auto d = parse_exact<int>(date.substr(8, 2));
  if (!y || !mo || !d || *mo < 1 || *mo > 12 || *d < 1 || *d > days_in_month(*y, *mo)) {
    return std::nullopt;
  }
  LocalDateTime t{*y, *mo, *d, 0, 0};
  if (!time.empty()) {
    const auto colon = time.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    auto h = parse_exact<int>(time.substr(0, colon));
    auto mi = parse_exact<int>(time.substr(colon + 1));
    if (!h || !mi || *h < 0 || *h > 23 || *mi < 0 || *mi > 59) return std::nullopt;
    t.hour = *h;
    t.minute = *mi;
  }
  return t;
}

std::string format_iso(const LocalDateTime& t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d", t.year, t.month, t.day, t.hour,
                t.minute);
  return buf;
}

void ColumnMap::apply_override(const std::string& key, const std::string& header) {
  const auto parts = split(key, '.');
  if (parts.size() != 3 || parts[0] != "column") {
    throw Error(ErrorKind::InvalidConfig, "bad column mapping key '" + key + "'");
  }
  std::map<std::string, std::string>* table = nullptr;
  if (parts[1] == "crash") table = &crash;
  if (parts[1] == "segment") table = &segment;
  if (parts[1] == "vehicle") table = &vehicle;
  if (parts[1] == "person") table = &person;
  if (table == nullptr || !table->contains(parts[2])) {
    throw Error(ErrorKind::InvalidConfig, "unknown column mapping key '" + key + "'");
  }
  (*table)[parts[2]] = header;
}

namespace {

/// Resolves mapped fields of one table against its header.
class Binder {
 public:
  Binder(const csv::Table& table, const std::map<std::string, std::string>& fields,
         std::string name, const std::vector<std::string>& keys)
      : table_(table), name_(std::move(name)) {
    for (const auto& [field, header] : fields) {
      if (auto idx = table.column(header)) {
        index_[field] = *idx;
        mapped_.insert(*idx);
      }
    }
    for (const auto& k : keys) {
      if (!index_.contains(k)) {
        throw Error(ErrorKind::MissingColumn,
                    name_ + " table is missing key column '" + fields.at(k) + "'");
      }
    }
  }

  std::string get(const csv::Row& row, const std::string& field) const {
    auto it = index_.find(field);
    if (it == index_.end() || it->second >= row.fields.size()) return {};
    return row.fields[it->second];
  }

  std::map<std::string, std::string> extras(const csv::Row& row) const {
    std::map<std::string, std::string> out;
    for (std::size_t i = 0; i < table_.header.size(); ++i) {
      if (mapped_.contains(i)) continue;
      out[table_.header[i]] = i < row.fields.size() ? row.fields[i] : std::string{};
    }
    return out;
  }

 private:
  const csv::Table& table_;
  std::string name_;
  std::map<std::string, std::size_t> index_;
  std::set<std::size_t> mapped_;
};

struct RowError {
  std::string reason;
};

template <typename T>
T require(std::optional<T> v, const std::string& field, const std::string& raw) {
  if (!v) throw RowError{"field '" + field + "' has invalid value '" + raw + "'"};
  return *v;
}

template <typename T>
std::optional<T> optional_number(const std::string& raw, const std::string& field) {
  const std::string t = to_lower(trim(raw));
  if (t.empty() || t == "nan" || t == "n/a" || t == "unknown" || t == "null") return std::nullopt;
  auto v = parse_exact<T>(raw);
  if (!v) throw RowError{"field '" + field + "' has invalid value '" + raw + "'"};
  return v;
}

bool parse_flag(const std::string& raw) {
  const std::string t = to_lower(trim(raw));
  if (t.empty() || t == "n" || t == "no" || t == "0" || t == "false") return false;
  if (t == "y" || t == "yes" || t == "1" || t == "true") return true;
  throw RowError{"field 'hit_and_run' has invalid value '" + raw + "'"};
}

template <typename Fn>
void each_row(const csv::Table& table, const std::string& name, std::vector<Reject>& rejects,
              Fn&& fn) {
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size()) {
      rejects.push_back({name, row.line,
                         "expected " + std::to_string(table.header.size()) + " fields, got " +
                             std::to_string(row.fields.size())});
      continue;
    }
    try {
      fn(row);
    } catch (const RowError& e) {
      rejects.push_back({name, row.line, e.reason});
    }
  }
}

TableSet load_parsed(const csv::Table& crash_t, const csv::Table& seg_t, const csv::Table& veh_t,
                     const csv::Table& per_t, const ColumnMap& columns, int current_year) {
  TableSet ts;
  const Binder cb(crash_t, columns.crash, "crash", {"caseno", "date", "milepost", "severity"});
  const Binder sb(seg_t, columns.segment, "segment", {"route_id", "from_measure", "to_measure"});
  const Binder vb(veh_t, columns.vehicle, "vehicle", {"caseno", "unit_id"});
  const Binder pb(per_t, columns.person, "person", {"caseno", "unit_id"});

  std::set<std::string> seen_cases;
  each_row(crash_t, "crash", ts.rejects, [&](const csv::Row& row) {
    CrashRecord r;
    r.caseno = std::string(trim(cb.get(row, "caseno")));
    if (r.caseno.empty()) throw RowError{"empty caseno"};
    if (!seen_cases.insert(r.caseno).second) throw DuplicateKeyError(r.caseno);
    const auto date = cb.get(row, "date");
    const auto time = cb.get(row, "time");
    r.occurred_at = require(parse_date_time(date, time), "date/time", date + " " + time);
    r.county = std::string(trim(cb.get(row, "county")));
    r.route_id = std::string(trim(cb.get(row, "route_id")));
    const auto mp = cb.get(row, "milepost");
    r.milepost = require(parse_exact<double>(mp), "milepost", mp);
    if (r.milepost < 0) throw RowError{"negative milepost '" + mp + "'"};
    r.weather = cb.get(row, "weather");
    r.lighting = cb.get(row, "lighting");
    r.surface_condition = cb.get(row, "surface_condition");
    r.latitude = optional_number<double>(cb.get(row, "latitude"), "latitude");
    r.longitude = optional_number<double>(cb.get(row, "longitude"), "longitude");
    r.hit_and_run = parse_flag(cb.get(row, "hit_and_run"));
    const auto sev = cb.get(row, "severity");
    r.severity = require(parse_severity(sev), "severity", sev);
    r.extra = cb.extras(row);
    ts.crashes.push_back(std::move(r));
  });

  each_row(seg_t, "segment", ts.rejects, [&](const csv::Row& row) {
    RoadSegment s;
    s.route_id = std::string(trim(sb.get(row, "route_id")));
    if (s.route_id.empty()) throw RowError{"empty route_id"};
    const auto from = sb.get(row, "from_measure");
    const auto to = sb.get(row, "to_measure");
    s.from_measure = require(parse_exact<double>(from), "from_measure", from);
    s.to_measure = require(parse_exact<double>(to), "to_measure", to);
    if (!(s.from_measure < s.to_measure)) throw RowError{"from_measure must be < to_measure"};
    const auto lanes = sb.get(row, "lane_count");
    s.lane_count = optional_number<int>(lanes, "lane_count").value_or(1);
    if (s.lane_count < 1) throw RowError{"lane_count must be >= 1"};
    s.lane_width = optional_number<double>(sb.get(row, "lane_width"), "lane_width");
    s.left_shoulder_width =
        optional_number<double>(sb.get(row, "left_shoulder_width"), "left_shoulder_width");
    s.right_shoulder_width =
        optional_number<double>(sb.get(row, "right_shoulder_width"), "right_shoulder_width");
    s.speed_limit = optional_number<int>(sb.get(row, "speed_limit"), "speed_limit");
    s.surface_type = sb.get(row, "surface_type");
    s.aadt = optional_number<long long>(sb.get(row, "aadt"), "aadt");
    if (s.aadt && *s.aadt < 0) throw RowError{"aadt must be >= 0"};
    const std::string loc = to_lower(trim(sb.get(row, "locale")));
    if (loc.empty() || loc == "rural" || loc == "r") {
      s.locale = Locale::Rural;
    } else if (loc == "urban" || loc == "u") {
      s.locale = Locale::Urban;
    } else {
      throw RowError{"field 'locale' has invalid value '" + loc + "'"};
    }
    ts.segments.push_back(std::move(s));
  });

  std::set<std::pair<std::string, int>> seen_units;
  each_row(veh_t, "vehicle", ts.rejects, [&](const csv::Row& row) {
    VehicleRecord v;
    v.caseno = std::string(trim(vb.get(row, "caseno")));
    const auto uid = vb.get(row, "unit_id");
    v.unit_id = require(parse_exact<int>(uid), "unit_id", uid);
    v.make = vb.get(row, "make");
    v.model = vb.get(row, "model");
    v.model_year = optional_number<int>(vb.get(row, "model_year"), "model_year");
    if (v.model_year && (*v.model_year < 1900 || *v.model_year > current_year + 1)) {
      throw RowError{"model_year out of range: " + std::to_string(*v.model_year)};
    }
    v.maneuver = vb.get(row, "maneuver");
    v.extra = vb.extras(row);
    if (!seen_units.insert({v.caseno, v.unit_id}).second) {
      throw RowError{"duplicate vehicle (" + v.caseno + ", " + std::to_string(v.unit_id) + ")"};
    }
    ts.vehicles.push_back(std::move(v));
  });

  each_row(per_t, "person", ts.rejects, [&](const csv::Row& row) {
    PersonRecord p;
    p.caseno = std::string(trim(pb.get(row, "caseno")));
    const auto uid = pb.get(row, "unit_id");
    p.unit_id = require(parse_exact<int>(uid), "unit_id", uid);
    const auto role = pb.get(row, "role");
    p.role = trim(role).empty() ? PersonRole::Driver : require(parse_person_role(role), "role", role);
    p.age = optional_number<int>(pb.get(row, "age"), "age");
    if (p.age && (*p.age < 0 || *p.age > 120)) {
      throw RowError{"age out of range: " + std::to_string(*p.age)};
    }
    p.sex = pb.get(row, "sex");
    p.restraint = pb.get(row, "restraint");
    p.airbag = pb.get(row, "airbag");
    p.sobriety = pb.get(row, "sobriety");
    ts.persons.push_back(std::move(p));
  });
  return ts;
}

}  // namespace

TableSet load_tables(const std::string& crash_path, const std::string& segment_path,
                     const std::string& vehicle_path, const std::string& person_path,
                     const ColumnMap& columns, int current_year) {
  return load_parsed(csv::read_file(crash_path), csv::read_file(segment_path),
                     csv::read_file(vehicle_path), csv::read_file(person_path), columns,
                     current_year);
}

TableSet load_tables_from_text(std::string_view crash_csv, std::string_view segment_csv,
                               std::string_view vehicle_csv, std::string_view person_csv,
                               const ColumnMap& columns, int current_year) {
  return load_parsed(csv::parse(crash_csv), csv::parse(segment_csv), csv::parse(vehicle_csv),
                     csv::parse(person_csv), columns, current_year);
}

std::optional<RoadSegment> link_segment(const CrashRecord& crash,
                                        const std::vector<RoadSegment>& segments,
                                        std::vector<std::string>* warnings) {
  const RoadSegment* best = nullptr;
  std::size_t matches = 0;
  for (const auto& s : segments) {
    if (s.route_id != crash.route_id) continue;
    if (s.from_measure <= crash.milepost && crash.milepost < s.to_measure) {
      ++matches;
      if (best == nullptr || s.from_measure < best->from_measure) best = &s;
    }
  }
  if (matches > 1 && warnings != nullptr) {
    warnings->push_back("case " + crash.caseno + ": milepost " + format_number(crash.milepost) +
                        " matches " + std::to_string(matches) + " segments on route " +
                        crash.route_id + "; using the one starting at " +
                        format_number(best->from_measure));
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

IntegrationResult integrate(const TableSet& tables) {
  IntegrationResult result;

  std::unordered_map<std::string, std::vector<RoadSegment>> by_route;
  for (const auto& s : tables.segments) by_route[s.route_id].push_back(s);

  std::unordered_map<std::string, std::size_t> case_index;
  result.cases.reserve(tables.crashes.size());
  for (const auto& c : tables.crashes) {
    CrashCase cc;
    cc.crash = c;
    if (auto it = by_route.find(c.route_id); it != by_route.end()) {
      cc.segment = link_segment(c, it->second, &result.warnings);
    }
    case_index.emplace(c.caseno, result.cases.size());
    result.cases.push_back(std::move(cc));
  }

  std::vector<const VehicleRecord*> vehicles;
  for (const auto& v : tables.vehicles) {
    if (case_index.contains(v.caseno)) {
      vehicles.push_back(&v);
    } else {
      result.orphan_vehicles.push_back(v);
    }
  }
  // Units ordered by unit_id within their case.
  std::stable_sort(vehicles.begin(), vehicles.end(),
                   [](auto* a, auto* b) { return a->unit_id < b->unit_id; });

  std::map<std::pair<std::string, int>, std::pair<std::size_t, std::size_t>> unit_slot;
  for (const auto* v : vehicles) {
    const std::size_t ci = case_index.at(v->caseno);
    auto& units = result.cases[ci].units;
    unit_slot[{v->caseno, v->unit_id}] = {ci, units.size()};
    units.push_back(Unit{*v, {}});
  }

  for (const auto& p : tables.persons) {
    auto it = unit_slot.find({p.caseno, p.unit_id});
    if (it == unit_slot.end()) {
      result.orphan_persons.push_back(p);
      continue;
    }
    result.cases[it->second.first].units[it->second.second].persons.push_back(p);
  }
  return result;
}

std::vector<CrashCase> stratified_downsample(const std::vector<CrashCase>& cases,
                                             double target_ratio, std::uint64_t seed) {
  if (!(target_ratio > 0) || !std::isfinite(target_ratio)) {
    throw Error(ErrorKind::InvalidArgument, "target_ratio must be > 0");
  }
  std::vector<std::size_t> minor, severe;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    (cases[i].crash.severity == Severity::SeriousOrFatal ? severe : minor).push_back(i);
  }
  // Ties treat the serious class as the minority.
  const bool severe_is_minority = severe.size() <= minor.size();
  const auto& minority = severe_is_minority ? severe : minor;
  std::vector<std::size_t> majority = severe_is_minority ? minor : severe;

  const double wanted = std::round(target_ratio * static_cast<double>(minority.size()));
  if (wanted > static_cast<double>(majority.size())) {
    throw Error(ErrorKind::InsufficientMajority,
                "target_ratio " + format_number(target_ratio) + " needs " +
                    format_number(wanted) + " majority cases but only " +
                    std::to_string(majority.size()) + " exist");
  }
  const auto keep = static_cast<std::size_t>(wanted);

  // Partial Fisher-Yates: the first `keep` slots become the sample.
  Rng rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + rng.index(majority.size() - i);
    std::swap(majority[i], majority[j]);
  }
  std::vector<bool> selected(cases.size(), false);
  for (std::size_t i : minority) selected[i] = true;
  for (std::size_t i = 0; i < keep; ++i) selected[majority[i]] = true;

  std::vector<CrashCase> out;
  out.reserve(minority.size() + keep);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (selected[i]) out.push_back(cases[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSONL layout (keys always in this order):
//   {"caseno","occurred_at","county","route_id","milepost","weather","lighting",
//    "surface_condition","latitude","longitude","hit_and_run","severity","extra",
//    "segment":{...}|null,"units":[{"vehicle":{...},"persons":[{...}]}]}

namespace {

template <typename T>
ojson opt(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

template <typename T>
std::optional<T> get_opt(const ojson& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<T>();
}

ojson extras_json(const std::map<std::string, std::string>& m) {
  ojson j = ojson::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

std::map<std::string, std::string> extras_from(const ojson& j) {
  std::map<std::string, std::string> m;
  for (const auto& [k, v] : j.items()) m[k] = v.get<std::string>();
  return m;
}

ojson to_json(const RoadSegment& s) {
  ojson j;
  j["route_id"] = s.route_id;
  j["from_measure"] = s.from_measure;
  j["to_measure"] = s.to_measure;
  j["lane_count"] = s.lane_count;
  j["lane_width"] = opt(s.lane_width);
  j["left_shoulder_width"] = opt(s.left_shoulder_width);
  j["right_shoulder_width"] = opt(s.right_shoulder_width);
  j["speed_limit"] = opt(s.speed_limit);
  j["surface_type"] = s.surface_type;
  j["aadt"] = opt(s.aadt);
  j["locale"] = s.locale == Locale::Urban ? "urban" : "rural";
  return j;
}

RoadSegment segment_from(const ojson& j) {
  RoadSegment s;
  s.route_id = j.at("route_id").get<std::string>();
  s.from_measure = j.at("from_measure").get<double>();
  s.to_measure = j.at("to_measure").get<double>();
  s.lane_count = j.at("lane_count").get<int>();
  s.lane_width = get_opt<double>(j, "lane_width");
  s.left_shoulder_width = get_opt<double>(j, "left_shoulder_width");
  s.right_shoulder_width = get_opt<double>(j, "right_shoulder_width");
  s.speed_limit = get_opt<int>(j, "speed_limit");
  s.surface_type = j.at("surface_type").get<std::string>();
  s.aadt = get_opt<long long>(j, "aadt");
  const auto loc = j.at("locale").get<std::string>();
  if (loc != "rural" && loc != "urban") throw std::invalid_argument("bad locale '" + loc + "'");
  s.locale = loc == "urban" ? Locale::Urban : Locale::Rural;
  return s;
}

ojson to_json(const VehicleRecord& v) {
  ojson j;
  j["caseno"] = v.caseno;
  j["unit_id"] = v.unit_id;
  j["make"] = v.make;
  j["model"] = v.model;
  j["model_year"] = opt(v.model_year);
  j["maneuver"] = v.maneuver;
  j["extra"] = extras_json(v.extra);
  return j;
}

VehicleRecord vehicle_from(const ojson& j) {
  VehicleRecord v;
  v.caseno = j.at("caseno").get<std::string>();
  v.unit_id = j.at("unit_id").get<int>();
  v.make = j.at("make").get<std::string>();
  v.model = j.at("model").get<std::string>();
  v.model_year = get_opt<int>(j, "model_year");
  v.maneuver = j.at("maneuver").get<std::string>();
  v.extra = extras_from(j.at("extra"));
  return v;
}

ojson to_json(const PersonRecord& p) {
  ojson j;
  j["caseno"] = p.caseno;
  j["unit_id"] = p.unit_id;
  j["role"] = to_string(p.role);
  j["age"] = opt(p.age);
  j["sex"] = p.sex;
  j["restraint"] = p.restraint;
  j["airbag"] = p.airbag;
  j["sobriety"] = p.sobriety;
  return j;
}

PersonRecord person_from(const ojson& j) {
  PersonRecord p;
  p.caseno = j.at("caseno").get<std::string>();
  p.unit_id = j.at("unit_id").get<int>();
  const auto role = j.at("role").get<std::string>();
  auto r = parse_person_role(role);
  if (!r) throw std::invalid_argument("bad role '" + role + "'");
  p.role = *r;
  p.age = get_opt<int>(j, "age");
  p.sex = j.at("sex").get<std::string>();
  p.restraint = j.at("restraint").get<std::string>();
  p.airbag = j.at("airbag").get<std::string>();
  p.sobriety = j.at("sobriety").get<std::string>();
  return p;
}

ojson to_json(const CrashCase& c) {
  const auto& r = c.crash;
  ojson j;
  j["caseno"] = r.caseno;
  j["occurred_at"] = format_iso(r.occurred_at);
  j["county"] = r.county;
  j["route_id"] = r.route_id;
  j["milepost"] = r.milepost;
  j["weather"] = r.weather;
  j["lighting"] = r.lighting;
  j["surface_condition"] = r.surface_condition;
  j["latitude"] = opt(r.latitude);
  j["longitude"] = opt(r.longitude);
  j["hit_and_run"] = r.hit_and_run;
  j["severity"] = to_string(r.severity);
  j["extra"] = extras_json(r.extra);
  j["segment"] = c.segment ? to_json(*c.segment) : ojson(nullptr);
  ojson units = ojson::array();
  for (const auto& u : c.units) {
    ojson uj;
    uj["vehicle"] = to_json(u.vehicle);
    ojson persons = ojson::array();
    for (const auto& p : u.persons) persons.push_back(to_json(p));
    uj["persons"] = std::move(persons);
    units.push_back(std::move(uj));
  }
  j["units"] = std::move(units);
  return j;
}

CrashCase case_from(const ojson& j) {
  CrashCase c;
  auto& r = c.crash;
  r.caseno = j.at("caseno").get<std::string>();
  const auto ts = j.at("occurred_at").get<std::string>();
  auto when = ts.size() == 16 && ts[10] == 'T' ? parse_date_time(ts.substr(0, 10), ts.substr(11))
                                               : std::nullopt;
  if (!when) throw std::invalid_argument("bad occurred_at '" + ts + "'");
  r.occurred_at = *when;
  r.county = j.at("county").get<std::string>();
  r.route_id = j.at("route_id").get<std::string>();
  r.milepost = j.at("milepost").get<double>();
  r.weather = j.at("weather").get<std::string>();
  r.lighting = j.at("lighting").get<std::string>();
  r.surface_condition = j.at("surface_condition").get<std::string>();
  r.latitude = get_opt<double>(j, "latitude");
  r.longitude = get_opt<double>(j, "longitude");
  r.hit_and_run = j.at("hit_and_run").get<bool>();
  const auto sev = j.at("severity").get<std::string>();
  auto s = parse_severity(sev);
  if (!s) throw std::invalid_argument("bad severity '" + sev + "'");
  r.severity = *s;
  r.extra = extras_from(j.at("extra"));
  if (!j.at("segment").is_null()) c.segment = segment_from(j.at("segment"));
  for (const auto& uj : j.at("units")) {
    Unit u;
    u.vehicle = vehicle_from(uj.at("vehicle"));
    for (const auto& pj : uj.at("persons")) u.persons.push_back(person_from(pj));
    c.units.push_back(std::move(u));
  }
  return c;
}

}  // namespace

std::string serialize_cases(const std::vector<CrashCase>& cases) {
  std::string out;
  for (const auto& c : cases) {
    out += to_json(c).dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<CrashCase> deserialize_cases(std::string_view jsonl) {
  std::vector<CrashCase> out;
  std::size_t lineno = 0;
  for (const auto& line : split(jsonl, '\n')) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(case_from(ojson::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

void serialize_cases(const std::vector<CrashCase>& cases, const std::string& path) {
  write_file_atomic(path, serialize_cases(cases));
}

std::vector<CrashCase> deserialize_cases_file(const std::string& path) {
  return deserialize_cases(read_text_file(path));
}

}  // namespace crashxai
