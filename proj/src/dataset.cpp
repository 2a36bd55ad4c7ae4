#include "subsetvis/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "subsetvis/error.hpp"

namespace subsetvis {

namespace {

constexpr std::array<std::string_view, 7> kWeekdays = {"Mon", "Tue", "Wed", "Thu",
                                                       "Fri", "Sat", "Sun"};
constexpr std::array<std::string_view, 12> kMonths = {"Jan", "Feb", "Mar", "Apr",
                                                      "May", "Jun", "Jul", "Aug",
                                                      "Sep", "Oct", "Nov", "Dec"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

struct DateTime {
  int year = 0, month = 0, day = 0;
  std::optional<int> hour;
};

// Accepts "YYYY-MM-DD", optionally followed by ' ' or 'T' and "HH:MM[:SS]".
std::optional<DateTime> parse_datetime(std::string_view s) {
  s = trim(s);
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  DateTime dt;
  auto y = parse_int(s.substr(0, 4));
  auto m = parse_int(s.substr(5, 2));
  auto d = parse_int(s.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  dt.year = *y;
  dt.month = *m;
  dt.day = *d;
  const auto ymd = std::chrono::year{dt.year} / std::chrono::month{static_cast<unsigned>(dt.month)} /
                   std::chrono::day{static_cast<unsigned>(dt.day)};
  if (!ymd.ok()) return std::nullopt;
  if (s.size() > 10) {
    if ((s[10] != ' ' && s[10] != 'T') || s.size() < 16 || s[13] != ':') return std::nullopt;
    auto h = parse_int(s.substr(11, 2));
    if (!h || *h < 0 || *h > 23) return std::nullopt;
    dt.hour = *h;
  }
  return dt;
}

std::optional<BinIndex> lookup_name(std::string_view raw, std::span<const std::string_view> names) {
  const std::string key = lower(trim(raw));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string name = lower(names[i]);
    // Abbreviation or any longer spelling that starts with it ("Monday").
    if (key.size() >= 3 && key.compare(0, 3, name) == 0) return static_cast<BinIndex>(i);
  }
  return std::nullopt;
}

std::optional<BinIndex> temporal_bin(TemporalUnit unit, std::string_view raw) {
  switch (unit) {
    case TemporalUnit::hour: {
      if (auto h = parse_int(raw)) {
        if (*h >= 0 && *h <= 23) return static_cast<BinIndex>(*h);
        return std::nullopt;
      }
      const auto t = trim(raw);
      if (t.size() >= 4 && t.size() <= 8 && t.find(':') != std::string_view::npos &&
          t.find('-') == std::string_view::npos) {
        auto h = parse_int(t.substr(0, t.find(':')));
        if (h && *h >= 0 && *h <= 23) return static_cast<BinIndex>(*h);
        return std::nullopt;
      }
      if (auto dt = parse_datetime(raw); dt && dt->hour) return static_cast<BinIndex>(*dt->hour);
      return std::nullopt;
    }
    case TemporalUnit::day_of_week: {
      if (auto i = parse_int(raw)) {
        if (*i >= 0 && *i <= 6) return static_cast<BinIndex>(*i);
        return std::nullopt;
      }
      if (auto b = lookup_name(raw, kWeekdays)) return b;
      if (auto dt = parse_datetime(raw)) {
        const std::chrono::sys_days days = std::chrono::year{dt->year} /
                                           std::chrono::month{static_cast<unsigned>(dt->month)} /
                                           std::chrono::day{static_cast<unsigned>(dt->day)};
        // iso_encoding: Mon = 1 .. Sun = 7
        return static_cast<BinIndex>(std::chrono::weekday{days}.iso_encoding() - 1);
      }
      return std::nullopt;
    }
    case TemporalUnit::month: {
      if (auto i = parse_int(raw)) {
        if (*i >= 1 && *i <= 12) return static_cast<BinIndex>(*i - 1);
        return std::nullopt;
      }
      if (auto b = lookup_name(raw, kMonths)) return b;
      if (auto dt = parse_datetime(raw)) return static_cast<BinIndex>(dt->month - 1);
      return std::nullopt;
    }
    case TemporalUnit::none:
      break;
  }
  return std::nullopt;
}

std::vector<std::string> temporal_labels(TemporalUnit unit) {
  std::vector<std::string> out;
  switch (unit) {
    case TemporalUnit::hour:
      for (int h = 0; h < 24; ++h) out.push_back(std::to_string(h));
      break;
    case TemporalUnit::day_of_week:
      out.assign(kWeekdays.begin(), kWeekdays.end());
      break;
    case TemporalUnit::month:
      out.assign(kMonths.begin(), kMonths.end());
      break;
    case TemporalUnit::none:
      fail(ErrorKind::invalid_argument, "missing_temporal_unit",
           "temporal attributes need a temporal_unit (hour, day_of_week, month)");
  }
  return out;
}

std::string format_edge(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::categorical: return "categorical";
    case AttributeKind::numeric: return "numeric";
    case AttributeKind::temporal: return "temporal";
    case AttributeKind::geographic: return "geographic";
  }
  return "categorical";
}

std::string_view to_string(TemporalUnit unit) {
  switch (unit) {
    case TemporalUnit::none: return "none";
    case TemporalUnit::hour: return "hour";
    case TemporalUnit::day_of_week: return "day_of_week";
    case TemporalUnit::month: return "month";
  }
  return "none";
}

AttributeKind parse_attribute_kind(std::string_view text) {
  const std::string t = lower(text);
  if (t == "categorical") return AttributeKind::categorical;
  if (t == "numeric" || t == "numerical") return AttributeKind::numeric;
  if (t == "temporal") return AttributeKind::temporal;
  if (t == "geographic" || t == "geographical") return AttributeKind::geographic;
  fail(ErrorKind::invalid_argument, "unknown_kind", "unknown attribute kind '" + std::string(text) + "'");
}

TemporalUnit parse_temporal_unit(std::string_view text) {
  const std::string t = lower(text);
  if (t == "hour") return TemporalUnit::hour;
  if (t == "day_of_week" || t == "week" || t == "weekday") return TemporalUnit::day_of_week;
  if (t == "month") return TemporalUnit::month;
  fail(ErrorKind::invalid_argument, "unknown_temporal_unit",
       "unknown temporal unit '" + std::string(text) + "'");
}

BinIndex AttributeSchema::bin_of(std::string_view raw) const {
  auto out_of_domain = [&]() -> BinIndex {
    fail(ErrorKind::domain, "value_outside_domain",
         "value '" + std::string(raw) + "' is outside the domain of '" + name + "'");
  };
  switch (kind) {
    case AttributeKind::numeric: {
      const auto v = parse_double(raw);
      if (!v) {
        fail(ErrorKind::domain, "unparseable_value",
             "value '" + std::string(raw) + "' of '" + name + "' is not a number");
      }
      if (*v < edges.front() || *v > edges.back()) return out_of_domain();
      if (*v == edges.back()) return static_cast<BinIndex>(bins.size() - 1);
      const auto it = std::upper_bound(edges.begin(), edges.end(), *v);
      return static_cast<BinIndex>(it - edges.begin() - 1);
    }
    case AttributeKind::temporal: {
      if (auto b = temporal_bin(temporal_unit, raw)) return *b;
      return out_of_domain();
    }
    case AttributeKind::categorical:
    case AttributeKind::geographic: {
      const auto t = trim(raw);
      for (std::size_t i = 0; i < bins.size(); ++i) {
        if (bins[i] == t) return static_cast<BinIndex>(i);
      }
      return out_of_domain();
    }
  }
  return out_of_domain();
}

SchemaConfig parse_schema_config(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    fail(ErrorKind::invalid_argument, "bad_schema", "schema config must be a JSON object");
  }
  SchemaConfig config;
  for (const auto& [column, spec] : doc.items()) {
    if (!spec.is_object() || !spec.contains("kind")) {
      fail(ErrorKind::invalid_argument, "bad_schema", "column '" + column + "' needs a kind");
    }
    ColumnConfig c;
    c.kind = parse_attribute_kind(spec.at("kind").get<std::string>());
    if (spec.contains("temporal_unit")) {
      c.temporal_unit = parse_temporal_unit(spec.at("temporal_unit").get<std::string>());
    }
    if (spec.contains("intervals")) {
      const auto n = spec.at("intervals").get<long long>();
      if (n < 1) fail(ErrorKind::invalid_argument, "bad_schema", "intervals must be >= 1");
      c.intervals = static_cast<std::size_t>(n);
    }
    if (spec.contains("bins")) {
      const auto& bins = spec.at("bins");
      if (!bins.is_array() || bins.empty()) {
        fail(ErrorKind::invalid_argument, "bad_schema", "bins of '" + column + "' must be a non-empty array");
      }
      if (c.kind == AttributeKind::numeric) {
        c.edges = bins.get<std::vector<double>>();
      } else {
        for (const auto& b : bins) {
          c.labels.push_back(b.is_string() ? b.get<std::string>() : b.dump());
        }
      }
    }
    if (spec.contains("edges")) c.edges = spec.at("edges").get<std::vector<double>>();
    config.emplace(column, std::move(c));
  }
  return config;
}

AttributeSchema discretize(std::string name, const ColumnConfig& config,
                           std::span<const std::string> raw_values) {
  AttributeSchema a;
  a.name = std::move(name);
  a.kind = config.kind;
  switch (config.kind) {
    case AttributeKind::temporal:
      a.temporal_unit = config.temporal_unit;
      a.bins = temporal_labels(config.temporal_unit);
      break;
    case AttributeKind::categorical:
    case AttributeKind::geographic: {
      if (!config.labels.empty()) {
        std::set<std::string> seen;
        for (const auto& l : config.labels) {
          if (!seen.insert(l).second) {
            fail(ErrorKind::invalid_argument, "bad_schema", "duplicate bin '" + l + "' in '" + a.name + "'");
          }
        }
        a.bins = config.labels;
      } else {
        std::set<std::string> distinct;
        for (const auto& v : raw_values) distinct.emplace(trim(v));
        a.bins.assign(distinct.begin(), distinct.end());
      }
      break;
    }
    case AttributeKind::numeric: {
      if (!config.edges.empty()) {
        if (config.edges.size() < 2) {
          fail(ErrorKind::invalid_argument, "bad_schema", "numeric edges of '" + a.name + "' need >= 2 entries");
        }
        for (std::size_t i = 1; i < config.edges.size(); ++i) {
          if (!(config.edges[i] > config.edges[i - 1])) {
            fail(ErrorKind::invalid_argument, "bad_schema",
                 "numeric edges of '" + a.name + "' must be strictly increasing");
          }
        }
        a.edges = config.edges;
      } else {
        const std::size_t n = config.intervals.value_or(kDefaultNumericIntervals);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& raw : raw_values) {
          const auto v = parse_double(raw);
          if (!v) {
            fail(ErrorKind::domain, "unparseable_value",
                 "value '" + raw + "' of '" + a.name + "' is not a number");
          }
          lo = std::min(lo, *v);
          hi = std::max(hi, *v);
        }
        if (!std::isfinite(lo)) {
          fail(ErrorKind::domain, "empty_domain", "numeric attribute '" + a.name + "' has no values");
        }
        if (lo == hi) {
          if (n > 1) {
            fail(ErrorKind::domain, "zero_width_domain",
                 "numeric attribute '" + a.name + "' has zero width but " + std::to_string(n) +
                     " intervals were requested");
          }
          a.edges = {lo, hi + 1.0};
        } else {
          a.edges.resize(n + 1);
          const double width = (hi - lo) / static_cast<double>(n);
          for (std::size_t i = 0; i <= n; ++i) a.edges[i] = lo + width * static_cast<double>(i);
          a.edges.back() = hi;
        }
      }
      for (std::size_t i = 0; i + 1 < a.edges.size(); ++i) {
        a.bins.push_back("[" + format_edge(a.edges[i]) + "," + format_edge(a.edges[i + 1]) +
                         (i + 2 == a.edges.size() ? "]" : ")"));
      }
      break;
    }
  }
  if (a.bins.empty()) {
    fail(ErrorKind::domain, "empty_domain", "attribute '" + a.name + "' has no bins");
  }
  return a;
}

Dataset::Dataset(std::vector<AttributeSchema> schema, std::vector<std::vector<BinIndex>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (schema_.size() != columns_.size()) {
    fail(ErrorKind::invalid_argument, "bad_dataset", "schema and column counts differ");
  }
  if (schema_.empty()) fail(ErrorKind::invalid_argument, "empty_input", "dataset has no attributes");
  record_count_ = columns_.front().size();
  for (std::size_t a = 0; a < columns_.size(); ++a) {
    if (schema_[a].bins.empty()) {
      fail(ErrorKind::invalid_argument, "bad_dataset", "attribute '" + schema_[a].name + "' has no bins");
    }
    if (columns_[a].size() != record_count_) {
      fail(ErrorKind::invalid_argument, "bad_dataset", "columns have different lengths");
    }
    const auto bins = schema_[a].bin_count();
    for (BinIndex b : columns_[a]) {
      if (b >= bins) {
        fail(ErrorKind::invalid_argument, "bad_dataset",
             "bin index out of range in column '" + schema_[a].name + "'");
      }
    }
  }
}

const AttributeSchema& Dataset::attribute(AttributeId id) const {
  if (id >= schema_.size()) {
    fail(ErrorKind::not_found, "unknown_attribute", "attribute id " + std::to_string(id) + " does not exist");
  }
  return schema_[id];
}

std::span<const BinIndex> Dataset::column(AttributeId id) const {
  attribute(id);
  return columns_[id];
}

std::optional<AttributeId> Dataset::find_attribute(std::string_view name) const {
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (schema_[i].name == name) return static_cast<AttributeId>(i);
  }
  return std::nullopt;
}

AttributeId Dataset::attribute_id(std::string_view name) const {
  if (auto id = find_attribute(name)) return *id;
  fail(ErrorKind::not_found, "unknown_attribute", "unknown attribute '" + std::string(name) + "'");
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    // Skip blank lines.
    if (!(row.size() == 1 && row.front().empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) fail(ErrorKind::invalid_argument, "bad_csv", "unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

Dataset ingest(std::string_view csv_text, const SchemaConfig& config) {
  auto rows = parse_csv(csv_text);
  if (rows.empty()) fail(ErrorKind::invalid_argument, "empty_input", "input has no header row");
  const auto& header = rows.front();
  if (rows.size() < 2) fail(ErrorKind::invalid_argument, "empty_input", "input has no records");

  std::vector<const ColumnConfig*> configs;
  for (const auto& col : header) {
    const auto it = config.find(std::string(trim(col)));
    if (it == config.end()) {
      fail(ErrorKind::invalid_argument, "unknown_column",
           "column '" + col + "' is not named in the schema config");
    }
    configs.push_back(&it->second);
  }
  for (const auto& [name, _] : config) {
    if (std::none_of(header.begin(), header.end(), [&](const auto& h) { return trim(h) == name; })) {
      fail(ErrorKind::invalid_argument, "unknown_column",
           "schema config names column '" + name + "' that the input lacks");
    }
  }

  const std::size_t n_cols = header.size();
  const std::size_t n_rows = rows.size() - 1;
  std::vector<std::vector<std::string>> raw(n_cols, std::vector<std::string>(n_rows));
  for (std::size_t r = 0; r < n_rows; ++r) {
    auto& row = rows[r + 1];
    if (row.size() != n_cols) {
      fail(ErrorKind::invalid_argument, "bad_csv",
           "row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) + " fields, expected " +
               std::to_string(n_cols));
    }
    for (std::size_t c = 0; c < n_cols; ++c) raw[c][r] = std::move(row[c]);
  }

  std::vector<AttributeSchema> schema;
  std::vector<std::vector<BinIndex>> columns(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) {
    const std::string name(trim(header[c]));
    try {
      schema.push_back(discretize(name, *configs[c], raw[c]));
    } catch (const Error& e) {
      fail(e.kind(), e.code(), "column '" + name + "': " + e.what());
    }
    const auto& attr = schema.back();
    columns[c].resize(n_rows);
    std::unordered_map<std::string, BinIndex> memo;
    for (std::size_t r = 0; r < n_rows; ++r) {
      const auto& cell = raw[c][r];
      if (auto it = memo.find(cell); it != memo.end()) {
        columns[c][r] = it->second;
        continue;
      }
      try {
        const BinIndex b = attr.bin_of(cell);
        memo.emplace(cell, b);
        columns[c][r] = b;
      } catch (const Error& e) {
        fail(e.kind(), e.code(),
             "row " + std::to_string(r + 1) + ", column '" + name + "': " + e.what());
      }
    }
  }
  return Dataset(std::move(schema), std::move(columns));
}

nlohmann::json schema_to_json(const Dataset& dataset) {
  nlohmann::json attrs = nlohmann::json::array();
  for (std::size_t i = 0; i < dataset.attribute_count(); ++i) {
    const auto& a = dataset.schema()[i];
    nlohmann::json j = {{"id", i},
                        {"name", a.name},
                        {"kind", to_string(a.kind)},
                        {"ordered", a.ordered()},
                        {"bins", a.bins}};
    if (!a.edges.empty()) j["edges"] = a.edges;
    if (a.temporal_unit != TemporalUnit::none) j["temporal_unit"] = to_string(a.temporal_unit);
    attrs.push_back(std::move(j));
  }
  return {{"attributes", std::move(attrs)}, {"record_count", dataset.record_count()}};
}

}  // namespace subsetvis
