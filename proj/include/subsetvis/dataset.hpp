#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace subsetvis {

using AttributeId = std::uint32_t;
using BinIndex = std::uint32_t;

enum class AttributeKind { categorical, numeric, temporal, geographic };

// Natural interval used to bin a temporal attribute.
enum class TemporalUnit { none, hour, day_of_week, month };

std::string_view to_string(AttributeKind kind);
std::string_view to_string(TemporalUnit unit);
AttributeKind parse_attribute_kind(std::string_view text);
TemporalUnit parse_temporal_unit(std::string_view text);

struct AttributeSchema {
  std::string name;
  AttributeKind kind = AttributeKind::categorical;
  // Display label per bin.
  std::vector<std::string> bins;
  // Numeric only: bins.size() + 1 strictly increasing edges. Intervals are
  // [lo, hi) except the last, which is closed.
  std::vector<double> edges;
  TemporalUnit temporal_unit = TemporalUnit::none;

  bool ordered() const {
    return kind == AttributeKind::numeric || kind == AttributeKind::temporal;
  }
  std::size_t bin_count() const { return bins.size(); }

  // Maps one raw cell to its bin; throws Error(domain) when it has none.
  BinIndex bin_of(std::string_view raw) const;
};

// Per-column ingestion settings, one entry of the schema_config document.
struct ColumnConfig {
  AttributeKind kind = AttributeKind::categorical;
  // categorical/geographic: the allowed values in bin order.
  std::vector<std::string> labels;
  // numeric: explicit edges, or an interval count over the observed range.
  std::vector<double> edges;
  std::optional<std::size_t> intervals;
  TemporalUnit temporal_unit = TemporalUnit::none;
};

using SchemaConfig = std::map<std::string, ColumnConfig>;

inline constexpr std::size_t kDefaultNumericIntervals = 10;

SchemaConfig parse_schema_config(const nlohmann::json& doc);

// Builds the bin domain of one attribute from its raw column values.
AttributeSchema discretize(std::string name, const ColumnConfig& config,
                           std::span<const std::string> raw_values);

// Immutable columnar table of bin indices.
class Dataset {
 public:
  Dataset(std::vector<AttributeSchema> schema,
          std::vector<std::vector<BinIndex>> columns);

  const std::vector<AttributeSchema>& schema() const { return schema_; }
  const AttributeSchema& attribute(AttributeId id) const;
  std::size_t attribute_count() const { return schema_.size(); }
  std::size_t record_count() const { return record_count_; }

  std::span<const BinIndex> column(AttributeId id) const;
  BinIndex cell(std::size_t row, AttributeId id) const {
    return columns_[id][row];
  }

  // Throws Error(not_found, "unknown_attribute").
  AttributeId attribute_id(std::string_view name) const;
  std::optional<AttributeId> find_attribute(std::string_view name) const;

 private:
  std::vector<AttributeSchema> schema_;
  std::vector<std::vector<BinIndex>> columns_;
  std::size_t record_count_ = 0;
};

// Parses CSV text (header row required) and bins every cell. Errors carry
// the 1-based row and the column name.
Dataset ingest(std::string_view csv_text, const SchemaConfig& config);

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

nlohmann::json schema_to_json(const Dataset& dataset);

}  // namespace subsetvis
