#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "subsetvis/dataset.hpp"
#include "subsetvis/error.hpp"

using namespace subsetvis;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorKind::invalid_argument;
}

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(Csv, QuotedFieldsAndCrlf) {
  const auto rows = parse_csv("a,b\r\n\"x, y\",\"he said \"\"hi\"\"\"\r\n3,\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "x, y");
  EXPECT_EQ(rows[1][1], "he said \"hi\"");
  ASSERT_EQ(rows[2].size(), 2u);
  EXPECT_EQ(rows[2][1], "");
}

TEST(Schema, NumericEdgesLastBinClosed) {
  ColumnConfig c;
  c.kind = AttributeKind::numeric;
  c.edges = {0.0, 1.0, 2.0};
  std::vector<std::string> raw{"0", "2"};
  const auto a = discretize("x", c, raw);
  ASSERT_EQ(a.bin_count(), 2u);
  EXPECT_EQ(a.bin_of("0"), 0u);
  EXPECT_EQ(a.bin_of("0.999"), 0u);
  EXPECT_EQ(a.bin_of("1"), 1u);
  EXPECT_EQ(a.bin_of("2"), 1u);
  EXPECT_EQ(kind_of([&] { a.bin_of("2.5"); }), ErrorKind::domain);
  EXPECT_EQ(code_of([&] { a.bin_of("abc"); }), "unparseable_value");
}

TEST(Schema, NumericIntervalsSpanObservedRange) {
  ColumnConfig c;
  c.kind = AttributeKind::numeric;
  c.intervals = 4;
  std::vector<std::string> raw{"10", "14", "12", "11"};
  const auto a = discretize("x", c, raw);
  ASSERT_EQ(a.edges.size(), 5u);
  EXPECT_DOUBLE_EQ(a.edges.front(), 10.0);
  EXPECT_DOUBLE_EQ(a.edges.back(), 14.0);
  EXPECT_EQ(a.bin_of("14"), 3u);
  EXPECT_EQ(a.bin_of("10"), 0u);
}

TEST(Schema, TemporalUnits) {
  ColumnConfig c;
  c.kind = AttributeKind::temporal;
  c.temporal_unit = TemporalUnit::day_of_week;
  const auto week = discretize("Week", c, {});
  ASSERT_EQ(week.bin_count(), 7u);
  EXPECT_TRUE(week.ordered());
  EXPECT_EQ(week.bin_of("Mon"), 0u);
  EXPECT_EQ(week.bin_of("Sun"), 6u);
  // 2024-03-16 was a Saturday.
  EXPECT_EQ(week.bin_of("2024-03-16 10:00:00"), 5u);

  c.temporal_unit = TemporalUnit::hour;
  const auto hour = discretize("Hour", c, {});
  ASSERT_EQ(hour.bin_count(), 24u);
  EXPECT_EQ(hour.bin_of("23"), 23u);
  EXPECT_EQ(hour.bin_of("07:45"), 7u);
  EXPECT_EQ(kind_of([&] { hour.bin_of("24"); }), ErrorKind::domain);

  c.temporal_unit = TemporalUnit::month;
  const auto month = discretize("Month", c, {});
  EXPECT_EQ(month.bin_of("Dec"), 11u);
  EXPECT_EQ(month.bin_of("1"), 0u);

  c.temporal_unit = TemporalUnit::none;
  EXPECT_EQ(code_of([&] { discretize("t", c, {}); }), "missing_temporal_unit");
}

TEST(Schema, CategoricalBinsSortedWhenNotGiven) {
  ColumnConfig c;
  std::vector<std::string> raw{"b", "a", "c", "a"};
  const auto a = discretize("t", c, raw);
  EXPECT_EQ(a.bins, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_FALSE(a.ordered());
}

TEST(Schema, ParseConfigRejectsBadDocuments) {
  EXPECT_EQ(code_of([] { parse_schema_config(nlohmann::json::array()); }), "bad_schema");
  EXPECT_EQ(code_of([] { parse_schema_config({{"x", {{"bins", {1}}}}}); }), "bad_schema");
  EXPECT_EQ(code_of([] { parse_schema_config({{"x", {{"kind", "weird"}}}}); }), "unknown_kind");
}

TEST(Ingest, BinsEveryCell) {
  const auto config = parse_schema_config(
      {{"Type", {{"kind", "categorical"}}},
       {"Age", {{"kind", "numeric"}, {"edges", {0, 18, 65, 120}}}},
       {"Week", {{"kind", "temporal"}, {"temporal_unit", "day_of_week"}}}});
  const auto ds = ingest("Type,Age,Week\ntheft,30,Sat\nfraud,70,Mon\ntheft,5,Sun\n", config);
  EXPECT_EQ(ds.record_count(), 3u);
  EXPECT_EQ(ds.attribute_count(), 3u);
  const auto age = ds.attribute_id("Age");
  EXPECT_EQ(ds.cell(0, age), 1u);
  EXPECT_EQ(ds.cell(1, age), 2u);
  EXPECT_EQ(ds.cell(2, age), 0u);
  EXPECT_EQ(ds.cell(0, ds.attribute_id("Type")), 1u);  // fraud < theft
  EXPECT_FALSE(ds.find_attribute("Nope").has_value());
  EXPECT_EQ(kind_of([&] { ds.attribute_id("Nope"); }), ErrorKind::not_found);
}

TEST(Ingest, ErrorNamesRowAndColumn) {
  const auto config = parse_schema_config({{"Week", {{"kind", "temporal"}, {"temporal_unit", "day_of_week"}}}});
  try {
    ingest("Week\nMon\nFunday\n", config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("Week"), std::string::npos);
    EXPECT_NE(msg.find('2'), std::string::npos);
  }
}

TEST(Ingest, SyntheticCrimeShape) {
  const auto ds = fixtures::crime_dataset(500);
  EXPECT_EQ(ds.record_count(), 500u);
  EXPECT_EQ(ds.attribute(ds.attribute_id("Week")).bin_count(), 7u);
  EXPECT_EQ(ds.attribute(ds.attribute_id("Hour")).bin_count(), 24u);
  EXPECT_EQ(ds.attribute(ds.attribute_id("Region")).kind, AttributeKind::geographic);
  const auto j = schema_to_json(ds);
  EXPECT_TRUE(j.is_object() || j.is_array());
}
