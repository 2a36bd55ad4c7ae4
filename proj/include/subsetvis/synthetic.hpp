#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace subsetvis {

// A generated crime-log style table: Type (16 categories), Week, Hour,
// Region (10 units) and Month, with planted weekday/weekend and night-time
// patterns.
struct SyntheticTable {
  std::string csv;
  nlohmann::json schema;
};

SyntheticTable make_crime_like(std::size_t records, std::uint64_t seed);

}  // namespace subsetvis
