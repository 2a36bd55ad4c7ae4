#pragma once

#include <memory>

#include "subsetvis/dataset.hpp"
#include "subsetvis/synthetic.hpp"

namespace subsetvis::fixtures {

inline Dataset crime_dataset(std::size_t records, std::uint64_t seed = 1) {
  const auto t = make_crime_like(records, seed);
  return ingest(t.csv, parse_schema_config(t.schema));
}

inline std::shared_ptr<const Dataset> shared_crime(std::size_t records, std::uint64_t seed = 1) {
  return std::make_shared<const Dataset>(crime_dataset(records, seed));
}

}  // namespace subsetvis::fixtures
