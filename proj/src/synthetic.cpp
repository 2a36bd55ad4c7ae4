#include "subsetvis/synthetic.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "subsetvis/rng.hpp"

namespace subsetvis {

namespace {

constexpr std::array<const char*, 16> kTypes = {
    "theft",      "battery",   "criminal_damage", "narcotics",   "assault",  "burglary",
    "motor_theft", "robbery",  "deceptive",       "trespass",    "weapons",  "prostitution",
    "public_peace", "offense_child", "homicide",  "gambling"};
constexpr std::array<const char*, 7> kDays = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
constexpr std::array<const char*, 12> kMonths = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                 "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

std::size_t draw(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace

SyntheticTable make_crime_like(std::size_t records, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> type_w(kTypes.size());
  for (std::size_t t = 0; t < type_w.size(); ++t) type_w[t] = 1.0 / (1.0 + 0.35 * static_cast<double>(t));

  // Types 0, 2, 7, 11 lean to weekends; the rest to weekdays.
  auto weekend_bias = [](std::size_t t) { return t == 0 || t == 2 || t == 7 || t == 11; };

  std::string csv = "Type,Week,Hour,Region,Month\n";
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t type = draw(rng, type_w);
    std::vector<double> day_w(7, 1.0);
    for (std::size_t d = 5; d < 7; ++d) day_w[d] = weekend_bias(type) ? 2.2 : 0.7;
    const std::size_t day = draw(rng, day_w);
    const bool weekend = day >= 5;

    std::vector<double> hour_w(24);
    for (std::size_t h = 0; h < 24; ++h) {
      const double x = static_cast<double>(h);
      // Weekday peak mid-afternoon, weekend peak around midnight.
      const double centre = weekend ? 23.0 : 15.0;
      double d = std::fabs(x - centre);
      d = std::min(d, 24.0 - d);
      hour_w[h] = 0.15 + std::exp(-d * d / (weekend ? 8.0 : 18.0));
    }
    const std::size_t hour = draw(rng, hour_w);

    std::vector<double> region_w(10);
    for (std::size_t g = 0; g < 10; ++g) {
      region_w[g] = 1.0 + ((g + type) % 10 < 3 ? 1.5 : 0.0);
    }
    const std::size_t region = draw(rng, region_w);

    std::vector<double> month_w(12);
    for (std::size_t m = 0; m < 12; ++m) {
      month_w[m] = 1.0 + 0.3 * std::sin(2.0 * 3.141592653589793 * static_cast<double>(m) / 12.0);
    }
    const std::size_t month = draw(rng, month_w);

    csv += kTypes[type];
    csv += ',';
    csv += kDays[day];
    csv += ',';
    csv += std::to_string(hour);
    csv += ",R";
    csv += std::to_string(region + 1);
    csv += ',';
    csv += kMonths[month];
    csv += '\n';
  }

  nlohmann::json regions = nlohmann::json::array();
  for (int g = 1; g <= 10; ++g) regions.push_back("R" + std::to_string(g));
  nlohmann::json types = nlohmann::json::array();
  for (const char* t : kTypes) types.push_back(t);
  nlohmann::json schema = {
      {"Type", {{"kind", "categorical"}, {"bins", types}}},
      {"Week", {{"kind", "temporal"}, {"temporal_unit", "day_of_week"}}},
      {"Hour", {{"kind", "temporal"}, {"temporal_unit", "hour"}}},
      {"Region", {{"kind", "geographic"}, {"bins", regions}}},
      {"Month", {{"kind", "temporal"}, {"temporal_unit", "month"}}},
  };
  return {std::move(csv), std::move(schema)};
}

}  // namespace subsetvis
