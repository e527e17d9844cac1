#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace isomer::verify {

struct CheckReport {
  std::string name;
  bool pass = false;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  std::uint64_t seed = 0;
  std::size_t cases = 0;
  nlohmann::json config = nlohmann::json::object();
  std::string detail;                 // worst location or failure reason
  std::vector<std::string> excluded;  // coordinates left out (routing-fragile)
};

/// "PASS name max_abs=... max_rel=... tol=... seed=... cases=... [detail]"
std::string format_line(const CheckReport& r);
nlohmann::json to_json(const CheckReport& r);

/// Reports ordered by name (stable for equal names).
std::vector<CheckReport> sorted_by_name(std::vector<CheckReport> reports);
bool all_pass(const std::vector<CheckReport>& reports);

/// {"pass": bool, "checks": [{"name", "pass", "max_rel_err", "max_abs_err", ...}]}
nlohmann::json summary_json(const std::vector<CheckReport>& reports);

}  // namespace isomer::verify
