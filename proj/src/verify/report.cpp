#include "isomer/verify/report.hpp"

#include <algorithm>
#include <cstdio>

namespace isomer::verify {

std::string format_line(const CheckReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s %s max_abs=%.3e max_rel=%.3e tol=%.1e seed=%llu cases=%zu",
                r.pass ? "PASS" : "FAIL", r.name.c_str(), r.max_abs_err, r.max_rel_err,
                r.tolerance, static_cast<unsigned long long>(r.seed), r.cases);
  std::string line = buf;
  if (!r.excluded.empty()) line += " excluded=" + std::to_string(r.excluded.size());
  if (!r.detail.empty()) line += " " + r.detail;
  return line;
}

nlohmann::json to_json(const CheckReport& r) {
  return {{"name", r.name},          {"pass", r.pass},
          {"max_abs_err", r.max_abs_err}, {"max_rel_err", r.max_rel_err},
          {"tolerance", r.tolerance}, {"seed", r.seed},
          {"cases", r.cases},        {"config", r.config},
          {"detail", r.detail},      {"excluded", r.excluded}};
}

std::vector<CheckReport> sorted_by_name(std::vector<CheckReport> reports) {
  std::stable_sort(reports.begin(), reports.end(),
                   [](const CheckReport& a, const CheckReport& b) { return a.name < b.name; });
  return reports;
}

bool all_pass(const std::vector<CheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const CheckReport& r) { return r.pass; });
}

nlohmann::json summary_json(const std::vector<CheckReport>& reports) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& r : sorted_by_name(reports)) checks.push_back(to_json(r));
  return {{"pass", all_pass(reports)}, {"checks", checks}};
}

}  // namespace isomer::verify
