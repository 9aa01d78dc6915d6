#pragma once

#include <string>
#include <vector>

namespace hkends::detail {

struct BundledScenario {
  std::string name;
  std::string text;
};

// Generated at configure time from scenarios/*.json.
const std::vector<BundledScenario>& bundled_scenarios();

}  // namespace hkends::detail
