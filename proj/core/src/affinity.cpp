#include "hetadmit/affinity.hpp"

#include <cmath>
#include <string>

#include "hetadmit/error.hpp"

namespace hetadmit {

std::vector<std::uint32_t> AffinityPlan::cores() const {
  std::vector<std::uint32_t> out;
  for (const auto& g : groups) out.insert(out.end(), g.cores.begin(), g.cores.end());
  return out;
}

AffinityPlan recommend_affinity(std::uint32_t total_cores, std::uint32_t numa_count,
                                double reserve_fraction) {
  if (total_cores == 0 || numa_count == 0) {
    throw Error(Errc::InvalidTopology, "core and NUMA counts must be >= 1");
  }
  if (total_cores % numa_count != 0) {
    throw Error(Errc::InvalidTopology, std::to_string(total_cores) +
                                           " cores do not split evenly over " +
                                           std::to_string(numa_count) + " NUMA nodes");
  }
  if (!(reserve_fraction >= 0.0) || !(reserve_fraction < 1.0)) {
    throw Error(Errc::InvalidTopology, "reserve fraction must be in [0, 1)");
  }

  const auto reserved =
      static_cast<std::uint32_t>(std::floor(reserve_fraction * static_cast<double>(total_cores)));
  if (reserved >= total_cores) {
    throw Error(Errc::InvalidTopology, "reservation leaves no cores for offload workers");
  }
  const std::uint32_t per_numa = total_cores / numa_count;

  AffinityPlan plan;
  for (std::uint32_t c = 0; c < reserved; ++c) plan.reserved.push_back(c);
  for (std::uint32_t numa = numa_count; numa-- > 0;) {
    NumaGroup group{numa, {}};
    const std::uint32_t first = numa * per_numa;
    for (std::uint32_t c = first + per_numa; c-- > first;) {
      if (c < reserved) break;
      group.cores.push_back(c);
    }
    if (!group.cores.empty()) plan.groups.push_back(std::move(group));
  }
  return plan;
}

}  // namespace hetadmit
