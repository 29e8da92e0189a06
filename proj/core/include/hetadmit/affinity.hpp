#pragma once

#include <cstdint>
#include <vector>

namespace hetadmit {

struct NumaGroup {
  std::uint32_t numa = 0;
  /// Descending core indices, all inside this NUMA node.
  std::vector<std::uint32_t> cores;

  friend bool operator==(const NumaGroup&, const NumaGroup&) = default;
};

struct AffinityPlan {
  /// Lowest-index cores kept for the service framework and accelerator feeding.
  std::vector<std::uint32_t> reserved;
  /// Offload worker cores, highest NUMA node first.
  std::vector<NumaGroup> groups;

  /// All offload cores in descending order.
  std::vector<std::uint32_t> cores() const;
};

/// Advisory core binding for CPU offload workers: reserve
/// floor(reserve_fraction * total_cores) low cores, hand out the rest in
/// reversed order without any worker block crossing a NUMA boundary.
/// Throws Error(InvalidTopology).
AffinityPlan recommend_affinity(std::uint32_t total_cores, std::uint32_t numa_count,
                                double reserve_fraction);

}  // namespace hetadmit
