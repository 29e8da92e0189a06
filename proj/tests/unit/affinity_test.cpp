#include <numeric>

#include <gtest/gtest.h>

#include "hetadmit/affinity.hpp"
#include "test_util.hpp"

using namespace hetadmit;
using testutil::error_code;

namespace {

std::vector<std::uint32_t> descending(std::uint32_t hi, std::uint32_t lo) {
  std::vector<std::uint32_t> out;
  for (auto c = hi + 1; c-- > lo;) out.push_back(c);
  return out;
}

}  // namespace

TEST(Affinity, LatterNumaNodesOfLargeHost) {
  const auto plan = recommend_affinity(128, 4, 0.25);
  EXPECT_EQ(plan.cores(), descending(127, 32));
  ASSERT_EQ(plan.groups.size(), 3u);
  EXPECT_EQ(plan.groups[0].numa, 3u);
  EXPECT_EQ(plan.groups[1].numa, 2u);
  EXPECT_EQ(plan.groups[2].numa, 1u);
  for (const auto& g : plan.groups) EXPECT_EQ(g.cores.size(), 32u);
  EXPECT_EQ(plan.reserved.size(), 32u);
}

TEST(Affinity, NoReservation) {
  const auto plan = recommend_affinity(8, 1, 0.0);
  EXPECT_EQ(plan.cores(), descending(7, 0));
  EXPECT_TRUE(plan.reserved.empty());
}

TEST(Affinity, ReservationFillsLowestNumaNode) {
  const auto plan = recommend_affinity(12, 4, 0.25);
  EXPECT_EQ(plan.cores(), descending(11, 3));
  EXPECT_EQ(plan.reserved, (std::vector<std::uint32_t>{0, 1, 2}));
  ASSERT_EQ(plan.groups.size(), 3u);
  EXPECT_EQ(plan.groups.back().numa, 1u);
  EXPECT_EQ(plan.groups.back().cores, (std::vector<std::uint32_t>{5, 4, 3}));
}

TEST(Affinity, GroupsNeverCrossNumaNodes) {
  for (std::uint32_t numa = 1; numa <= 8; ++numa) {
    for (std::uint32_t per = 1; per <= 16; ++per) {
      const auto plan = recommend_affinity(numa * per, numa, 0.3);
      std::uint32_t total = 0;
      for (const auto& g : plan.groups) {
        for (auto c : g.cores) EXPECT_EQ(c / per, g.numa);
        total += static_cast<std::uint32_t>(g.cores.size());
      }
      EXPECT_EQ(total + plan.reserved.size(), numa * per);
    }
  }
}

TEST(Affinity, InvalidTopology) {
  EXPECT_EQ(error_code([] { recommend_affinity(0, 1, 0.0); }), Errc::InvalidTopology);
  EXPECT_EQ(error_code([] { recommend_affinity(8, 0, 0.0); }), Errc::InvalidTopology);
  EXPECT_EQ(error_code([] { recommend_affinity(10, 4, 0.0); }), Errc::InvalidTopology);
  EXPECT_EQ(error_code([] { recommend_affinity(8, 2, 1.0); }), Errc::InvalidTopology);
  EXPECT_EQ(error_code([] { recommend_affinity(8, 2, -0.1); }), Errc::InvalidTopology);
}
