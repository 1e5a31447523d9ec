#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "vflsim/netsim/network.hpp"

namespace vflsim::netsim {
namespace {

LinkModel unit_link(double p, std::uint64_t seed = 1) {
  LinkModel l;
  l.baseline_bps = 8.0;  // one byte per second
  l.slowdown_prob = p;
  l.divisor = 10.0;
  l.seed = seed;
  return l;
}

TEST(LinkModelTest, TransferArithmetic) {
  LinkModel clean;
  EXPECT_EQ(*clean.transfer_time(1'250'000, 1, 1, 0), std::chrono::seconds(1));
  LinkModel slow = clean;
  slow.slowdown_prob = 1.0;
  EXPECT_EQ(*slow.transfer_time(1'250'000, 1, 1, 0), std::chrono::seconds(10));
  LinkModel lat = clean;
  lat.latency_s = 0.25;
  EXPECT_EQ(*lat.transfer_time(1'250'000, 1, 1, 0), std::chrono::milliseconds(1250));
}

TEST(LinkModelTest, CleanLinksHaveNoVariance) {
  const LinkModel l = unit_link(0.0);
  for (int it = 1; it < 200; ++it)
    for (PartyId h = 1; h <= 4; ++h) EXPECT_EQ(*l.transfer_time(3, it, h, 0), std::chrono::seconds(3));
}

TEST(LinkModelTest, DrawsAreDeterministicAndKeyed) {
  const LinkModel a = unit_link(0.5, 7);
  const LinkModel b = unit_link(0.5, 7);
  const LinkModel c = unit_link(0.5, 8);
  int differ = 0;
  int slow = 0;
  for (int it = 1; it <= 2000; ++it) {
    EXPECT_EQ(a.slowed(it, 1, 0), b.slowed(it, 1, 0));
    differ += a.slowed(it, 1, 0) != c.slowed(it, 1, 0);
    slow += a.slowed(it, 2, 0);
  }
  EXPECT_GT(differ, 0);
  EXPECT_NEAR(slow / 2000.0, 0.5, 0.05);
}

TEST(LinkModelTest, PartyScopeSharesOutcome) {
  LinkModel l = unit_link(0.5, 3);
  l.scope = SlowdownScope::party;
  for (int it = 1; it <= 200; ++it) {
    const bool host = l.party_slowed(it, 2);
    const bool guest = l.party_slowed(it, 0);
    const bool arbiter = l.party_slowed(it, 5);
    EXPECT_EQ(l.slowed(it, 2, 0), host || guest);
    EXPECT_EQ(l.slowed(it, 2, 5), host || arbiter);
  }
}

TEST(LinkModelTest, DeadPartyNeverDelivers) {
  LinkModel l = unit_link(0.0);
  l.dead[2] = 3;
  EXPECT_TRUE(l.transfer_time(10, 2, 2, 0).has_value());
  EXPECT_FALSE(l.transfer_time(10, 3, 2, 0).has_value());
  EXPECT_FALSE(l.transfer_time(10, 4, 0, 2).has_value());
  EXPECT_TRUE(l.transfer_time(10, 4, 1, 0).has_value());
}

TEST(LinkModelTest, Validation) {
  LinkModel l;
  l.slowdown_prob = 1.5;
  EXPECT_THROW(l.validate(), ConfigError);
  l = LinkModel{};
  l.divisor = 0.5;
  EXPECT_THROW(l.validate(), ConfigError);
  l = LinkModel{};
  l.baseline_bps = 0;
  EXPECT_THROW(l.validate(), ConfigError);
}

TEST(EventQueueTest, TimeThenInsertionOrder) {
  EventQueue<int> q;
  q.push(SimTime(5), 1);
  q.push(SimTime(3), 2);
  q.push(SimTime(5), 3);
  q.push(SimTime(3), 4);
  std::vector<int> order;
  while (!q.empty()) order.push_back(q.pop().payload);
  EXPECT_EQ(order, (std::vector<int>{2, 4, 1, 3}));
}

TEST(SimClockTest, MonotoneAndBusyMarkers) {
  SimClock clock(3);
  clock.advance_to(SimTime(10));
  EXPECT_THROW(clock.advance_to(SimTime(9)), Error);
  EXPECT_EQ(clock.reserve(1, SimTime(5), SimDuration(4)), SimTime(10));
  EXPECT_EQ(clock.busy_until(1), SimTime(14));
  EXPECT_EQ(clock.reserve(1, SimTime(12), SimDuration(1)), SimTime(14));
  EXPECT_EQ(clock.busy_until(1), SimTime(15));
}

TEST(CommTimeOracle, EnumerationExamples) {
  using testing_oracles::enumerate_expected_wait;
  EXPECT_DOUBLE_EQ(enumerate_expected_wait(3, 0, 0.5, 10), 8.875);
  EXPECT_DOUBLE_EQ(enumerate_expected_wait(3, 1, 0.5, 10), 5.5);
  EXPECT_DOUBLE_EQ(enumerate_expected_wait(3, 2, 0.5, 10), 2.125);
}

TEST(CommTimeOracle, MonteCarloAgreesWithEnumeration) {
  for (int k = 1; k <= 4; ++k) {
    for (double p : {0.25, 0.5}) {
      for (int beta = 0; beta < k; ++beta) {
        const LinkModel l = unit_link(p, 100 + static_cast<std::uint64_t>(k));
        const double mc = mean_round_comm_time(k, beta, l, 1, 20000);
        const double exact = testing_oracles::enumerate_expected_wait(k, beta, p, 10);
        EXPECT_LT(std::abs(mc - exact) / exact, 0.03) << "K=" << k << " beta=" << beta << " p=" << p;
      }
    }
  }
}

TEST(CommTimeOracle, CleanModeIgnoresBackups) {
  const LinkModel l = unit_link(0.0);
  for (int beta = 0; beta < 3; ++beta) EXPECT_DOUBLE_EQ(mean_round_comm_time(3, beta, l, 2, 50), 2.0);
  EXPECT_THROW(round_comm_time(3, 3, l, 1, 1), ConfigError);
}

TEST(NetworkTest, BytesAndTraceAgree) {
  Network net(unit_link(0.0));
  EXPECT_EQ(*net.send("forward_share", 4, 1, 0, SimTime(std::chrono::seconds(2)), 1),
            SimTime(std::chrono::seconds(6)));
  net.send("residual_share", 6, 0, 1, SimTime(0), 1);
  EXPECT_EQ(net.total_bytes(), 10u);
  EXPECT_EQ(net.message_count(), 2u);
  std::ostringstream out;
  net.write_trace_jsonl(out);
  std::istringstream in(out.str());
  std::string line;
  std::size_t bytes = 0;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    bytes += j["bytes"].get<std::size_t>();
    ++lines;
  }
  EXPECT_EQ(lines, 2u);
  EXPECT_EQ(bytes, net.total_bytes());
  EXPECT_NE(out.str().find("\"send_ns\":2000000000"), std::string::npos);
}

}  // namespace
}  // namespace vflsim::netsim
