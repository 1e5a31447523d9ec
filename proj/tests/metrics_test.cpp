#include <gtest/gtest.h>

#include <sstream>

#include "vflsim/metrics/metrics.hpp"

namespace vflsim::metrics {
namespace {

using std::chrono::seconds;

IterationRecord sample_record(int t) {
  IterationRecord r;
  r.iteration = t;
  r.phases.computation = seconds(3);
  r.phases.encryption = seconds(2);
  r.phases.communication = SimDuration(123456789);
  r.phases.other = seconds(2);
  r.start = seconds(10 * (t - 1));
  r.end = seconds(10 * t);
  if (t % 2 == 0) r.loss = 0.25 / t;
  r.objective = 1.0 / 3.0;
  r.auc = 0.875;
  r.ops = {100, 50, 20, 4};
  r.gradient_enc_mul = 80;
  r.arrival_order = {2, 1};
  r.compensated = {3};
  r.staleness = {1};
  r.blocked_on_staleness = t == 3;
  r.bytes = 4096;
  r.messages = 9;
  return r;
}

TEST(PhaseBreakdown, TotalIsTheSumOfPhases) {
  PhaseBreakdown p;
  p.attribute(Phase::computation, seconds(1));
  p.attribute(Phase::encryption, seconds(2));
  p.attribute(Phase::communication, seconds(4));
  p.attribute(Phase::other, seconds(8));
  p.attribute(Phase::computation, seconds(16));
  EXPECT_EQ(p.total(), seconds(31));
  EXPECT_EQ(p.computation, seconds(17));
}

TEST(PhaseBreakdown, RejectsNegativeDurations) {
  PhaseBreakdown p;
  EXPECT_THROW(p.attribute(Phase::communication, SimDuration(-1)), Error);
  EXPECT_EQ(p.total(), SimDuration::zero());
}

TEST(RunMetrics, Aggregates) {
  RunMetrics m;
  for (int t = 1; t <= 4; ++t) m.iterations.push_back(sample_record(t));
  m.iterations[2].staleness = {1, 3};
  m.iterations[2].compensated = {1, 2};
  EXPECT_EQ(m.totals().computation, seconds(12));
  EXPECT_EQ(m.total_ops().enc_mul, 400u);
  EXPECT_EQ(m.total_gradient_enc_mul(), 320u);
  EXPECT_EQ(m.total_bytes(), 4u * 4096u);
  EXPECT_EQ(m.compensation_events(), 5u);
  EXPECT_EQ(m.max_staleness_seen(), 3);
}

TEST(Jsonl, RoundTripIsExact) {
  RunMetrics m;
  for (int t = 1; t <= 5; ++t) m.iterations.push_back(sample_record(t));
  std::stringstream s;
  write_jsonl(s, m);
  const auto back = read_jsonl(s);
  EXPECT_EQ(back, m.iterations);
}

TEST(Jsonl, BadLineNamesItsNumber) {
  std::stringstream s;
  s << nlohmann::json(to_json(sample_record(1))).dump() << "\n{\"iteration\":2}\n";
  try {
    read_jsonl(s);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Summary, HeaderAndRowAgreeOnColumnCount) {
  RunMetrics m;
  m.label = "x";
  m.iterations.push_back(sample_record(1));
  m.iterations.push_back(sample_record(2));
  std::stringstream h;
  std::stringstream r;
  write_summary_header(h, {"seed"});
  write_summary_row(r, m, {"7"});
  auto count = [](const std::string& line) { return std::count(line.begin(), line.end(), ','); };
  EXPECT_EQ(count(h.str()), count(r.str()));
  EXPECT_EQ(r.str().rfind("7,x,2,1,", 0), 0u) << r.str();
}

TEST(ModeTable, ReferenceLayoutAndReductions) {
  const auto ref = reference_table();
  ASSERT_EQ(ref.size(), 4u);
  EXPECT_EQ(ref[0].mode, "Origin");
  EXPECT_EQ(ref[3].mode, "Ours");
  EXPECT_EQ(format_fixed(reduction_pct(ref[0].comm, ref[3].comm)), "67.1");
  EXPECT_EQ(format_fixed(reduction_pct(ref[0].comp, ref[2].comp)), "40.4");
  EXPECT_DOUBLE_EQ(ref[1].sum(), 141.9);

  std::stringstream out;
  write_mode_table(out, {{"Origin", 10, 30}, {"Ours", 5, 10}}, ref);
  const std::string text = out.str();
  EXPECT_NE(text.find("measured,Sum,40.000,0.0,15.000,62.5"), std::string::npos) << text;
  EXPECT_NE(text.find("reference,Comm.,141.000,0.0"), std::string::npos) << text;
}

TEST(ModeTable, ModeTimesFoldEncryptionIntoComputation) {
  RunMetrics m;
  m.iterations.push_back(sample_record(1));
  const auto t = mode_times("Origin", m, 60.0);
  EXPECT_DOUBLE_EQ(t.comp, 5.0 / 60.0);
  EXPECT_DOUBLE_EQ(t.comm, 0.123456789 / 60.0);
}

}  // namespace
}  // namespace vflsim::metrics
