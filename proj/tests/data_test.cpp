#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "vflsim/data/dataset.hpp"
#include "vflsim/protocol/auc.hpp"

namespace vflsim::data {
namespace {

PartyTable small_table(bool with_labels) {
  PartyTable t;
  t.ids = {"a", "b", "c"};
  t.feature_names = {"f1", "f2"};
  t.features = Matrix{{1.5, -2}, {0.1, 1e-17}, {3, 4.25}};
  if (with_labels) t.labels = Vector{1, 0, 1};
  return t;
}

TEST(Csv, RoundTripsThroughDisk) {
  const auto path = std::filesystem::temp_directory_path() / "vflsim_roundtrip.csv";
  const PartyTable t = small_table(true);
  save_csv(path.string(), t);
  CsvSchema schema;
  schema.label_column = "label";
  const PartyTable back = load_csv(path.string(), schema);
  EXPECT_EQ(back.ids, t.ids);
  EXPECT_EQ(back.feature_names, t.feature_names);
  EXPECT_EQ(back.features, t.features);
  EXPECT_EQ(back.labels, t.labels);
  std::filesystem::remove(path);
}

TEST(Csv, HostWithoutLabelColumn) {
  std::istringstream in("id,x,y\n1,2,3\n2,4,5\n");
  const PartyTable t = parse_csv(in, CsvSchema{});
  EXPECT_FALSE(t.labels.has_value());
  EXPECT_EQ(t.features, (Matrix{{2, 3}, {4, 5}}));
}

TEST(Csv, ExplicitFeatureColumns) {
  std::istringstream in("x,id,y,z\n1,r1,2,3\n");
  CsvSchema s;
  s.feature_columns = {"z", "x"};
  const PartyTable t = parse_csv(in, s);
  EXPECT_EQ(t.features, (Matrix{{3, 1}}));
  EXPECT_EQ(t.ids, (std::vector<std::string>{"r1"}));
}

void expect_parse_error(const std::string& text, const std::string& fragment,
                        const CsvSchema& schema = {}) {
  std::istringstream in(text);
  try {
    parse_csv(in, schema, "f.csv");
    FAIL() << "no error for: " << text;
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(Csv, ErrorsCarryLineNumbers) {
  expect_parse_error("id,x\n1,2\n2,abc\n", "f.csv:3: non-numeric cell 'abc'");
  expect_parse_error("id,x\n1,2\n1,3\n", "f.csv:3: duplicate id '1'");
  expect_parse_error("id,x\n1,2,3\n", "f.csv:2: expected 2 cells");
  expect_parse_error("key,x\n1,2\n", "f.csv:1: missing id column");
  expect_parse_error("id,x\n1,\n", "f.csv:2: non-numeric cell ''");
  expect_parse_error("id,x\n1,nan\n", "non-numeric");
  CsvSchema s;
  s.label_column = "y";
  expect_parse_error("id,x\n1,2\n", "missing label column 'y'", s);
  expect_parse_error("", "empty file");
}

TEST(Alignment, DetectsOrderMismatch) {
  PartyTable guest = small_table(true);
  PartyTable host = small_table(false);
  const PartyTable ok[] = {guest, host};
  EXPECT_NO_THROW(check_alignment(ok));
  std::swap(host.ids[0], host.ids[1]);
  const PartyTable bad[] = {guest, host};
  EXPECT_THROW(check_alignment(bad), AlignmentError);
  host = small_table(false);
  host.ids.pop_back();
  const PartyTable short_rows[] = {guest, host};
  EXPECT_THROW(check_alignment(short_rows), AlignmentError);
  const PartyTable two_labels[] = {guest, guest};
  EXPECT_THROW(check_alignment(two_labels), AlignmentError);
  const PartyTable unlabeled[] = {small_table(false)};
  EXPECT_THROW(check_alignment(unlabeled), AlignmentError);
}

TEST(Alignment, FromTablesKeepsOrder) {
  const PartyTable tables[] = {small_table(true), small_table(false)};
  const auto ds = from_tables(tables);
  EXPECT_EQ(ds.feature_counts(), (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(ds.y, (Vector{1, 0, 1}));
}

TEST(VerticalSplit, FourPartySplitCounts) {
  Matrix x(5, 714);
  for (std::size_t j = 0; j < 714; ++j) x(0, j) = static_cast<double>(j);
  const std::size_t counts[] = {114, 200, 200, 200};
  const auto ds = vertical_split(x, Vector(5, 0.0), counts, 42);
  ASSERT_EQ(ds.parts.size(), 4u);
  EXPECT_EQ(ds.feature_counts(), (std::vector<std::size_t>{114, 200, 200, 200}));
  EXPECT_EQ(ds.total_features(), 714u);
  EXPECT_EQ(reassemble(ds), x);
}

TEST(VerticalSplit, SinglePartyIsAPermutation) {
  const Matrix x{{1, 2, 3}, {4, 5, 6}};
  const std::size_t counts[] = {3};
  const auto ds = vertical_split(x, Vector{0, 1}, counts, 7);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(ds.parts[0].column(j), x.column(ds.column_order[j]));
  }
  EXPECT_EQ(reassemble(ds), x);
}

TEST(VerticalSplit, RejectsBadCounts) {
  const Matrix x(2, 3);
  const std::size_t wrong[] = {1, 1};
  EXPECT_THROW(vertical_split(x, Vector(2, 0.0), wrong, 1), ConfigError);
  const std::size_t zero[] = {3, 0};
  EXPECT_THROW(vertical_split(x, Vector(2, 0.0), zero, 1), ConfigError);
}

TEST(VerticalSplit, SeedControlsShuffle) {
  Matrix x(1, 50);
  const std::size_t counts[] = {25, 25};
  const auto a = vertical_split(x, Vector{0}, counts, 1);
  const auto b = vertical_split(x, Vector{0}, counts, 1);
  const auto c = vertical_split(x, Vector{0}, counts, 2);
  EXPECT_EQ(a.column_order, b.column_order);
  EXPECT_NE(a.column_order, c.column_order);
}

TEST(Standardize, ZeroMeanUnitVariance) {
  Matrix x{{1, 5, 2}, {2, 5, 4}, {3, 5, 9}};
  standardize(x);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0;
    double sq = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      mean += x(i, j);
      sq += x(i, j) * x(i, j);
    }
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(sq / 3.0, j == 1 ? 0.0 : 1.0, 1e-12);
  }
}

TEST(Synth, NoiselessRankIsExact) {
  SynthConfig cfg;
  cfg.rows = 60;
  cfg.features = 10;
  cfg.rank = 2;
  cfg.noise = 0.0;
  cfg.margin = 0.5;
  const auto s = synth(cfg);
  Eigen::MatrixXd ex(60, 10);
  for (int i = 0; i < 60; ++i)
    for (int j = 0; j < 10; ++j) ex(i, j) = s.x(i, j);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(ex);
  lu.setThreshold(1e-10);
  EXPECT_EQ(lu.rank(), 2);
}

TEST(Synth, SameSeedSameBytes) {
  SynthConfig cfg;
  cfg.rows = 40;
  cfg.features = 6;
  cfg.rank = 3;
  cfg.seed = 9;
  const auto a = synth(cfg);
  const auto b = synth(cfg);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  cfg.seed = 10;
  EXPECT_NE(synth(cfg).x, a.x);
}

TEST(Synth, RejectsBadShapes) {
  SynthConfig cfg;
  cfg.rank = cfg.features + 1;
  EXPECT_THROW(synth(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.rows = 0;
  EXPECT_THROW(synth(cfg), ConfigError);
}

// Large margin: plain gradient descent on the Taylor logistic loss reaches
// near-perfect ranking.
TEST(Synth, LargeMarginIsLearnable) {
  SynthConfig cfg;
  cfg.rows = 800;
  cfg.features = 12;
  cfg.rank = 4;
  cfg.noise = 0.05;
  cfg.margin = 1.0;
  cfg.seed = 3;
  const auto s = synth(cfg);
  Vector y(s.y.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 2 * s.y[i] - 1;
  Vector theta(cfg.features, 0.0);
  for (int it = 0; it < 200; ++it) {
    const Vector g = testing_oracles::central_gradient(s.x, theta, y, 1, 0.0);
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= 0.1 / 800.0 * g[j];
  }
  EXPECT_GE(protocol::auc(matvec(s.x, theta), s.y), 0.99);
}

}  // namespace
}  // namespace vflsim::data
