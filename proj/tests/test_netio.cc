#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "test_util.h"
#include "twostage/errors.h"
#include "twostage/netio.h"

namespace twostage {
namespace {

const char* kHeader2 =
    "<NUMBER OF ZONES> 2\n<NUMBER OF NODES> 2\n<FIRST THRU NODE> 1\n"
    "<NUMBER OF LINKS> 1\n<END OF METADATA>\n\n";

Network parse(const std::string& text, ParseReport* report = nullptr) {
  std::istringstream in(text);
  return parse_network(in, {}, report);
}

DemandSpec parse_t(const std::string& text, int zones = 0, ParseReport* report = nullptr) {
  std::istringstream in(text);
  return parse_trips(in, zones, report);
}

TEST(ParseNetwork, SingleLinkFieldMapping) {
  const auto net = parse(std::string(kHeader2) +
                         "~ init term cap len fft b power speed toll type ;\n"
                         "1 2 100 1 1.0 0.15 4 0 0 1 ;\n");
  EXPECT_EQ(net.num_nodes, 2);
  EXPECT_EQ(net.num_zones, 2);
  ASSERT_EQ(net.links.size(), 1u);
  EXPECT_EQ(net.links[0].tail, 0);
  EXPECT_EQ(net.links[0].head, 1);
  EXPECT_EQ(net.links[0].bpr, (BprParams{1.0, 100.0, 0.15, 0.25}));
}

TEST(ParseNetwork, SiouxFallsCounts) {
  const auto net = read_network(testing::sioux_falls_net());
  EXPECT_EQ(net.num_nodes, 24);
  EXPECT_EQ(net.num_links(), 76u);
  EXPECT_EQ(net.num_zones, 24);
}

TEST(ParseNetwork, LinkCountMismatchIsStructural) {
  std::string text =
      "<NUMBER OF ZONES> 2\n<NUMBER OF NODES> 3\n<NUMBER OF LINKS> 5\n<END OF METADATA>\n";
  text += "1 2 1 1 1 0.15 4 0 0 1 ;\n2 1 1 1 1 0.15 4 0 0 1 ;\n";
  text += "2 3 1 1 1 0.15 4 0 0 1 ;\n3 2 1 1 1 0.15 4 0 0 1 ;\n";
  EXPECT_THROW(parse(text), StructuralError);
}

TEST(ParseNetwork, MalformedTagReportsLine) {
  try {
    parse("<NUMBER OF ZONES> 2\n<NUMBER OF NODES 2\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(ParseNetwork, NonpositiveCapacityNamesLink) {
  try {
    parse(std::string(kHeader2) + "1 2 0 1 1.0 0.15 4 0 0 1 ;\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("link 1 (1->2)"), std::string::npos) << e.what();
  }
}

TEST(ParseNetwork, SelfLoopAndRangeRejected) {
  EXPECT_THROW(parse(std::string(kHeader2) + "1 1 5 1 1.0 0.15 4 0 0 1 ;\n"), ValidationError);
  EXPECT_THROW(parse(std::string(kHeader2) + "1 3 5 1 1.0 0.15 4 0 0 1 ;\n"), ValidationError);
}

TEST(ParseNetwork, ZeroFreeFlowFlooredAndReported) {
  ParseReport report;
  const auto net = parse(std::string(kHeader2) + "1 2 10 1 0 0.15 4 0 0 1 ;\n", &report);
  EXPECT_EQ(net.links[0].bpr.free_flow_time, 1e-6);
  ASSERT_EQ(report.notes.size(), 1u);
}

TEST(ParseNetwork, RoundTripThroughCanonicalWriter) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = testing::random_instance(rng, 6, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& l : inst.net.links) l.bpr.mu = 1.0 / (1.0 + 7.0 * u(rng));
    std::ostringstream out;
    write_network(out, inst.net);
    EXPECT_EQ(parse(out.str()), inst.net);
  }
  const auto sf = read_network(testing::sioux_falls_net());
  std::ostringstream out;
  write_network(out, sf);
  EXPECT_EQ(parse(out.str()), sf);
}

TEST(ParseTrips, RowAndColumnSums) {
  const auto d = parse_t("Origin 1\n 2 : 3.0; 3 : 1.0;\nOrigin 2\n 1 : 4.0;\n", 3);
  EXPECT_EQ(d.origin_totals, (std::vector<double>{4, 4, 0}));
  EXPECT_EQ(d.destination_totals, (std::vector<double>{4, 3, 1}));
  EXPECT_EQ(d.total, 8.0);
  ASSERT_EQ(d.od_support.size(), 3u);
  EXPECT_EQ(d.od_support[0], (OdEntry{0, 1, 3.0}));
}

TEST(ParseTrips, SiouxFallsTotal) {
  const auto d = read_trips(testing::sioux_falls_trips(), 24);
  EXPECT_DOUBLE_EQ(d.total, 360600.0);
  EXPECT_EQ(d.num_zones(), 24);
}

TEST(ParseTrips, HeaderTotalMismatchWarnsAndSumWins) {
  ParseReport report;
  const auto d =
      parse_t("<NUMBER OF ZONES> 2\n<TOTAL OD FLOW> 100\n<END OF METADATA>\nOrigin 1\n 2 : 10;\n",
              0, &report);
  EXPECT_EQ(d.total, 10.0);
  EXPECT_EQ(report.notes.size(), 1u);
}

TEST(ParseTrips, IntraZonalDroppedAndReported) {
  ParseReport report;
  const auto d = parse_t("Origin 1\n 1 : 5; 2 : 2;\n", 2, &report);
  EXPECT_EQ(d.total, 2.0);
  EXPECT_EQ(d.origin_totals[0], 2.0);
  EXPECT_EQ(d.od_support.size(), 1u);
  EXPECT_FALSE(report.notes.empty());
}

TEST(ParseTrips, RangeAndSignErrors) {
  EXPECT_THROW(parse_t("Origin 4\n 1 : 1;\n", 3), ValidationError);
  EXPECT_THROW(parse_t("Origin 1\n 9 : 1;\n", 3), ValidationError);
  EXPECT_THROW(parse_t("Origin 1\n 2 : -1;\n", 3), ValidationError);
}

TEST(ParseTrips, MarginalsSumExactly) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> vol(0.0, 1000.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::ostringstream text;
    for (int i = 1; i <= 7; ++i) {
      text << "Origin " << i << "\n";
      for (int j = 1; j <= 7; ++j) text << j << " : " << vol(rng) / 3.0 << ";";
      text << "\n";
    }
    const auto d = parse_t(text.str(), 7);
    const double sl = std::accumulate(d.origin_totals.begin(), d.origin_totals.end(), 0.0);
    const double sw =
        std::accumulate(d.destination_totals.begin(), d.destination_totals.end(), 0.0);
    EXPECT_EQ(sl, d.total);
    EXPECT_EQ(sw, d.total);
  }
}

}  // namespace
}  // namespace twostage
