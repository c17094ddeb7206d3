#include <gtest/gtest.h>

#include <sstream>

#include "cfc/errors.hpp"
#include "cfc/mobility.hpp"
#include "fixtures.hpp"

namespace cfc {
namespace {

NodeSample at(NodeId n, LinkId l, double x, double y) { return {n, l, {x, y}, 0.0}; }

TEST(TraceIo, PlainAndGzipRoundTrip) {
  const ContactTrace tr = test::desk_trace(3);
  test::TempDir dir("trace_io");
  save_trace(tr, dir / "t.ndjson");
  save_trace(tr, dir / "t.ndjson.gz");
  const std::string text = serialize_trace(tr);
  EXPECT_EQ(test::slurp(dir / "t.ndjson"), text);
  EXPECT_LT(std::filesystem::file_size(dir / "t.ndjson.gz"), text.size());
  EXPECT_EQ(serialize_trace(load_trace(dir / "t.ndjson")), text);
  EXPECT_EQ(serialize_trace(load_trace(dir / "t.ndjson.gz")), text);
  const ContactTrace back = load_trace(dir / "t.ndjson.gz");
  ASSERT_TRUE(back.config.has_value());
  EXPECT_EQ(to_json(*back.config), to_json(*tr.config));
}

TEST(TraceIo, RejectsMalformedInput) {
  std::istringstream empty("");
  EXPECT_THROW(parse_trace(empty), FormatError);
  std::istringstream no_header("{\"type\":\"sample\"}\n");
  EXPECT_THROW(parse_trace(no_header), FormatError);
  std::istringstream garbage("not json\n");
  EXPECT_THROW(parse_trace(garbage), FormatError);
  test::TempDir dir("trace_bad");
  {
    std::ofstream f(dir / "x.gz", std::ios::binary);
    f << "\x1f\x8b garbage";
  }
  EXPECT_THROW(load_trace(dir / "x.gz"), FormatError);
  EXPECT_THROW(load_trace(dir / "missing.ndjson"), std::runtime_error);
}

TEST(TraceIo, InjectDerivesTransitions) {
  std::vector<std::vector<NodeSample>> rows = {
      {at(0, 0, 10, 0), at(1, 0, 40, 0)},
      {at(0, 0, 20, 0), at(1, 0, 50, 0)},
      {at(0, 1, 30, 0)},
  };
  const ContactTrace tr = inject_trace(1.0, 2.0, 50.0, rows, {{0, 1, 0.0, 1.0, 0, 0}});
  EXPECT_EQ(tr.num_nodes, 2);
  const std::vector<LinkTransition> want = {{0, 0, 0.0}, {1, 0, 0.0}, {0, 1, 2.0}, {1, kNoLink, 2.0}};
  EXPECT_EQ(tr.transitions, want);
}

TEST(TraceIo, InjectRejectsInconsistentTraces) {
  std::vector<std::vector<NodeSample>> rows = {{at(0, 0, 0, 0), at(1, 0, 40, 0)}, {at(0, 0, 0, 0), at(1, 0, 40, 0)}};
  // out of range
  EXPECT_THROW(inject_trace(1.0, 1.0, 30.0, rows, {{0, 1, 0.0, 1.0, 0, 0}}), ValidationError);
  // node absent during the contact
  EXPECT_THROW(inject_trace(1.0, 1.0, 50.0, {rows[0], {at(0, 0, 0, 0)}}, {{0, 1, 0.0, 1.0, 0, 0}}),
               ValidationError);
  // self contact, wrong start link, off-grid time, past the end
  EXPECT_THROW(inject_trace(1.0, 1.0, 50.0, rows, {{1, 1, 0.0, 1.0, 0, 0}}), ValidationError);
  EXPECT_THROW(inject_trace(1.0, 1.0, 50.0, rows, {{0, 1, 0.0, 1.0, 0, 2}}), ValidationError);
  EXPECT_THROW(inject_trace(1.0, 1.0, 50.0, rows, {{0, 1, 0.5, 1.0, 0, 0}}), ValidationError);
  EXPECT_THROW(inject_trace(1.0, 1.0, 50.0, rows, {{0, 1, 0.0, 2.0, 0, 0}}), ValidationError);
  // overlapping contacts of one pair
  EXPECT_THROW(inject_trace(1.0, 1.0, 50.0, rows, {{0, 1, 0.0, 0.0, 0, 0}, {0, 1, 1.0, 1.0, 0, 0}}),
               ValidationError);
  // transitions that disagree with samples
  EXPECT_THROW(inject_trace(1.0, 1.0, 50.0, rows, {}, {{0, 0, 0.0}}), ValidationError);
  // too many sample rows
  EXPECT_THROW(inject_trace(1.0, 0.0, 50.0, rows, {}), ValidationError);
}

}  // namespace
}  // namespace cfc
