#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "cfc/errors.hpp"
#include "cfc/mobility.hpp"

namespace cfc {
namespace {

constexpr const char* kTraceFormat = "cfc-trace";
constexpr int kTraceVersion = 1;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void write_trace(std::ostream& out, const ContactTrace& trace) {
  std::size_t rows = 0;
  for (const auto& r : trace.samples) rows += r.size();
  nlohmann::json header = {
      {"type", "header"},
      {"format", kTraceFormat},
      {"version", kTraceVersion},
      {"sample_dt", trace.sample_dt},
      {"duration", trace.duration},
      {"tx_radius", trace.tx_radius},
      {"num_nodes", trace.num_nodes},
      {"num_samples", trace.samples.size()},
      {"counts", {{"samples", rows}, {"contacts", trace.contacts.size()}, {"transitions", trace.transitions.size()}}},
      {"config", trace.config ? to_json(*trace.config) : nlohmann::json(nullptr)},
  };
  out << header.dump() << '\n';
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    for (const auto& s : trace.samples[k]) {
      nlohmann::json row = {{"type", "sample"}, {"k", k},           {"node", s.node}, {"link", s.link},
                            {"x", s.position.x}, {"y", s.position.y}, {"v", s.speed}};
      out << row.dump() << '\n';
    }
  }
  for (const auto& c : trace.contacts) {
    nlohmann::json row = {{"type", "contact"},    {"a", c.node_a},   {"b", c.node_b},
                          {"start", c.start_time}, {"end", c.end_time}, {"link_a", c.link_a},
                          {"link_b", c.link_b}};
    out << row.dump() << '\n';
  }
  for (const auto& t : trace.transitions) {
    nlohmann::json row = {{"type", "transition"}, {"node", t.node}, {"link", t.link}, {"time", t.time}};
    out << row.dump() << '\n';
  }
}

std::string serialize_trace(const ContactTrace& trace) {
  std::ostringstream os;
  write_trace(os, trace);
  return os.str();
}

ContactTrace parse_trace(std::istream& in) {
  ContactTrace trace;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto row = nlohmann::json::parse(line);
      const auto type = row.at("type").get<std::string>();
      if (!have_header) {
        if (type != "header" || row.at("format").get<std::string>() != kTraceFormat) {
          throw FormatError("trace must start with a cfc-trace header");
        }
        if (row.at("version").get<int>() != kTraceVersion) throw FormatError("unsupported trace version");
        trace.sample_dt = row.at("sample_dt").get<double>();
        trace.duration = row.at("duration").get<double>();
        trace.tx_radius = row.at("tx_radius").get<double>();
        trace.num_nodes = row.at("num_nodes").get<NodeId>();
        trace.samples.resize(row.at("num_samples").get<std::size_t>());
        if (!row.at("config").is_null()) trace.config = mobility_config_from_json(row.at("config"));
        have_header = true;
      } else if (type == "sample") {
        const auto k = row.at("k").get<std::size_t>();
        if (k >= trace.samples.size()) throw FormatError("sample index beyond header num_samples");
        trace.samples[k].push_back({row.at("node").get<NodeId>(), row.at("link").get<LinkId>(),
                                    {row.at("x").get<double>(), row.at("y").get<double>()},
                                    row.at("v").get<double>()});
      } else if (type == "contact") {
        trace.contacts.push_back({row.at("a").get<NodeId>(), row.at("b").get<NodeId>(),
                                  row.at("start").get<double>(), row.at("end").get<double>(),
                                  row.at("link_a").get<LinkId>(), row.at("link_b").get<LinkId>()});
      } else if (type == "transition") {
        trace.transitions.push_back({row.at("node").get<NodeId>(), row.at("link").get<LinkId>(),
                                     row.at("time").get<double>()});
      } else {
        throw FormatError("unknown trace row type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("trace line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!have_header) throw FormatError("empty trace file");
  validate_trace(trace);
  return trace;
}

void save_trace(const ContactTrace& trace, const std::filesystem::path& path) {
  const std::string text = serialize_trace(trace);
  if (ends_with(path.string(), ".gz")) {
    gzFile f = gzopen(path.string().c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write " + path.string());
    const int written = gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
    gzclose(f);
    if (written != static_cast<int>(text.size())) throw std::runtime_error("short write to " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ContactTrace load_trace(const std::filesystem::path& path) {
  // gzread passes uncompressed files through unchanged.
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::string text;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw FormatError("corrupt compressed trace " + path.string());
  std::istringstream in(text);
  return parse_trace(in);
}

}  // namespace cfc
