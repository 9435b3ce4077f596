#include "twostage/netio.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string_view>

#include "twostage/errors.h"

namespace twostage {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string_view strip_comment(std::string_view s) {
  const auto tilde = s.find('~');
  return tilde == std::string_view::npos ? s : s.substr(0, tilde);
}

std::optional<double> to_double(std::string_view s) {
  double value = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::optional<long> to_long(std::string_view s) {
  long value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    // Accept integral values written as "24.0".
    const auto d = to_double(s);
    if (d && std::floor(*d) == *d && std::abs(*d) < 1e15) return static_cast<long>(*d);
    return std::nullopt;
  }
  return value;
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

struct MetadataTag {
  std::string name;
  std::string value;
};

// Parses "<TAG> value". Throws on a missing closing bracket.
MetadataTag parse_tag(std::string_view line, int line_no) {
  const auto close = line.find('>');
  if (line.empty() || line.front() != '<' || close == std::string_view::npos) {
    throw ParseError("malformed metadata tag '" + std::string(line) + "'", line_no);
  }
  return {upper(trim(line.substr(1, close - 1))),
          std::string(trim(line.substr(close + 1)))};
}

long tag_integer(const MetadataTag& tag, int line_no) {
  const auto v = to_long(tag.value);
  if (!v) {
    throw ParseError("tag <" + tag.name + "> expects an integer, got '" + tag.value + "'",
                     line_no);
  }
  return *v;
}

std::string link_label(std::size_t index, long tail, long head) {
  return "link " + std::to_string(index + 1) + " (" + std::to_string(tail) + "->" +
         std::to_string(head) + ")";
}

// Power written so that 1 / power reproduces mu bit-exactly on re-read.
double exact_power(double mu) {
  double power = 1.0 / mu;
  for (int step = 0; step < 64 && 1.0 / power != mu; ++step) {
    power = std::nextafter(power, 1.0 / power > mu ? HUGE_VAL : 0.0);
  }
  return power;
}

void note(ParseReport* report, std::string message) {
  if (report) report->notes.push_back(std::move(message));
}

}  // namespace

Network parse_network(std::istream& in, const NetworkParseOptions& options,
                      ParseReport* report) {
  std::optional<long> num_nodes, num_zones, num_links, first_thru;
  bool in_header = true;
  Network net;

  std::vector<std::string> pending_storage;
  int record_line = 0;

  auto finish_record = [&]() {
    if (pending_storage.empty()) return;
    std::vector<double> cols;
    for (const auto& tok : pending_storage) {
      const auto v = to_double(tok);
      if (!v) throw ParseError("non-numeric link field '" + tok + "'", record_line);
      cols.push_back(*v);
    }
    pending_storage.clear();
    if (cols.size() < 7) {
      throw ParseError("link record needs at least 7 columns, got " +
                           std::to_string(cols.size()),
                       record_line);
    }
    const std::size_t index = net.links.size();
    const long tail = std::lround(cols[0]);
    const long head = std::lround(cols[1]);
    const double capacity = cols[2];
    double fft = cols[4];
    const double b = cols[5];
    const double power = cols[6];
    const auto label = link_label(index, tail, head);
    if (!num_nodes) throw StructuralError("<NUMBER OF NODES> missing before link records");
    if (tail < 1 || tail > *num_nodes || head < 1 || head > *num_nodes) {
      throw ValidationError(label + ": node id outside [1, " + std::to_string(*num_nodes) + "]");
    }
    if (tail == head) throw ValidationError(label + ": self-loop");
    if (!(capacity > 0.0)) {
      throw ValidationError(label + ": capacity must be positive, got " +
                            std::to_string(capacity));
    }
    if (fft < 0.0) throw ValidationError(label + ": negative free-flow time");
    if (fft == 0.0) {
      fft = options.free_flow_floor;
      note(report, label + ": zero free-flow time replaced by " +
                       std::to_string(options.free_flow_floor));
    }
    if (b < 0.0) throw ValidationError(label + ": negative b");
    if (!(power >= 1.0)) {
      throw ValidationError(label + ": power must be >= 1, got " + std::to_string(power));
    }
    net.links.push_back({static_cast<int>(tail - 1), static_cast<int>(head - 1),
                         BprParams{fft, capacity, b, 1.0 / power}});
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (in_header) {
      const auto tag = parse_tag(body, line_no);
      if (tag.name == "END OF METADATA") {
        in_header = false;
      } else if (tag.name == "NUMBER OF NODES") {
        num_nodes = tag_integer(tag, line_no);
      } else if (tag.name == "NUMBER OF ZONES") {
        num_zones = tag_integer(tag, line_no);
      } else if (tag.name == "NUMBER OF LINKS") {
        num_links = tag_integer(tag, line_no);
      } else if (tag.name == "FIRST THRU NODE") {
        first_thru = tag_integer(tag, line_no);
      }
      continue;
    }
    std::size_t pos = 0;
    while (pos < body.size()) {
      const auto c = body[pos];
      if (c == ' ' || c == '\t') {
        ++pos;
      } else if (c == ';') {
        finish_record();
        ++pos;
      } else {
        const auto end = body.find_first_of(" \t;", pos);
        const auto tok = body.substr(pos, end == std::string_view::npos ? end : end - pos);
        if (pending_storage.empty()) record_line = line_no;
        pending_storage.emplace_back(tok);
        pos = end == std::string_view::npos ? body.size() : end;
      }
    }
  }
  finish_record();

  if (in_header) throw StructuralError("<END OF METADATA> not found");
  if (!num_nodes) throw StructuralError("<NUMBER OF NODES> missing");
  if (!num_links) throw StructuralError("<NUMBER OF LINKS> missing");
  if (static_cast<long>(net.links.size()) != *num_links) {
    throw StructuralError("header declares " + std::to_string(*num_links) +
                          " links but " + std::to_string(net.links.size()) +
                          " records were read");
  }
  net.num_nodes = static_cast<int>(*num_nodes);
  net.num_zones = static_cast<int>(num_zones.value_or(*num_nodes));
  net.first_thru_node = static_cast<int>(first_thru.value_or(1));
  if (net.num_zones < 0 || net.num_zones > net.num_nodes) {
    throw ValidationError("<NUMBER OF ZONES> must lie in [0, <NUMBER OF NODES>]");
  }
  return net;
}

Network read_network(const std::filesystem::path& path, const NetworkParseOptions& options,
                     ParseReport* report) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open network file " + path.string());
  return parse_network(in, options, report);
}

void write_network(std::ostream& out, const Network& net) {
  out << "<NUMBER OF ZONES> " << net.num_zones << '\n'
      << "<NUMBER OF NODES> " << net.num_nodes << '\n'
      << "<FIRST THRU NODE> " << net.first_thru_node << '\n'
      << "<NUMBER OF LINKS> " << net.links.size() << '\n'
      << "<END OF METADATA>\n\n"
      << "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\t"
         "link_type\t;\n";
  const auto old_flags = out.flags();
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  for (const auto& link : net.links) {
    const auto& p = link.bpr;
    out << '\t' << link.tail + 1 << '\t' << link.head + 1 << '\t' << p.capacity << '\t'
        << p.free_flow_time << '\t' << p.free_flow_time << '\t' << p.kappa << '\t'
        << exact_power(p.mu) << "\t0\t0\t1\t;\n";
  }
  out.flags(old_flags);
  out.precision(old_precision);
}

DemandSpec parse_trips(std::istream& in, int num_zones, ParseReport* report) {
  std::optional<long> header_zones;
  std::optional<double> header_total;

  enum class Expect { kAny, kOriginId, kColon, kVolume };
  Expect expect = Expect::kAny;
  std::optional<long> origin;
  long destination = 0;

  struct RawEntry {
    long origin;
    long destination;
    double volume;
    int line;
  };
  std::vector<RawEntry> raw;

  std::string line;
  int line_no = 0;
  bool header_possible = true;
  bool in_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (header_possible) {
      header_possible = false;
      in_header = body.front() == '<';
    }
    if (in_header) {
      const auto tag = parse_tag(body, line_no);
      if (tag.name == "END OF METADATA") {
        in_header = false;
      } else if (tag.name == "NUMBER OF ZONES") {
        header_zones = tag_integer(tag, line_no);
      } else if (tag.name == "TOTAL OD FLOW") {
        header_total = to_double(tag.value);
        if (!header_total) throw ParseError("<TOTAL OD FLOW> expects a number", line_no);
      }
      continue;
    }
    std::size_t pos = 0;
    while (pos < body.size()) {
      const char c = body[pos];
      if (c == ' ' || c == '\t') {
        ++pos;
        continue;
      }
      if (c == ';') {
        if (expect != Expect::kAny) throw ParseError("unexpected ';'", line_no);
        ++pos;
        continue;
      }
      if (c == ':') {
        if (expect != Expect::kColon) throw ParseError("unexpected ':'", line_no);
        expect = Expect::kVolume;
        ++pos;
        continue;
      }
      const auto end = body.find_first_of(" \t;:", pos);
      const auto tok = body.substr(pos, end == std::string_view::npos ? end : end - pos);
      pos = end == std::string_view::npos ? body.size() : end;
      switch (expect) {
        case Expect::kAny:
          if (upper(tok) == "ORIGIN") {
            expect = Expect::kOriginId;
          } else {
            const auto d = to_long(tok);
            if (!d) throw ParseError("expected 'Origin' or a destination id, got '" +
                                         std::string(tok) + "'",
                                     line_no);
            if (!origin) throw ParseError("destination entry before any 'Origin'", line_no);
            destination = *d;
            expect = Expect::kColon;
          }
          break;
        case Expect::kOriginId: {
          const auto o = to_long(tok);
          if (!o) throw ParseError("expected origin id, got '" + std::string(tok) + "'", line_no);
          origin = *o;
          expect = Expect::kAny;
          break;
        }
        case Expect::kColon:
          throw ParseError("expected ':' after destination id", line_no);
        case Expect::kVolume: {
          const auto v = to_double(tok);
          if (!v) throw ParseError("expected volume, got '" + std::string(tok) + "'", line_no);
          raw.push_back({*origin, destination, *v, line_no});
          expect = Expect::kAny;
          break;
        }
      }
    }
  }
  if (in_header) throw StructuralError("<END OF METADATA> not found in trips file");
  if (expect != Expect::kAny) throw ParseError("truncated entry at end of input", line_no);

  long zones = num_zones;
  if (zones > 0 && header_zones && *header_zones != zones) {
    throw StructuralError("trips header declares " + std::to_string(*header_zones) +
                          " zones but the network has " + std::to_string(zones));
  }
  if (zones <= 0 && header_zones) zones = *header_zones;
  if (zones <= 0) {
    for (const auto& e : raw) zones = std::max({zones, e.origin, e.destination});
  }

  std::map<std::pair<int, int>, double> support;
  double summed = 0.0;
  double intra = 0.0;
  for (const auto& e : raw) {
    if (e.origin < 1 || e.origin > zones) {
      throw ValidationError("line " + std::to_string(e.line) + ": origin " +
                            std::to_string(e.origin) + " outside zone range [1, " +
                            std::to_string(zones) + "]");
    }
    if (e.destination < 1 || e.destination > zones) {
      throw ValidationError("line " + std::to_string(e.line) + ": destination " +
                            std::to_string(e.destination) + " outside zone range [1, " +
                            std::to_string(zones) + "]");
    }
    if (!(e.volume >= 0.0)) {
      throw ValidationError("line " + std::to_string(e.line) + ": negative volume " +
                            std::to_string(e.volume));
    }
    summed += e.volume;
    if (e.volume == 0.0) continue;
    if (e.origin == e.destination) {
      intra += e.volume;
      continue;
    }
    support[{static_cast<int>(e.origin - 1), static_cast<int>(e.destination - 1)}] += e.volume;
  }
  if (intra > 0.0) {
    note(report, "dropped intra-zonal demand of " + std::to_string(intra));
  }
  if (header_total && std::abs(*header_total - summed) > 0.005 * std::abs(summed)) {
    note(report, "<TOTAL OD FLOW> " + std::to_string(*header_total) +
                     " disagrees with summed entries " + std::to_string(summed) +
                     "; using the summed value");
  }

  DemandSpec demand;
  demand.origin_totals.assign(zones, 0.0);
  demand.destination_totals.assign(zones, 0.0);
  for (const auto& [key, volume] : support) {
    demand.od_support.push_back({key.first, key.second, volume});
    demand.origin_totals[key.first] += volume;
    demand.destination_totals[key.second] += volume;
  }
  demand.total = 0.0;
  for (double l : demand.origin_totals) demand.total += l;
  if (balance_marginals(demand)) {
    note(report, "destination totals rescaled to match the origin total");
  }
  return demand;
}

DemandSpec read_trips(const std::filesystem::path& path, int num_zones, ParseReport* report) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trips file " + path.string());
  return parse_trips(in, num_zones, report);
}

bool balance_marginals(DemandSpec& demand) {
  auto sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };
  demand.total = sum(demand.origin_totals);
  auto& w = demand.destination_totals;
  double sw = sum(w);
  if (sw == demand.total) return false;
  if (sw > 0.0) {
    const double scale = demand.total / sw;
    for (double& x : w) x *= scale;
  }
  if (w.empty()) return true;
  // Only the final addition sees the last positive entry, so ulp steps on it
  // move the rounded sum one representable value at a time.
  auto last = w.size();
  while (last > 0 && w[last - 1] <= 0.0) --last;
  if (last == 0) return true;
  double& adjust = w[last - 1];
  adjust += demand.total - sum(w);
  for (int step = 0; step < 1024; ++step) {
    sw = sum(w);
    if (sw == demand.total) break;
    adjust = std::nextafter(adjust, sw < demand.total ? std::numeric_limits<double>::infinity()
                                                      : -std::numeric_limits<double>::infinity());
  }
  return true;
}

}  // namespace twostage
