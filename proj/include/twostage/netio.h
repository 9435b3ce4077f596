#pragma once

// Reading and writing TNTP-style network and trip tables.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace twostage {

/// BPR travel-time parameters of one link:
///   time(f) = free_flow_time * (1 + kappa * (f / capacity)^(1 / mu)).
struct BprParams {
  double free_flow_time = 1.0;
  double capacity = 1.0;
  double kappa = 0.15;
  double mu = 0.25;

  bool operator==(const BprParams&) const = default;
};

/// Directed link. Node indices are 0-based; files use 1-based ids.
struct Link {
  int tail = 0;
  int head = 0;
  BprParams bpr;

  bool operator==(const Link&) const = default;
};

/// Directed road graph. Zones are the nodes 0..num_zones-1.
struct Network {
  int num_nodes = 0;
  int num_zones = 0;
  int first_thru_node = 1;
  std::vector<Link> links;

  std::size_t num_links() const { return links.size(); }
  bool operator==(const Network&) const = default;
};

/// One observed origin-destination entry (0-based zone indices).
struct OdEntry {
  int origin = 0;
  int destination = 0;
  double volume = 0.0;

  bool operator==(const OdEntry&) const = default;
};

/// Zone marginals and the support of the observed OD matrix.
///
/// `od_support` is sorted by (origin, destination) and holds only pairs with
/// positive volume and origin != destination.
struct DemandSpec {
  std::vector<double> origin_totals;       // l
  std::vector<double> destination_totals;  // w
  std::vector<OdEntry> od_support;
  double total = 0.0;  // N

  int num_zones() const { return static_cast<int>(origin_totals.size()); }
};

/// Non-fatal corrections applied while reading input.
struct ParseReport {
  std::vector<std::string> notes;
};

struct NetworkParseOptions {
  /// Free-flow times equal to zero are replaced by this value.
  double free_flow_floor = 1e-6;
};

Network parse_network(std::istream& in, const NetworkParseOptions& options = {},
                      ParseReport* report = nullptr);
Network read_network(const std::filesystem::path& path,
                     const NetworkParseOptions& options = {},
                     ParseReport* report = nullptr);

/// Canonical TNTP writer: `parse_network(write_network(net)) == net`.
void write_network(std::ostream& out, const Network& net);

/// Parses a trips table. `num_zones` <= 0 means "take it from the header, or
/// from the largest zone id when the header has none".
DemandSpec parse_trips(std::istream& in, int num_zones = 0,
                       ParseReport* report = nullptr);
DemandSpec read_trips(const std::filesystem::path& path, int num_zones = 0,
                      ParseReport* report = nullptr);

/// Rescales w so that sum(l) == sum(w) == total holds exactly in floating
/// point (sums taken in index order). Returns true if anything changed.
bool balance_marginals(DemandSpec& demand);

}  // namespace twostage
