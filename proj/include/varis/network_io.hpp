#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "varis/model.hpp"

namespace varis {

/// Malformed document. `what()` carries the line or field path.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NamedEdge = std::pair<std::string, std::string>;  // (parent, child)

/// Everything a network document can carry.
struct NetworkDocument {
  BayesianNetwork network;
  std::optional<EvidenceLabels> evidence;
  std::optional<std::vector<NamedEdge>> deleted_edges;
};

/// Parses a network document. Unknown keys are rejected; "deleted_edges" is
/// accepted only when `allow_deleted_edges` is set. Throws ParseError or
/// ValidationError.
NetworkDocument parse_document(std::string_view text, bool allow_deleted_edges = false);

struct ParsedNetwork {
  BayesianNetwork network;
  std::optional<EvidenceLabels> evidence;
};
ParsedNetwork parse_network(std::string_view text);

/// Canonical document: two-space indent, keys in schema order, evidence keys
/// sorted, shortest round-trip reals. Byte-stable for equal inputs.
std::string serialize_network(const BayesianNetwork& net,
                              const std::optional<EvidenceLabels>& evidence = std::nullopt,
                              const std::optional<std::vector<NamedEdge>>& deleted_edges = std::nullopt);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace varis
