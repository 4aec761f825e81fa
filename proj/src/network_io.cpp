#include "varis/network_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace varis {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ParseError(where + ": " + what);
}

void check_keys(const Json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      fail(where, "unknown key '" + it.key() + "'");
}

const Json& require(const Json& obj, const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing key '") + key + "'");
  return *it;
}

std::string as_string(const Json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

std::vector<std::string> as_strings(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_string(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

NetworkDocument parse_document(std::string_view text, bool allow_deleted_edges) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("line " + std::to_string(line_of(text, e.byte > 0 ? e.byte - 1 : 0)) + ": " + e.what());
  }
  if (allow_deleted_edges)
    check_keys(doc, "document", {"variables", "cpts", "evidence", "deleted_edges"});
  else
    check_keys(doc, "document", {"variables", "cpts", "evidence"});

  NetworkSpec spec;
  const Json& vars = require(doc, "document", "variables");
  if (!vars.is_array()) fail("variables", "expected an array");
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string where = "variables[" + std::to_string(i) + "]";
    check_keys(vars[i], where, {"name", "states"});
    spec.variables.push_back({as_string(require(vars[i], where, "name"), where + ".name"),
                              as_strings(require(vars[i], where, "states"), where + ".states")});
  }
  const Json& cpts = require(doc, "document", "cpts");
  if (!cpts.is_array()) fail("cpts", "expected an array");
  for (std::size_t i = 0; i < cpts.size(); ++i) {
    const std::string where = "cpts[" + std::to_string(i) + "]";
    check_keys(cpts[i], where, {"child", "parents", "table"});
    NetworkSpec::CptSpec c;
    c.child = as_string(require(cpts[i], where, "child"), where + ".child");
    c.parents = as_strings(require(cpts[i], where, "parents"), where + ".parents");
    const Json& table = require(cpts[i], where, "table");
    if (!table.is_array()) fail(where + ".table", "expected an array of rows");
    for (std::size_t r = 0; r < table.size(); ++r) {
      const std::string rw = where + ".table[" + std::to_string(r) + "]";
      if (!table[r].is_array()) fail(rw, "expected an array of reals");
      std::vector<double> row;
      for (std::size_t k = 0; k < table[r].size(); ++k) {
        if (!table[r][k].is_number()) fail(rw + "[" + std::to_string(k) + "]", "expected a real");
        row.push_back(table[r][k].get<double>());
      }
      c.table.push_back(std::move(row));
    }
    spec.cpts.push_back(std::move(c));
  }

  NetworkDocument out{build_network(spec), std::nullopt, std::nullopt};

  if (auto it = doc.find("evidence"); it != doc.end()) {
    if (!it->is_object()) fail("evidence", "expected an object");
    EvidenceLabels ev;
    for (auto e = it->begin(); e != it->end(); ++e) ev[e.key()] = as_string(e.value(), "evidence." + e.key());
    Evidence::resolve(out.network, ev);  // validates names and labels
    out.evidence = std::move(ev);
  }
  if (auto it = doc.find("deleted_edges"); it != doc.end()) {
    if (!it->is_array()) fail("deleted_edges", "expected an array");
    std::vector<NamedEdge> edges;
    for (std::size_t i = 0; i < it->size(); ++i) {
      auto pair = as_strings((*it)[i], "deleted_edges[" + std::to_string(i) + "]");
      if (pair.size() != 2) fail("deleted_edges[" + std::to_string(i) + "]", "expected [parent, child]");
      if (!out.network.find(pair[0]) || !out.network.find(pair[1]))
        throw ValidationError("deleted_edges[" + std::to_string(i) + "] names an unknown variable");
      edges.emplace_back(pair[0], pair[1]);
    }
    out.deleted_edges = std::move(edges);
  }
  return out;
}

ParsedNetwork parse_network(std::string_view text) {
  auto doc = parse_document(text, false);
  return {std::move(doc.network), std::move(doc.evidence)};
}

std::string serialize_network(const BayesianNetwork& net, const std::optional<EvidenceLabels>& evidence,
                              const std::optional<std::vector<NamedEdge>>& deleted_edges) {
  OrderedJson doc;
  OrderedJson vars = OrderedJson::array();
  for (const auto& v : net.variables()) {
    OrderedJson j;
    j["name"] = v.name;
    j["states"] = v.states;
    vars.push_back(std::move(j));
  }
  doc["variables"] = std::move(vars);
  OrderedJson cpts = OrderedJson::array();
  for (const auto& c : net.cpts()) {
    OrderedJson j;
    j["child"] = net.variable(c.child).name;
    OrderedJson parents = OrderedJson::array();
    for (VarId p : c.parents) parents.push_back(net.variable(p).name);
    j["parents"] = std::move(parents);
    OrderedJson table = OrderedJson::array();
    for (std::size_t r = 0; r < c.row_count(); ++r) {
      auto row = c.row(r);
      table.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["table"] = std::move(table);
    cpts.push_back(std::move(j));
  }
  doc["cpts"] = std::move(cpts);
  if (evidence) {
    OrderedJson ev = OrderedJson::object();
    for (const auto& [k, v] : *evidence) ev[k] = v;  // std::map iterates sorted
    doc["evidence"] = std::move(ev);
  }
  if (deleted_edges) {
    OrderedJson edges = OrderedJson::array();
    for (const auto& [u, v] : *deleted_edges) edges.push_back({u, v});
    doc["deleted_edges"] = std::move(edges);
  }
  return doc.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

}  // namespace varis
