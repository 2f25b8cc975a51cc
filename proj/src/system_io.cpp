#include "relialloc/system_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "relialloc/csv.hpp"
#include "relialloc/errors.hpp"

namespace relialloc {

namespace {

using nlohmann::json;

json parse_document(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const json& nested_array(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw ParseError(std::string("expected an object with key \"") + key + "\"");
  }
  const json& outer = doc.at(key);
  if (!outer.is_array() || outer.empty()) {
    throw ParseError(std::string("\"") + key + "\" must be a non-empty array");
  }
  for (const json& inner : outer) {
    if (!inner.is_array() || inner.empty()) {
      throw ParseError(std::string("every entry of \"") + key +
                       "\" must be a non-empty array");
    }
  }
  return outer;
}

}  // namespace

ReliabilityAssignment parse_system_json(std::string_view text) {
  const json doc = parse_document(text);
  std::vector<std::vector<double>> blocks;
  for (const json& inner : nested_array(doc, "blocks")) {
    auto& b = blocks.emplace_back();
    for (const json& v : inner) {
      if (!v.is_number()) throw ParseError("reliabilities must be numbers");
      b.push_back(v.get<double>());
    }
  }
  return ReliabilityAssignment::from_blocks(blocks);
}

ReliabilityAssignment load_system_file(const std::filesystem::path& path) {
  return parse_system_json(read_file(path));
}

std::string to_system_json(const ReliabilityAssignment& assignment) {
  // Written by hand so values keep their shortest round-trip form.
  std::string out = "{\"blocks\": [";
  const auto blocks = assignment.to_blocks();
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (j) out += ", ";
    out += '[';
    for (std::size_t i = 0; i < blocks[j].size(); ++i) {
      if (i) out += ", ";
      out += format_double(blocks[j][i]);
    }
    out += ']';
  }
  out += "]}";
  return out;
}

Allocation parse_allocation_json(std::string_view text,
                                 const SystemTopology& topology) {
  const json doc = parse_document(text);
  std::vector<std::vector<Count>> blocks;
  for (const json& inner : nested_array(doc, "counts")) {
    auto& b = blocks.emplace_back();
    for (const json& v : inner) {
      if (!v.is_number_integer() || v.get<Count>() < 0) {
        throw ParseError("counts must be nonnegative integers");
      }
      b.push_back(v.get<Count>());
    }
  }
  Allocation allocation = Allocation::from_blocks(blocks);
  if (!(allocation.topology() == topology)) {
    throw ParseError("allocation shape does not match the system");
  }
  return allocation;
}

Allocation load_allocation_file(const std::filesystem::path& path,
                                const SystemTopology& topology) {
  return parse_allocation_json(read_file(path), topology);
}

}  // namespace relialloc
