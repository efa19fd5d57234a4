#include "ictoken/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ictoken {

std::string HarnessConfig::toText() const {
  std::string out;
  out += "nodes=" + std::to_string(nodes) + "\n";
  out += "quorum=" + std::to_string(quorum) + "\n";
  out += "capacity=" + std::to_string(blockCapacity) + "\n";
  out += "seed=" + std::to_string(seed) + "\n";
  if (!ledgerPath.empty()) out += "ledger=" + ledgerPath + "\n";
  return out;
}

Result<HarnessConfig> parseConfig(std::string_view text) {
  auto fail = [](std::string detail) {
    return Result<HarnessConfig>(ErrorClass::ParseError, "config: " + std::move(detail));
  };
  HarnessConfig cfg;
  std::size_t lineNo = 0;
  while (!text.empty()) {
    std::size_t nl = text.find('\n');
    std::string_view line = nl == std::string_view::npos ? text : text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++lineNo;
    if (line.empty() || line.starts_with('#')) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      return fail("line " + std::to_string(lineNo) + " is not key=value");
    std::string_view key = line.substr(0, eq);
    std::string value(line.substr(eq + 1));
    auto asNumber = [&](auto& out) {
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
      return ec == std::errc() && ptr == value.data() + value.size();
    };
    if (key == "nodes") {
      if (!asNumber(cfg.nodes) || cfg.nodes == 0) return fail("bad nodes value");
    } else if (key == "quorum") {
      if (!asNumber(cfg.quorum)) return fail("bad quorum value");
    } else if (key == "capacity") {
      if (!asNumber(cfg.blockCapacity) || cfg.blockCapacity == 0)
        return fail("bad capacity value");
    } else if (key == "seed") {
      if (!asNumber(cfg.seed)) return fail("bad seed value");
    } else if (key == "ledger") {
      cfg.ledgerPath = value;
    } else {
      return fail("unknown key " + std::string(key));
    }
  }
  if (cfg.quorum > cfg.nodes) return fail("quorum exceeds node count");
  return cfg;
}

Result<HarnessConfig> loadConfig(const std::string& path) {
  std::ifstream f(path);
  if (!f) return Result<HarnessConfig>(ErrorClass::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parseConfig(ss.str());
}

}  // namespace ictoken
