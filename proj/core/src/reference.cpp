#include "udcnet/reference.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "udcnet/error.hpp"
#include "udcnet_data_paths.hpp"

namespace udcnet {

const std::vector<ReferenceRow>& ReferenceTable::rows(const std::string& dataset) const {
  auto it = datasets.find(dataset);
  if (it == datasets.end()) {
    std::vector<std::string> names;
    for (const auto& [name, _] : datasets) names.push_back(name);
    throw Error("unknown_dataset", fmt::format("unknown dataset '{}' (known: {})", dataset,
                                               fmt::join(names, ", ")));
  }
  return it->second;
}

double ReferenceTable::value(const std::string& dataset, const std::string& variant,
                             const std::string& metric) const {
  const auto m = std::find(metrics.begin(), metrics.end(), metric);
  if (m == metrics.end()) throw Error("invalid_argument", fmt::format("unknown metric '{}'", metric));
  for (const auto& row : rows(dataset)) {
    if (row.variant == variant) return row.values.at(static_cast<size_t>(m - metrics.begin()));
  }
  throw Error("invalid_argument", fmt::format("no variant '{}' for {}", variant, dataset));
}

std::string default_reference_path() {
  if (const char* env = std::getenv("UDCNET_REFERENCE_FILE")) return env;
  for (const char* dir : {UDCNET_DATA_DIR, UDCNET_INSTALL_DATA_DIR}) {
    auto p = std::filesystem::path(dir) / "reference_results.json";
    if (std::filesystem::exists(p)) return p.string();
  }
  return (std::filesystem::path(UDCNET_INSTALL_DATA_DIR) / "reference_results.json").string();
}

ReferenceTable load_reference_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("reference", fmt::format("cannot read reference file '{}'", path));
  ReferenceTable table;
  try {
    const auto j = nlohmann::json::parse(in);
    table.label = j.at("label").get<std::string>();
    table.metrics = j.at("metrics").get<std::vector<std::string>>();
    for (const auto& [name, variants] : j.at("datasets").items()) {
      auto& rows = table.datasets[name];
      for (const auto& [variant, values] : variants.items()) {
        rows.push_back({variant, values.get<std::vector<double>>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("reference", fmt::format("malformed reference file '{}': {}", path, e.what()));
  }
  return table;
}

std::string format_reference(const ReferenceTable& table, const std::string& dataset) {
  const auto& rows = table.rows(dataset);
  std::string out = fmt::format("{} ({})\n", dataset, table.label);
  out += fmt::format("{:<8}", "variant");
  for (const auto& m : table.metrics) out += fmt::format(" {:>10}", m);
  out += '\n';
  for (const auto& row : rows) {
    out += fmt::format("{:<8}", row.variant);
    for (double v : row.values) out += fmt::format(" {:>10.4f}", v);
    out += '\n';
  }
  return out;
}

}  // namespace udcnet
