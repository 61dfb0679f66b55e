#pragma once

#include <map>
#include <string>
#include <vector>

namespace udcnet {

/// One published result row: variant name ("UDCNet-R50", "UDCNet-PVT") and the
/// metric values in ReferenceTable::metrics order.
struct ReferenceRow {
  std::string variant;
  std::vector<double> values;
};

struct ReferenceTable {
  std::string label;
  std::vector<std::string> metrics;
  std::map<std::string, std::vector<ReferenceRow>> datasets;

  /// Throws Error("unknown_dataset") listing the known names.
  const std::vector<ReferenceRow>& rows(const std::string& dataset) const;
  double value(const std::string& dataset, const std::string& variant,
               const std::string& metric) const;
};

/// Location of the bundled results file: $UDCNET_REFERENCE_FILE, the source
/// tree copy, or the installed copy, whichever exists first.
std::string default_reference_path();

ReferenceTable load_reference_table(const std::string& path = default_reference_path());

/// Human-readable rows for one dataset, headed by the table label.
std::string format_reference(const ReferenceTable& table, const std::string& dataset);

}  // namespace udcnet
