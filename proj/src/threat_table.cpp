#include "zonescan/threat_table.hpp"

#include <fstream>
#include <sstream>

#include "zonescan/error.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

namespace {

void validate_annotation(const ThreatAnnotation& a, std::size_t row) {
  const std::string where = " (row " + std::to_string(row) + ")";
  if (a.zone < 1 || a.zone > 17)
    throw ValidationError("zone " + std::to_string(a.zone) +
                          " outside 1..17" + where);
  if (a.z_start > a.z_stop || a.x_start > a.x_stop || a.y_start > a.y_stop)
    throw ValidationError("start > stop in threat box" + where);
  if (a.z_start < 0 || a.x_start < 0 || a.y_start < 0)
    throw ValidationError("negative coordinate in threat box" + where);
}

}  // namespace

std::vector<ThreatAnnotation> read_threat_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open threat table " + path);

  std::string line;
  if (!std::getline(f, line))
    throw SchemaError("empty threat table " + path);

  const auto header = split_csv_line(trim(line));
  const auto expected = split_csv_line(kThreatTableHeader);
  if (header != expected)
    throw SchemaError("threat table header mismatch in " + path +
                      ": expected '" + kThreatTableHeader + "'");

  std::vector<ThreatAnnotation> rows;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cols = split_csv_line(t);
    if (cols.size() != 8)
      throw SchemaError("expected 8 columns, got " +
                        std::to_string(cols.size()) + " at line " +
                        std::to_string(lineno) + " of " + path);
    ThreatAnnotation a;
    a.body_id = trim(cols[0]);
    a.z_start = parse_int(cols[1], "z_start");
    a.z_stop = parse_int(cols[2], "z_stop");
    a.zone = parse_int(cols[3], "zone");
    a.x_start = parse_int(cols[4], "x_start");
    a.x_stop = parse_int(cols[5], "x_stop");
    a.y_start = parse_int(cols[6], "y_start");
    a.y_stop = parse_int(cols[7], "y_stop");
    validate_annotation(a, rows.size());
    rows.push_back(std::move(a));
  }
  return rows;
}

void write_threat_table(const std::vector<ThreatAnnotation>& rows,
                        const std::string& path) {
  std::ostringstream out;
  out << kThreatTableHeader << "\n";
  for (const auto& a : rows) {
    out << a.body_id << ',' << a.z_start << ',' << a.z_stop << ',' << a.zone
        << ',' << a.x_start << ',' << a.x_stop << ',' << a.y_start << ','
        << a.y_stop << "\n";
  }
  atomic_write_file(path, out.str());
}

}  // namespace zonescan
