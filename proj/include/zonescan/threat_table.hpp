#pragma once

#include <string>
#include <vector>

namespace zonescan {

// One labeled threat: an axis-aligned box inside a body volume, all
// coordinates inclusive.
struct ThreatAnnotation {
  std::string body_id;
  int zone = 0;  // 1..17
  int z_start = 0, z_stop = 0;
  int x_start = 0, x_stop = 0;
  int y_start = 0, y_stop = 0;
};

inline constexpr const char* kThreatTableHeader =
    "body_Id,z_start,z_stop,zone,x_start,x_stop,y_start,y_stop";

std::vector<ThreatAnnotation> read_threat_table(const std::string& path);
void write_threat_table(const std::vector<ThreatAnnotation>& rows,
                        const std::string& path);

}  // namespace zonescan
