#pragma once

#include <stdexcept>

namespace zonescan {

// Base type for everything the library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : Error { using Error::Error; };       // bad magic / header
struct CorruptionError : Error { using Error::Error; };   // truncated payload
struct DataError : Error { using Error::Error; };         // non-finite or otherwise bad values
struct SchemaError : Error { using Error::Error; };       // CSV header mismatch
struct ValidationError : Error { using Error::Error; };
struct ParamError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct BoundsError : Error { using Error::Error; };
struct PlacementError : Error { using Error::Error; };
struct ContainmentError : Error { using Error::Error; };
struct NoForegroundError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace zonescan
