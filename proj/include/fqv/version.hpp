#pragma once

#define FQV_VERSION_STRING "0.1.0"

namespace fqv {
inline const char* version() { return FQV_VERSION_STRING; }
}  // namespace fqv
