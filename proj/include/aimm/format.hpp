#pragma once

#include <string>

namespace aimm {

// Shortest round-trip decimal rendering (std::to_chars). Every report writer
// uses this so emitted files are reproducible byte for byte.
std::string format_double(double v);

} // namespace aimm
