#pragma once

#include <string>

namespace modechain {

// Stable float formatting for every CSV the project writes: %.17g, so
// values round-trip exactly.
std::string format_real(double value);

}  // namespace modechain
