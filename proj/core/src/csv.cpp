#include "modechain/csv.hpp"

#include <cstdio>

namespace modechain {

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace modechain
