#pragma once

#include <string>

namespace hlab {

// Shortest decimal string that round-trips to the same double ('.' decimal
// point, locale independent). Non-finite values print as nan / inf / -inf.
std::string format_double(double v);

}  // namespace hlab
