#include "aimm/format.hpp"

#include <charconv>
#include <cmath>

namespace aimm {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec; // 64 bytes always suffice for a double
    return std::string(buf, end);
}

} // namespace aimm
