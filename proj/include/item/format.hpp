#pragma once

#include <cstdio>
#include <string>

namespace item {

// 17 significant digits: enough for text round-trip of any double.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace item
