#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace lst {

// Shortest-exact formatting is not needed; every float is written with 17
// significant digits so values round-trip through text.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), columns_(header.size()) {
        for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
        os_ << '\n';
    }

    template <typename... Fields>
    void row(const Fields&... fields) {
        static_assert(sizeof...(Fields) > 0);
        std::size_t i = 0;
        ((os_ << (i++ ? "," : "") << cell(fields)), ...);
        os_ << '\n';
    }

    std::size_t columns() const noexcept { return columns_; }

private:
    template <typename T>
    static std::string cell(const T& v) {
        if constexpr (std::is_floating_point_v<T>) {
            return format_double(static_cast<double>(v));
        } else if constexpr (std::is_same_v<T, bool>) {
            return v ? "1" : "0";
        } else if constexpr (std::is_integral_v<T>) {
            return std::to_string(v);
        } else {
            return std::string(std::string_view(v));
        }
    }

    std::ostream& os_;
    std::size_t columns_;
};

}  // namespace lst
