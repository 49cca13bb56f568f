#include "qbag/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "qbag/errors.hpp"

namespace qbag::csv {

std::string format_double(double v) {
    char buf[40];
    // 17 significant digits always round-trip a binary64 value.
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

double parse_double(std::string_view s, std::string_view what) {
    std::string tmp(s);
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(tmp.c_str(), &end);
    if (errno != 0 || end == tmp.c_str() || *end != '\0')
        throw LoadError("malformed number in " + std::string(what) + ": '" + tmp + "'");
    return v;
}

long parse_long(std::string_view s, std::string_view what) {
    std::string tmp(s);
    char* end = nullptr;
    errno = 0;
    long v = std::strtol(tmp.c_str(), &end, 10);
    if (errno != 0 || end == tmp.c_str() || *end != '\0')
        throw LoadError("malformed integer in " + std::string(what) + ": '" + tmp + "'");
    return v;
}

unsigned long long parse_u64(std::string_view s, std::string_view what) {
    std::string tmp(s);
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(tmp.c_str(), &end, 10);
    if (errno != 0 || end == tmp.c_str() || *end != '\0' || tmp.find('-') != std::string::npos)
        throw LoadError("malformed integer in " + std::string(what) + ": '" + tmp + "'");
    return v;
}

}  // namespace qbag::csv
