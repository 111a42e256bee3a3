#pragma once

// Byte-level helpers shared by the dataset and checkpoint formats.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spnn::io {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::string& path);

// Shortest representation that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

// Little-endian float64 packing, independent of host byte order.
void append_f64_le(std::vector<std::byte>& out, std::span<const double> values);
std::vector<double> read_f64_le(std::span<const std::byte> bytes);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Reads "key=value" lines until a line equal to `terminator`; stores the
// raw values. Throws FormatError on a malformed line or missing terminator.
std::map<std::string, std::string> read_header(std::istream& in, std::string_view terminator);

std::vector<std::byte> read_rest(std::istream& in);

}  // namespace spnn::io
