#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "iclcp/scaling.hpp"

namespace iclcp::csv {

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Comma-separated, header first, '\n' line endings. Fields must not contain commas or newlines.
void write(std::ostream& out, const Table& table);

/// Parses a table written by `write`. Throws ArgumentError naming the line of any row
/// whose field count differs from the header.
Table read(std::istream& in);

/// Strict double parse; throws ArgumentError with `context` on failure.
double parse_double(const std::string& field, const std::string& context);

/// Columns N,D,loss,flops.
void write_datapoints(std::ostream& out, const std::vector<ScalingDatapoint>& points);
std::vector<ScalingDatapoint> read_datapoints(std::istream& in);

}  // namespace iclcp::csv
