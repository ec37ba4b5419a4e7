#include "iclcp/csv.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "iclcp/errors.hpp"

namespace iclcp::csv {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void write(std::ostream& out, const Table& table) {
  auto put = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << fields[i];
    }
    out << '\n';
  };
  put(table.header);
  for (const auto& row : table.rows) put(row);
}

Table read(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("csv: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_line(line);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != t.header.size()) {
      throw ArgumentError("csv: line " + std::to_string(line_no) + " has " +
                          std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

double parse_double(const std::string& field, const std::string& context) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ArgumentError(context + ": cannot parse '" + field + "' as a number");
  }
  return v;
}

void write_datapoints(std::ostream& out, const std::vector<ScalingDatapoint>& points) {
  Table t;
  t.header = {"N", "D", "loss", "flops"};
  for (const auto& p : points) {
    t.rows.push_back({format_double(p.N), format_double(p.D), format_double(p.loss),
                      format_double(p.flops)});
  }
  write(out, t);
}

std::vector<ScalingDatapoint> read_datapoints(std::istream& in) {
  const Table t = read(in);
  const std::vector<std::string> expected{"N", "D", "loss", "flops"};
  if (t.header != expected) throw ArgumentError("csv: datapoint header must be N,D,loss,flops");
  std::vector<ScalingDatapoint> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = "datapoint row " + std::to_string(r + 1);
    ScalingDatapoint p{parse_double(t.rows[r][0], where), parse_double(t.rows[r][1], where),
                       parse_double(t.rows[r][2], where), parse_double(t.rows[r][3], where)};
    if (!(p.N > 0 && p.D > 0 && p.loss > 0 && p.flops > 0)) {
      throw ArgumentError(where + ": N, D, loss and flops must be positive");
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace iclcp::csv
