#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pam {

/// One outer iteration n of the persistent adjoint loop.
struct TraceRow {
  std::size_t iter = 0;
  double c_n = 0.0;                // inner-loop threshold used at iteration n
  std::size_t inner_steps = 0;
  double grad_norm = 0.0;          // ||g(z_n, w_{n-1})||_W
  double param_norm = 0.0;         // ||w_n||_W
  std::optional<double> objective; // E(w_n), when sampled
  std::optional<double> contraction_bound;
};

struct OptimizationTrace {
  std::vector<TraceRow> rows;

  bool empty() const { return rows.empty(); }
  std::size_t size() const { return rows.size(); }
  std::size_t total_inner_steps() const {
    std::size_t s = 0;
    for (const auto& r : rows) s += r.inner_steps;
    return s;
  }
};

inline constexpr std::string_view kTraceHeader =
    "iter,c_n,inner_steps,grad_norm,param_norm,objective,contraction_bound";

class TraceFormatError : public std::runtime_error {
 public:
  TraceFormatError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line, const char* column) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw TraceFormatError(line, std::string("bad number in column ") + column + ": '" +
                                     std::string(s) + "'");
  }
  return v;
}

inline std::size_t parse_count(std::string_view s, std::size_t line, const char* column) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw TraceFormatError(line, std::string("bad integer in column ") + column + ": '" +
                                     std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

inline void write_trace_csv(std::ostream& os, const OptimizationTrace& trace) {
  using detail::format_double;
  os << kTraceHeader << '\n';
  for (const auto& r : trace.rows) {
    os << r.iter << ',' << format_double(r.c_n) << ',' << r.inner_steps << ','
       << format_double(r.grad_norm) << ',' << format_double(r.param_norm) << ','
       << (r.objective ? format_double(*r.objective) : "") << ','
       << (r.contraction_bound ? format_double(*r.contraction_bound) : "") << '\n';
  }
}

inline OptimizationTrace read_trace_csv(std::istream& is) {
  OptimizationTrace trace;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw TraceFormatError(1, "empty trace file");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw TraceFormatError(lineno, "unexpected header '" + line + "'");

  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_commas(line);
    if (f.size() != 7) {
      throw TraceFormatError(lineno, "expected 7 fields, found " + std::to_string(f.size()));
    }
    TraceRow r;
    r.iter = detail::parse_count(f[0], lineno, "iter");
    r.c_n = detail::parse_double(f[1], lineno, "c_n");
    r.inner_steps = detail::parse_count(f[2], lineno, "inner_steps");
    r.grad_norm = detail::parse_double(f[3], lineno, "grad_norm");
    r.param_norm = detail::parse_double(f[4], lineno, "param_norm");
    if (!f[5].empty()) r.objective = detail::parse_double(f[5], lineno, "objective");
    if (!f[6].empty()) {
      r.contraction_bound = detail::parse_double(f[6], lineno, "contraction_bound");
    }
    trace.rows.push_back(r);
  }
  return trace;
}

}  // namespace pam
