#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fvsim {

/// One sample of a scalar time series.
struct TraceSample {
  double t = 0.0;
  double value = 0.0;
  friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

/// CSV with header `t,value`, one sample per line, 18 significant digits.
void write_trace_csv(std::ostream& out, const std::vector<TraceSample>& samples);
void write_trace_csv(const std::string& path, const std::vector<TraceSample>& samples);

/// Inverse of write_trace_csv. Throws ConfigError on malformed input.
std::vector<TraceSample> read_trace_csv(std::istream& in);
std::vector<TraceSample> read_trace_csv(const std::string& path);

}  // namespace fvsim
