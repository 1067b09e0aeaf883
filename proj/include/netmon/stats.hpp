#pragma once

#include <span>
#include <vector>

namespace netmon {

// Median of an unsorted sample. Even cardinality takes the mean of the two
// central values. Empty input is a precondition violation (throws).
double median(std::span<const double> values);

// Sample standard deviation (n-1 denominator); 0 for n <= 1.
double sample_stddev(std::span<const double> values);

inline double median(const std::vector<double>& v) {
  return median(std::span<const double>(v));
}
inline double sample_stddev(const std::vector<double>& v) {
  return sample_stddev(std::span<const double>(v));
}

}  // namespace netmon
