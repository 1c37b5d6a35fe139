#pragma once

#include <span>
#include <vector>

namespace rtcp {

double normal_cdf(double z);
double normal_quantile(double p);
// Upper tail P(X > x) for X ~ chi-square with one degree of freedom.
double chi_square1_sf(double x);

// Holm step-down adjustment. Sort p ascending; the adjusted value at rank r
// (1-based) is max over ranks <= r of (m - rank + 1) * p, capped at 1.
// Output is in the input order.
std::vector<double> holm_adjust(std::span<const double> p);

struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;  // population variance (divide by n)
  long n = 0;
};
MomentSummary summarize(std::span<const double> values);

double median(std::vector<double> values);

}  // namespace rtcp
