#pragma once

#include <cstddef>
#include <vector>

namespace spatx {

// Pairwise (tree) summation.  Order is fixed by the input order, so results
// are reproducible run to run.
double pairwise_sum(const double* v, std::size_t n);
inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

}  // namespace spatx
