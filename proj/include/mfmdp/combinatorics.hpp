#pragma once

#include <cstdint>
#include <vector>

namespace mfmdp {

// Exact binomial coefficient; throws CapError if the value overflows int64.
std::int64_t binomial(int n, int k);

// Number of nonnegative integer vectors of length `parts` summing to `total`.
std::int64_t composition_count(int total, int parts);

// All compositions of `total` into `parts` parts, in ascending lexicographic
// order of the tuple. This order is load-bearing: grid node indices, canonical
// class indices and kernel row indices all refer to it, and ties throughout
// the toolkit resolve toward the smaller index.
std::vector<std::vector<int>> enumerate_compositions(int total, int parts);

// rank/unrank in the same ascending lexicographic order.
class CompositionIndexer {
 public:
  CompositionIndexer(int total, int parts);

  std::int64_t size() const { return size_; }
  int total() const { return total_; }
  int parts() const { return parts_; }

  std::int64_t rank(const std::vector<int>& c) const;
  std::vector<int> unrank(std::int64_t r) const;

 private:
  int total_;
  int parts_;
  std::int64_t size_;
};

}  // namespace mfmdp
