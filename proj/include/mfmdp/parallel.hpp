#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace mfmdp {

// Resolves a worker-count request: values >= 1 are taken as-is, anything else
// means "use the hardware concurrency".
int resolve_workers(int requested);

// Runs fn(i) for every i in [0, n), split into contiguous chunks across
// workers. fn must only write to state owned by index i; under that contract
// the result is identical for any worker count.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// Sum with a fixed reduction tree (recursive halving). The bracketing depends
// only on the length, never on worker count or scheduling, so accumulated
// Monte-Carlo statistics are byte-stable.
double fixed_tree_sum(std::span<const double> xs);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
};

// Two-pass mean and standard error using fixed_tree_sum for both passes.
MeanSe mean_se(std::span<const double> xs);

}  // namespace mfmdp
