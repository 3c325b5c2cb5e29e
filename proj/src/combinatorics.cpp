#include "mfmdp/combinatorics.hpp"

#include <limits>

#include "mfmdp/errors.hpp"

namespace mfmdp {

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    // r * (n - k + i) / i is always integral at this point
    std::int64_t num = n - k + i;
    if (r > std::numeric_limits<std::int64_t>::max() / num) {
      throw CapError("binomial coefficient overflows 64-bit range");
    }
    r = r * num / i;
  }
  return r;
}

std::int64_t composition_count(int total, int parts) {
  if (parts <= 0) throw ValidationError("composition_count: parts must be >= 1");
  if (total < 0) throw ValidationError("composition_count: total must be >= 0");
  return binomial(total + parts - 1, parts - 1);
}

static void enumerate_rec(int total, int parts, std::vector<int>& cur,
                          std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int v = 0; v <= total; ++v) {
    cur.push_back(v);
    enumerate_rec(total - v, parts - 1, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> enumerate_compositions(int total, int parts) {
  std::int64_t n = composition_count(total, parts);
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<int> cur;
  enumerate_rec(total, parts, cur, out);
  return out;
}

CompositionIndexer::CompositionIndexer(int total, int parts)
    : total_(total), parts_(parts), size_(composition_count(total, parts)) {}

std::int64_t CompositionIndexer::rank(const std::vector<int>& c) const {
  if (static_cast<int>(c.size()) != parts_) {
    throw ValidationError("CompositionIndexer::rank: wrong length");
  }
  std::int64_t r = 0;
  int rem = total_;
  for (int i = 0; i < parts_ - 1; ++i) {
    for (int v = 0; v < c[i]; ++v) {
      r += composition_count(rem - v, parts_ - 1 - i);
    }
    rem -= c[i];
  }
  return r;
}

std::vector<int> CompositionIndexer::unrank(std::int64_t r) const {
  std::vector<int> c(static_cast<std::size_t>(parts_));
  int rem = total_;
  for (int i = 0; i < parts_ - 1; ++i) {
    int v = 0;
    for (;; ++v) {
      std::int64_t block = composition_count(rem - v, parts_ - 1 - i);
      if (r < block) break;
      r -= block;
    }
    c[static_cast<std::size_t>(i)] = v;
    rem -= v;
  }
  c[static_cast<std::size_t>(parts_ - 1)] = rem;
  return c;
}

}  // namespace mfmdp
