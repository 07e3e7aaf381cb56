#include "ehrgen/core/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ehrgen/util/error.hpp"
#include "ehrgen/util/random.hpp"

namespace ehrgen {

Cohort split_cohort(const Cohort& cohort, const SplitFractions& f, std::uint64_t seed, bool allow_zero_fractions) {
  const double fr[3] = {f.train, f.validation, f.test};
  for (double x : fr) {
    if (!std::isfinite(x) || x < 0.0 || (!allow_zero_fractions && x <= 0.0)) {
      throw PreconditionError("split fractions must be positive");
    }
  }
  if (std::abs(fr[0] + fr[1] + fr[2] - 1.0) > 1e-9) throw PreconditionError("split fractions must sum to 1");
  const std::size_t n = cohort.size();
  if (n < 3) throw PreconditionError("cannot split a cohort of fewer than 3 patients");

  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(f.validation * static_cast<double>(n))));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, 0x5117);
  // Fisher-Yates with our own index draw, so the permutation is the same on every standard library.
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng() % (i + 1)]);
  }

  Cohort out = cohort;
  out.splits.assign(n, Split::test);
  for (std::size_t k = 0; k < n; ++k) {
    if (k < n_train) {
      out.splits[order[k]] = Split::train;
    } else if (k < n_train + n_val) {
      out.splits[order[k]] = Split::validation;
    }
  }
  return out;
}

}  // namespace ehrgen
