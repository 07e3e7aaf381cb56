#pragma once

#include <cstdint>

#include "ehrgen/core/record.hpp"

namespace ehrgen {

struct SplitFractions {
  double train = 0.7;
  double validation = 0.15;
  double test = 0.15;
};

// Assigns one tag per patient. Sizes are round(f * n) for train and
// validation; test takes the remainder, so each split is within one patient
// of its fraction. With `allow_zero_fractions` false every fraction must be
// positive. Throws PreconditionError on bad fractions or fewer than 3 patients.
Cohort split_cohort(const Cohort& cohort, const SplitFractions& fractions, std::uint64_t seed,
                    bool allow_zero_fractions = false);

}  // namespace ehrgen
