// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef SATCELL_SUMMATION_HPP
#define SATCELL_SUMMATION_HPP

#include <complex>

namespace satcell {

// Kahan compensated accumulator. Interference sums mix terms spanning
// >100 dB of dynamic range, so plain accumulation loses the small ones.
template <typename T>
class KahanSum {
  public:
    KahanSum() = default;
    explicit KahanSum(T init) : sum_(init) {}

    void add(T value) {
        const T y = value - carry_;
        const T t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }

    KahanSum &operator+=(T value) {
        add(value);
        return *this;
    }

    // Merges another accumulator; used by the block-wise Monte Carlo
    // reduction, which must give the same bits at any thread count.
    void merge(const KahanSum &other) {
        add(other.sum_);
        add(-other.carry_);
    }

    T value() const { return sum_; }

  private:
    T sum_{};
    T carry_{};
};

using KahanSumD = KahanSum<double>;
using KahanSumC = KahanSum<std::complex<double>>;

} // namespace satcell

#endif
