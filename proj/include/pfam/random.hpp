#pragma once

#include <cstdint>
#include <random>

namespace pfam {

/// Seeded generator whose output depends only on the seed (the standard
/// distributions are implementation-defined, so doubles are built directly
/// from the 64-bit engine output).
class Random {
 public:
  explicit Random(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer in [lo, hi].
  int integer(int lo, int hi) {
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pfam
