#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pfam/cech.hpp"

namespace pfam {

using Interval = std::pair<double, double>;
using Box = std::vector<Interval>;

/// Tan rescaling maps a box onto R^d; the affine chart only recentres it,
/// which keeps pullbacks of polynomial forms polynomial.
enum class BoxChart { Tan, Affine };

/// Cover of the open box `region` by open boxes. Each set carries the chart
/// y_i -> tan(pi (y_i - c_i) / L_i), the bump prod_i bump((y_i - c_i) /
/// (shrink * L_i / 2)), and every nonempty intersection up to `max_degree`
/// is declared with the analogous chart of the intersection box.
GoodCover box_cover(const Box& region, const std::vector<Box>& sets, double shrink, int max_degree,
                    std::uint64_t seed, int samples = 8, int region_samples = 200, BoxChart kind = BoxChart::Tan);

/// The annulus 1 < r < 2 covered by three angular sectors centred at
/// pi/2, 7pi/6 and 11pi/6 of half-width pi/3 + 0.25. Set and edge charts are
/// polar boxes (r - 3/2, angle offset); bumps depend on the angle only.
GoodCover annulus_cover(std::uint64_t seed, int samples = 8, int region_samples = 200);

/// Product cover of a x b on R^(da + db): sets are products, simplices are
/// the vertex sets whose two projections are simplices, charts and samples
/// are products of the factors' charts and samples.
GoodCover product_cover(const GoodCover& a, const GoodCover& b);

/// Chart of an open box: tan-rescaled onto R^d, or y - centre.
SmoothMap box_chart(const Box& box, BoxChart kind = BoxChart::Tan);

}  // namespace pfam
