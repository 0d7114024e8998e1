#include "pfam/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace pfam {

namespace {

constexpr double kPi = std::numbers::pi;

Expr shifted(const Expr& e, int offset) {
  if (offset == 0) return e;
  std::map<Symbol, Expr> repl;
  for (int i = 0; i < kMaxCoords - offset; ++i) repl.emplace(Symbol::y(i + 1), Expr::y(i + 1 + offset));
  return substitute(e, repl);
}

std::vector<Expr> box_predicates(const Box& box) {
  std::vector<Expr> preds;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Expr y = Expr::y(static_cast<int>(i) + 1);
    preds.push_back(y - box[i].first);
    preds.push_back(Expr(box[i].second) - y);
  }
  return preds;
}

// Enumerates index subsets of {0..n-1} in lexicographic order of size.
template <class F>
void for_each_subset(int n, int max_size, F&& f) {
  for (int size = 1; size <= std::min(max_size, n); ++size) {
    std::vector<int> s(size);
    for (int i = 0; i < size; ++i) s[i] = i;
    for (;;) {
      f(s);
      int k = size - 1;
      while (k >= 0 && s[k] == n - size + k) --k;
      if (k < 0) break;
      ++s[k];
      for (int j = k + 1; j < size; ++j) s[j] = s[j - 1] + 1;
    }
  }
}

/// Polar chart centred on the ray at angle `theta`: (r - 3/2, angle offset).
SmoothMap polar_chart(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const Expr y1 = Expr::y(1), y2 = Expr::y(2);
  const Expr p = c * y1 + s * y2;
  const Expr q = -s * y1 + c * y2;
  const Expr r = sqrt(y1 * y1 + y2 * y2);
  const Expr radius = Expr(1.5) + Expr::y(1);
  const Expr angle = Expr::y(2) + theta;
  return SmoothMap(2, {r - 1.5, atan(q / p)}, std::vector<Expr>{radius * cos(angle), radius * sin(angle)});
}

}  // namespace

SmoothMap box_chart(const Box& box, BoxChart kind) {
  std::vector<Expr> fwd, inv;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const double c = 0.5 * (box[i].first + box[i].second);
    const double len = box[i].second - box[i].first;
    const Expr y = Expr::y(static_cast<int>(i) + 1);
    if (kind == BoxChart::Affine) {
      fwd.push_back(y - c);
      inv.push_back(y + c);
      continue;
    }
    fwd.push_back(tan((kPi / len) * (y - c)));
    inv.push_back(Expr(c) + (len / kPi) * atan(y));
  }
  return SmoothMap(static_cast<int>(box.size()), fwd, inv);
}

GoodCover box_cover(const Box& region, const std::vector<Box>& sets, double shrink, int max_degree,
                    std::uint64_t seed, int samples, int region_samples, BoxChart kind) {
  GoodCover cover;
  cover.dim = static_cast<int>(region.size());
  cover.box = region;
  for (std::size_t a = 0; a < sets.size(); ++a) {
    const Box& b = sets[a];
    if (b.size() != region.size()) throw ConfigError("cover box has the wrong dimension");
    Expr bump(1.0);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double c = 0.5 * (b[i].first + b[i].second);
      const double half = 0.5 * shrink * (b[i].second - b[i].first);
      bump *= Expr::bump((Expr::y(static_cast<int>(i) + 1) - c) / half);
    }
    cover.sets.push_back({fmt::format("U{}", a + 1), box_predicates(b), box_chart(b, kind), bump});
  }
  for_each_subset(static_cast<int>(sets.size()), max_degree + 1, [&](const std::vector<int>& s) {
    Box meet = region;
    for (int a : s) {
      for (std::size_t i = 0; i < meet.size(); ++i) {
        meet[i].first = std::max(meet[i].first, sets[a][i].first);
        meet[i].second = std::min(meet[i].second, sets[a][i].second);
      }
    }
    if (std::any_of(meet.begin(), meet.end(), [](const Interval& iv) { return !(iv.first < iv.second); })) return;
    NerveSimplex n;
    n.vertices = s;
    for (const auto& iv : meet) n.witness.push_back(0.5 * (iv.first + iv.second));
    if (s.size() > 1) {
      // Chart of the intersection of the sets themselves (not clipped to M).
      Box own = sets[s[0]];
      for (int a : s) {
        for (std::size_t i = 0; i < own.size(); ++i) {
          own[i].first = std::max(own[i].first, sets[a][i].first);
          own[i].second = std::min(own[i].second, sets[a][i].second);
        }
      }
      n.chart = box_chart(own, kind);
    }
    cover.nerve.push_back(std::move(n));
  });
  cover.ensure_samples(region_samples, samples, seed);
  return cover;
}

GoodCover annulus_cover(std::uint64_t seed, int samples, int region_samples) {
  GoodCover cover;
  cover.dim = 2;
  cover.box = {{-2.0, 2.0}, {-2.0, 2.0}};
  const Expr y1 = Expr::y(1), y2 = Expr::y(2);
  const Expr r2 = y1 * y1 + y2 * y2;
  cover.region = {r2 - 1.0, Expr(4.0) - r2};

  const double centres[] = {kPi / 2, 7 * kPi / 6, 11 * kPi / 6};
  const double half_width = kPi / 3 + 0.25;
  const double bump_width = kPi / 3 + 0.15;
  for (int a = 0; a < 3; ++a) {
    const double c = std::cos(centres[a]), s = std::sin(centres[a]);
    const Expr p = c * y1 + s * y2;
    const Expr q = -s * y1 + c * y2;
    const Expr offset = atan(q / p);
    CoverSet set;
    set.name = fmt::format("S{}", a + 1);
    // p > 0 comes first so the angle offset is only evaluated where defined.
    set.predicates = {p, half_width - offset, half_width + offset, r2 - 1.0, Expr(4.0) - r2};
    set.chart = polar_chart(centres[a]);
    set.bump = Expr::bump((Expr(1.0) - p / sqrt(r2)) / (1.0 - std::cos(bump_width)));
    cover.sets.push_back(std::move(set));

    NerveSimplex n;
    n.vertices = {a};
    n.witness = {1.5 * c, 1.5 * s};
    cover.nerve.push_back(std::move(n));
  }
  const std::pair<int, int> edges[] = {{0, 1}, {0, 2}, {1, 2}};
  const double middles[] = {5 * kPi / 6, kPi / 6, 3 * kPi / 2};
  for (int e = 0; e < 3; ++e) {
    NerveSimplex n;
    n.vertices = {edges[e].first, edges[e].second};
    n.witness = {1.5 * std::cos(middles[e]), 1.5 * std::sin(middles[e])};
    n.chart = polar_chart(middles[e]);
    cover.nerve.push_back(std::move(n));
  }
  cover.ensure_samples(region_samples, samples, seed);
  return cover;
}

GoodCover product_cover(const GoodCover& a, const GoodCover& b) {
  GoodCover out;
  out.dim = a.dim + b.dim;
  out.box = a.box;
  out.box.insert(out.box.end(), b.box.begin(), b.box.end());
  out.region = a.region;
  for (const auto& e : b.region) out.region.push_back(shifted(e, a.dim));

  auto product_map = [&](const SmoothMap& ma, const SmoothMap& mb) {
    std::vector<Expr> fwd = ma.components(), inv = ma.inverse().components();
    for (const auto& e : mb.components()) fwd.push_back(shifted(e, a.dim));
    const SmoothMap mb_inverse = mb.inverse();
    for (const auto& e : mb_inverse.components()) inv.push_back(shifted(e, a.dim));
    return SmoothMap(out.dim, fwd, inv);
  };

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < b.size(); ++j) {
      pairs.emplace_back(i, j);
      CoverSet set;
      set.name = a.sets[i].name + "x" + b.sets[j].name;
      set.predicates = a.sets[i].predicates;
      for (const auto& e : b.sets[j].predicates) set.predicates.push_back(shifted(e, a.dim));
      set.chart = product_map(a.sets[i].chart, b.sets[j].chart);
      set.bump = a.sets[i].bump * shifted(b.sets[j].bump, a.dim);
      out.sets.push_back(std::move(set));
    }
  }

  auto join = [](const Sample& u, const Sample& v) {
    Sample s = u;
    s.insert(s.end(), v.begin(), v.end());
    return s;
  };
  const int max_size = (a.max_simplex_degree() + 1) * (b.max_simplex_degree() + 1);
  for_each_subset(static_cast<int>(pairs.size()), max_size, [&](const std::vector<int>& s) {
    Simplex pa, pb;
    for (int k : s) {
      pa.push_back(pairs[k].first);
      pb.push_back(pairs[k].second);
    }
    std::sort(pa.begin(), pa.end());
    pa.erase(std::unique(pa.begin(), pa.end()), pa.end());
    std::sort(pb.begin(), pb.end());
    pb.erase(std::unique(pb.begin(), pb.end()), pb.end());
    const NerveSimplex* na = a.find(pa);
    const NerveSimplex* nb = b.find(pb);
    if (!na || !nb) return;
    NerveSimplex n;
    n.vertices = s;
    n.witness = join(na->witness, nb->witness);
    const std::size_t count = std::min(na->samples.size(), nb->samples.size());
    for (std::size_t k = 0; k < count; ++k) {
      n.samples.push_back(join(na->samples[k], nb->samples[(k * 3 + 1) % nb->samples.size()]));
    }
    if (s.size() > 1) {
      const SmoothMap& ca = pa.size() == 1 ? a.sets[pa[0]].chart : *na->chart;
      const SmoothMap& cb = pb.size() == 1 ? b.sets[pb[0]].chart : *nb->chart;
      n.chart = product_map(ca, cb);
    }
    out.nerve.push_back(std::move(n));
  });

  const std::size_t count = std::min(a.region_samples.size(), b.region_samples.size());
  for (std::size_t k = 0; k < count; ++k) {
    out.region_samples.push_back(join(a.region_samples[k], b.region_samples[(k * 7 + 3) % b.region_samples.size()]));
  }
  return out;
}

}  // namespace pfam
