#include "asphere/grid.hpp"

#include <algorithm>
#include <cmath>

namespace asphere {

namespace {
constexpr double kInteriorMargin = 1e-9;  // relative to spacing
}

GridSpec::GridSpec(ConvexDomain domain, int nodes_per_axis)
    : dom_(std::move(domain)), n_(dom_.dim()), nper_(nodes_per_axis) {
  if (nper_ < 3) throw precondition_error("grid", "nodes_per_axis must be >= 3");
  auto [lo, hi] = dom_.bounding_box();
  lo_ = lo;
  for (int a = 0; a < n_; ++a) {
    h_[a] = (hi[a] - lo[a]) / (nper_ - 1);
    if (!(h_[a] > 0.0)) throw error("grid", "degenerate bounding box");
  }

  const int total = lattice_count();
  rank_.assign(total, -1);
  const double margin = kInteriorMargin * std::min(h_[0], n_ == 2 ? h_[1] : h_[0]);
  for (int f = 0; f < total; ++f) {
    Vec p = node_point(f);
    if (dom_.contains(p, margin)) {
      rank_[f] = static_cast<int>(interior_.size());
      interior_.push_back(f);
    }
  }
  if (interior_.empty()) throw error("grid", "no interior nodes at this resolution");

  arms_.resize(interior_.size());
  for (size_t k = 0; k < interior_.size(); ++k) {
    const int f = interior_[k];
    auto [i, j] = multi_index(f);
    const Vec p = node_point(f);
    for (int a = 0; a < n_; ++a) {
      for (int s = 0; s < 2; ++s) {
        const int di = (a == 0) ? (s ? 1 : -1) : 0;
        const int dj = (a == 1) ? (s ? 1 : -1) : 0;
        const int ni = i + di, nj = j + dj;
        Arm arm{-1, h_[a]};
        if (ni >= 0 && ni < nper_ && nj >= 0 && nj < nper_) {
          const int nf = flat_index(ni, nj);
          if (rank_[nf] >= 0) {
            arm.rank = rank_[nf];
            arms_[k][2 * a + s] = arm;
            continue;
          }
        }
        // Neighbor missing: measure the cut where the grid line leaves the domain.
        Vec dir = Vec::Zero(n_);
        dir[a] = s ? 1.0 : -1.0;
        double d = dom_.exit_distance(p, dir);
        arm.dist = std::clamp(d, 1e-3 * h_[a], h_[a]);
        arms_[k][2 * a + s] = arm;
      }
    }
  }
}

int GridSpec::lattice_count() const {
  int total = nper_;
  for (int a = 1; a < n_; ++a) total *= nper_;
  return total;
}

Vec GridSpec::node_point(int flat) const {
  auto [i, j] = multi_index(flat);
  Vec p(n_);
  p[0] = lo_[0] + i * h_[0];
  if (n_ == 2) p[1] = lo_[1] + j * h_[1];
  return p;
}

int GridSpec::flat_index(int i, int j) const {
  return n_ == 1 ? i : i * nper_ + j;
}

std::array<int, 2> GridSpec::multi_index(int flat) const {
  if (n_ == 1) return {flat, 0};
  return {flat / nper_, flat % nper_};
}

int GridSpec::interior_rank_at(int i, int j) const {
  if (i < 0 || i >= nper_) return -1;
  if (n_ == 2 && (j < 0 || j >= nper_)) return -1;
  return rank_[flat_index(i, j)];
}

}  // namespace asphere
