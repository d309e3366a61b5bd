#pragma once

#include "asphere/domain.hpp"
#include "asphere/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace asphere {

// Uniform tensor grid over the bounding box of a convex domain, with an
// interior mask and Shortley-Weller cut distances: where a lattice neighbor
// falls outside the domain, the stored arm length is the exact distance from
// the node to the boundary along that grid line (always in (0, spacing]).
class GridSpec {
 public:
  GridSpec(ConvexDomain domain, int nodes_per_axis);

  int dim() const { return n_; }
  int nodes_per_axis() const { return nper_; }
  int lattice_count() const;
  double spacing(int axis) const { return h_[axis]; }
  const ConvexDomain& domain() const { return dom_; }

  Vec node_point(int flat) const;
  int flat_index(int i, int j = 0) const;
  std::array<int, 2> multi_index(int flat) const;

  bool is_interior(int flat) const { return rank_[flat] >= 0; }
  // Position of a node in the interior ordering, or -1.
  int interior_rank(int flat) const { return rank_[flat]; }
  int interior_rank_at(int i, int j = 0) const;
  const std::vector<int>& interior() const { return interior_; }
  int interior_count() const { return static_cast<int>(interior_.size()); }

  // One arm of the axis stencil at an interior node. rank >= 0: the neighbor
  // is interior at distance = spacing. rank == -1: the domain boundary cuts
  // the grid line at the stored distance.
  struct Arm {
    int rank;
    double dist;
  };
  // axis in [0, n), sign 0 = minus, 1 = plus
  const Arm& arm(int interior_rank_index, int axis, int sign) const {
    return arms_[interior_rank_index][2 * axis + sign];
  }

 private:
  ConvexDomain dom_;
  int n_ = 0;
  int nper_ = 0;
  Vec lo_;
  double h_[2] = {0.0, 0.0};
  std::vector<int> rank_;        // per lattice node: interior rank or -1
  std::vector<int> interior_;    // flat indices of interior nodes
  std::vector<std::array<Arm, 4>> arms_;
};

}  // namespace asphere
