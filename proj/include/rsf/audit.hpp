#pragma once

#include <set>

#include "rsf/block_store.hpp"
#include "rsf/geometry.hpp"

namespace rsf {

// Store accesses allowed to one skeletonization step:
//   writes within ({b} u N(b))^2; reads additionally cover the
//   distance-2 ring, with one side always b for ring reads.
inline int locality_violations(const QuadTree& tree, int level, int box,
                               const StoreLog& log) {
  std::set<int> near{box};
  for (int n : tree.neighbors(level, box)) near.insert(n);
  std::set<int> ring;
  for (int m : tree.distance2_neighbors(level, box)) ring.insert(m);

  int violations = 0;
  for (const auto& e : log.entries) {
    const bool i_near = near.count(e.i) != 0;
    const bool j_near = near.count(e.j) != 0;
    if (e.kind == StoreAccess::kWrite) {
      if (!(i_near && j_near)) ++violations;
    } else {
      const bool ring_read = (ring.count(e.i) && e.j == box) ||
                             (ring.count(e.j) && e.i == box);
      if (!((i_near && j_near) || ring_read)) ++violations;
    }
  }
  return violations;
}

}  // namespace rsf
