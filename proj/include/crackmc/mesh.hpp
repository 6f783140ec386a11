#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "crackmc/geometry.hpp"

namespace crackmc {

enum class BoundaryTag { left, right, bottom, top };

/// Structured simplicial line mesh (1D) or tensor-product quad mesh (2D),
/// nodes ordered lexicographically (x fastest), elements counterclockwise.
struct Mesh {
  int dim = 1;
  Box box;
  std::array<int, 2> divisions{1, 1};
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 4>> elements;  // 1D segments use entries 0..1
  double h = 0.0;                            // largest element diameter

  int nodes_per_element() const { return dim == 1 ? 2 : 4; }
  std::size_t n_nodes() const { return nodes.size(); }
  std::size_t n_elements() const { return elements.size(); }

  /// Nodes on a boundary face; bottom/top are 2D-only (ArgumentError in 1D).
  std::vector<int> boundary_nodes(BoundaryTag tag) const;

  /// Consecutive node pairs along a 2D boundary face (ArgumentError in 1D).
  std::vector<std::array<int, 2>> boundary_edges(BoundaryTag tag) const;

  Eigen::Vector2d element_centroid(std::size_t e) const;
};

/// divisions[1] is ignored in 1D.  Throws ConfigError on dim outside {1, 2}
/// or non-positive division counts.
Mesh build_structured_mesh(int dim, const Box& box,
                           std::array<int, 2> divisions);

}  // namespace crackmc
