#include "crackmc/mesh.hpp"

#include <cmath>
#include <string>

#include "crackmc/errors.hpp"

namespace crackmc {

Mesh build_structured_mesh(int dim, const Box& box,
                           std::array<int, 2> divisions) {
  if (dim != 1 && dim != 2)
    throw ConfigError("mesh: dimension must be 1 or 2, got " +
                      std::to_string(dim));
  Box checked = box;
  checked.dim = dim;
  checked.validate();
  if (divisions[0] < 1 || (dim == 2 && divisions[1] < 1))
    throw ConfigError("mesh: division counts must be >= 1");

  Mesh mesh;
  mesh.dim = dim;
  mesh.box = checked;
  mesh.divisions = divisions;

  const int nx = divisions[0];
  const double dx = checked.extent(0) / nx;

  if (dim == 1) {
    mesh.nodes.reserve(nx + 1);
    for (int i = 0; i <= nx; ++i)
      mesh.nodes.emplace_back(checked.lo[0] + i * dx, 0.0);
    mesh.elements.reserve(nx);
    for (int i = 0; i < nx; ++i) mesh.elements.push_back({i, i + 1, -1, -1});
    mesh.h = dx;
    return mesh;
  }

  const int ny = divisions[1];
  const double dy = checked.extent(1) / ny;
  mesh.nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.nodes.emplace_back(checked.lo[0] + i * dx, checked.lo[1] + j * dy);

  auto node = [nx](int i, int j) { return j * (nx + 1) + i; };
  mesh.elements.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      mesh.elements.push_back(
          {node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)});
  mesh.h = std::hypot(dx, dy);
  return mesh;
}

std::vector<int> Mesh::boundary_nodes(BoundaryTag tag) const {
  const int nx = divisions[0];
  if (dim == 1) {
    if (tag == BoundaryTag::left) return {0};
    if (tag == BoundaryTag::right) return {nx};
    throw ArgumentError("mesh: bottom/top faces do not exist in 1D");
  }
  const int ny = divisions[1];
  auto node = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<int> out;
  switch (tag) {
    case BoundaryTag::left:
      for (int j = 0; j <= ny; ++j) out.push_back(node(0, j));
      break;
    case BoundaryTag::right:
      for (int j = 0; j <= ny; ++j) out.push_back(node(nx, j));
      break;
    case BoundaryTag::bottom:
      for (int i = 0; i <= nx; ++i) out.push_back(node(i, 0));
      break;
    case BoundaryTag::top:
      for (int i = 0; i <= nx; ++i) out.push_back(node(i, ny));
      break;
  }
  return out;
}

std::vector<std::array<int, 2>> Mesh::boundary_edges(BoundaryTag tag) const {
  if (dim == 1)
    throw ArgumentError("mesh: boundary edges are 2D-only; 1D faces are "
                        "single nodes");
  const std::vector<int> nodes_on_face = boundary_nodes(tag);
  std::vector<std::array<int, 2>> edges;
  edges.reserve(nodes_on_face.size() - 1);
  for (std::size_t k = 0; k + 1 < nodes_on_face.size(); ++k)
    edges.push_back({nodes_on_face[k], nodes_on_face[k + 1]});
  return edges;
}

Eigen::Vector2d Mesh::element_centroid(std::size_t e) const {
  const auto& conn = elements.at(e);
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  const int n = nodes_per_element();
  for (int a = 0; a < n; ++a) c += nodes[conn[a]];
  return c / n;
}

}  // namespace crackmc
