#pragma once

// Boundary-fitted, graded triangulations of planar semialgebraic domains.
//
// A quadtree on the grid of multiples of h is refined toward grading
// centers, balanced 2:1 and triangulated; triangles are then clipped by the
// domain's level function with boundary vertices placed on the boundary by
// bisection, corners inserted, and cracks (excluded curves inside the
// domain) split open by vertex duplication.

#include <array>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "conelab/domain.hpp"

namespace conelab {

using Vec2 = Eigen::Vector2d;

enum class BoundaryTag { Dirichlet, Neumann };

const char* to_string(BoundaryTag t);

struct BoundaryEdge {
  int a = 0, b = 0;
  BoundaryTag tag = BoundaryTag::Dirichlet;
  BoundaryPiece piece;
};

struct GradingCenter {
  Vec2 point = Vec2::Zero();
  double gamma = 3.0;
};

inline constexpr double kEpsFit = 1e-8;

struct TriMesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<GradingCenter> grading_centers;
  // Endpoints of boundary edges that cut across a corner which could not be
  // inserted.
  std::vector<int> flagged;
  // Per vertex: zero, or a unit vector pointing into the side of the crack
  // that this copy of a duplicated crack vertex belongs to.
  std::vector<Vec2> side_hint;
  // Local size of the quadtree cell each vertex came from.
  std::vector<double> vertex_size;
  double h = 0.0;
  double radius = 1.0;

  double triangle_area(std::size_t t) const;  // signed
  double area() const;
  double diameter(std::size_t t) const;
  Vec2 centroid(std::size_t t) const;
};

struct MeshQuality {
  double min_angle = 0.0;  // degrees
  double max_aspect = 0.0;
  bool conformity = false;
  // Minimum angle over triangles outside the innermost graded ring.
  double min_angle_outer = 0.0;
};

// Grading targets: element size h * (d / R)^((gamma - 1) / gamma) near each
// center, R the bounding-ball radius.
TriMesh build_mesh(const DomainSpec& domain, double h, const std::vector<GradingCenter>& grading);

// Corners and singular boundary points: singular points of each boundary
// polynomial and pairwise intersections of boundary polynomials, kept when
// they lie on the boundary; each gets gamma = 3.
std::vector<GradingCenter> detect_grading_centers(const DomainSpec& domain);

MeshQuality mesh_quality(const TriMesh& m);

// Red refinement: every triangle split into four through edge midpoints.
// Midpoints are not projected, so the P1 space of the result contains the
// P1 space of the input.
TriMesh refine_uniform(const TriMesh& m);

// Plain-text export: "V n" + "x y" lines, "T n" + "i j k" lines,
// "B n" + "i j TAG" lines.
void write_mesh(std::ostream& os, const TriMesh& m);

// True when the triangle touches the innermost graded ring of some center.
bool in_innermost_ring(const TriMesh& m, std::size_t t);

}  // namespace conelab
