#pragma once

#include "conelab/domain.hpp"

namespace conelab::testdomains {

inline Atom atom(const char* p, Sign s) { return Atom{Polynomial::parse(p, 2), s}; }

inline DomainSpec disk() {
  DomainSpec d;
  d.dim = 2;
  d.dirichlet = BoundarySelector::parse("all");
  return d;
}

inline DomainSpec square() {
  DomainSpec d = disk();
  d.ball.radius = 1.5;
  d.constraints.push_back({{atom("x + 1", Sign::Greater)}});
  d.constraints.push_back({{atom("1 - x", Sign::Greater)}});
  d.constraints.push_back({{atom("y + 1", Sign::Greater)}});
  d.constraints.push_back({{atom("1 - y", Sign::Greater)}});
  return d;
}

// Unit disk minus the segment [0, 1) x {0}.
inline DomainSpec slit() {
  DomainSpec d = disk();
  d.constraints.push_back({{atom("y", Sign::NotEqual), atom("x", Sign::Less)}});
  return d;
}

// (-1, 1)^2 minus the closed fourth quadrant.
inline DomainSpec lshape() {
  DomainSpec d = square();
  d.constraints.push_back({{atom("x", Sign::Less), atom("y", Sign::Greater)}});
  return d;
}

}  // namespace conelab::testdomains
