#include "conelab/kdtree.hpp"

#include <algorithm>
#include <cmath>

namespace conelab {

KdTree::KdTree(const std::vector<Eigen::Vector3d>& points) : pts_(points), node_of_(points.size(), npos) {
  std::vector<std::size_t> idx(pts_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  nodes_.reserve(pts_.size());
  if (!pts_.empty()) build(idx, 0, idx.size(), npos);
}

std::size_t KdTree::build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, std::size_t parent) {
  Eigen::Vector3d mn = pts_[idx[lo]], mx = mn;
  for (std::size_t k = lo; k < hi; ++k) {
    mn = mn.cwiseMin(pts_[idx[k]]);
    mx = mx.cwiseMax(pts_[idx[k]]);
  }
  int axis = 0;
  (mx - mn).maxCoeff(&axis);
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(mid),
                   idx.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::size_t a, std::size_t b) {
                     if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
                     return a < b;
                   });
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{idx[mid], axis});
  nodes_[id].parent = parent;
  nodes_[id].alive = hi - lo;
  node_of_[idx[mid]] = id;
  if (mid > lo) {
    const std::size_t l = build(idx, lo, mid, id);
    nodes_[id].left = l;
  }
  if (mid + 1 < hi) {
    const std::size_t r = build(idx, mid + 1, hi, id);
    nodes_[id].right = r;
  }
  return id;
}

void KdTree::search(std::size_t node, const Eigen::Vector3d& q, std::size_t skip, std::size_t& best,
                    double& best_d2) const {
  const Node& n = nodes_[node];
  if (n.alive == 0) return;
  const Eigen::Vector3d& p = pts_[n.point];
  if (n.live && n.point != skip) {
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
      best_d2 = d2;
      best = n.point;
    }
  }
  const double diff = q[n.axis] - p[n.axis];
  const std::size_t near = diff < 0 ? n.left : n.right;
  const std::size_t far = diff < 0 ? n.right : n.left;
  if (near != npos) search(near, q, skip, best, best_d2);
  if (far != npos && diff * diff <= best_d2) search(far, q, skip, best, best_d2);
}

std::size_t KdTree::nearest(const Eigen::Vector3d& q, double* dist, std::size_t skip) const {
  std::size_t best = npos;
  double best_d2 = std::numeric_limits<double>::infinity();
  if (!nodes_.empty()) search(0, q, skip, best, best_d2);
  if (dist) *dist = std::sqrt(best_d2);
  return best;
}

bool KdTree::any_within(const Eigen::Vector3d& q, double r) const {
  double d = 0.0;
  return nearest(q, &d) != npos && d <= r;
}

void KdTree::collect(std::size_t node, const Eigen::Vector3d& q, double r2, std::vector<std::size_t>& out) const {
  const Node& n = nodes_[node];
  if (n.alive == 0) return;
  const Eigen::Vector3d& p = pts_[n.point];
  if (n.live && (p - q).squaredNorm() <= r2) out.push_back(n.point);
  const double diff = q[n.axis] - p[n.axis];
  if (n.left != npos && (diff <= 0 || diff * diff <= r2)) collect(n.left, q, r2, out);
  if (n.right != npos && (diff >= 0 || diff * diff <= r2)) collect(n.right, q, r2, out);
}

void KdTree::within(const Eigen::Vector3d& q, double r, std::vector<std::size_t>& out) const {
  out.clear();
  if (!nodes_.empty()) collect(0, q, r * r, out);
  std::sort(out.begin(), out.end());
}

void KdTree::remove(std::size_t i) {
  std::size_t node = node_of_.at(i);
  if (!nodes_[node].live) return;
  nodes_[node].live = false;
  for (; node != npos; node = nodes_[node].parent) --nodes_[node].alive;
}

}  // namespace conelab
