#pragma once

// Static 3-d tree over a point cloud with optional point removal, used for
// nearest-neighbour queries on link samples.

#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace conelab {

class KdTree {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  explicit KdTree(const std::vector<Eigen::Vector3d>& points);

  std::size_t size() const { return pts_.size(); }
  std::size_t alive() const { return nodes_.empty() ? 0 : nodes_[0].alive; }

  // Nearest live point to q other than `skip`; npos when none is left.
  // dist receives the Euclidean distance.
  std::size_t nearest(const Eigen::Vector3d& q, double* dist = nullptr, std::size_t skip = npos) const;
  bool any_within(const Eigen::Vector3d& q, double r) const;
  // Live points within distance r of q, in ascending index order.
  void within(const Eigen::Vector3d& q, double r, std::vector<std::size_t>& out) const;

  // Removes point i from later queries.
  void remove(std::size_t i);

 private:
  struct Node {
    std::size_t point;
    int axis;
    std::size_t left = npos, right = npos, parent = npos;
    std::size_t alive = 0;
    bool live = true;
  };
  std::size_t build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, std::size_t parent);
  void collect(std::size_t node, const Eigen::Vector3d& q, double r2, std::vector<std::size_t>& out) const;
  void search(std::size_t node, const Eigen::Vector3d& q, std::size_t skip, std::size_t& best, double& best_d2) const;

  std::vector<Eigen::Vector3d> pts_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> node_of_;
};

}  // namespace conelab
