#include <isopoints/spatial.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <queue>

namespace iso {

namespace {

constexpr std::uint32_t kLeafSize = 8;

struct Candidate {
  double d2;
  std::size_t id;
  bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && id < o.id); }
};

}  // namespace

KnnIndex::KnnIndex(std::vector<Point3> points) : points_(std::move(points)) {
  if (points_.empty()) throw EmptyInput();
  for (const auto& p : points_)
    if (!is_finite(p)) throw PreconditionError("non-finite point in index input");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(points_.size()), 0);
}

int KnnIndex::build(std::uint32_t begin, std::uint32_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end, -1, -1, 0, 0.0});
  if (end - begin <= kLeafSize || depth > 64) return id;

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = points_[a][axis];
                     const double cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  nodes_[static_cast<std::size_t>(id)].axis = axis;
  nodes_[static_cast<std::size_t>(id)].split = split;
  return id;
}

std::vector<Neighbor> KnnIndex::query(const Point3& q, std::size_t k,
                                      std::optional<std::size_t> excluded) const {
  const std::size_t population = points_.size() - (excluded && *excluded < points_.size() ? 1 : 0);
  if (k > population) throw InsufficientPoints("requested more neighbors than available points");
  if (k == 0) return {};

  std::priority_queue<Candidate> best;  // max-heap: top is the current worst
  auto visit_leaf = [&](const Node& node) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::size_t pid = order_[i];
      if (excluded && pid == *excluded) continue;
      const Candidate c{squared_distance(q, points_[pid]), pid};
      if (best.size() < k) {
        best.push(c);
      } else if (c < best.top()) {
        best.pop();
        best.push(c);
      }
    }
  };

  // Iterative depth-first search with per-entry lower bounds.
  std::vector<std::pair<int, double>> stack;
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    auto [nid, bound] = stack.back();
    stack.pop_back();
    if (best.size() == k && bound > best.top().d2) continue;
    const Node& node = nodes_[static_cast<std::size_t>(nid)];
    if (node.left < 0) {
      visit_leaf(node);
      continue;
    }
    const double diff = q[node.axis] - node.split;
    const double plane = diff * diff;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    // Push far first so near is explored first.
    stack.emplace_back(far, std::max(bound, plane));
    stack.emplace_back(near, bound);
  }

  std::vector<Neighbor> out(best.size());
  for (std::size_t i = best.size(); i-- > 0;) {
    out[i] = Neighbor{best.top().id, std::sqrt(best.top().d2)};
    best.pop();
  }
  return out;
}

std::vector<Neighbor> KnnIndex::knn(const Point3& q, std::size_t k, bool exclude_self) const {
  if (!exclude_self) return query(q, k, std::nullopt);
  const auto nearest = query(q, 1, std::nullopt);
  if (nearest.front().distance == 0.0) return query(q, k, nearest.front().id);
  return query(q, k, std::nullopt);
}

std::vector<Neighbor> KnnIndex::knn_excluding(const Point3& q, std::size_t k, std::size_t excluded) const {
  return query(q, k, excluded);
}

std::vector<Neighbor> KnnIndex::radius_search(const Point3& q, double radius) const {
  const double r2 = radius * radius;
  std::vector<Candidate> found;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const double d2 = squared_distance(q, points_[order_[i]]);
        if (d2 <= r2) found.push_back({d2, order_[i]});
      }
      continue;
    }
    const double diff = q[node.axis] - node.split;
    const bool near_left = diff < 0.0;
    if (diff * diff <= r2) stack.push_back(near_left ? node.right : node.left);
    stack.push_back(near_left ? node.left : node.right);
  }
  std::sort(found.begin(), found.end());
  std::vector<Neighbor> out;
  out.reserve(found.size());
  for (const auto& c : found) out.push_back({c.id, std::sqrt(c.d2)});
  return out;
}

KnnIndex build_index(std::span<const Point3> points) {
  return KnnIndex(std::vector<Point3>(points.begin(), points.end()));
}

PcaNormal pca_normal(const KnnIndex& index, const Point3& p, std::size_t k,
                     const std::optional<Vec3>& reference) {
  if (k < 3) throw PreconditionError("pca_normal needs k >= 3");
  const auto nbrs = index.knn(p, k);
  Vec3 mean = Vec3::Zero();
  for (const auto& n : nbrs) mean += index.point(n.id);
  mean /= static_cast<double>(nbrs.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& n : nbrs) {
    const Vec3 d = index.point(n.id) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(nbrs.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Vec3 lambda = solver.eigenvalues();  // ascending
  if (lambda[1] - lambda[0] <= 1e-12) throw DegenerateNeighborhood();

  Vec3 normal = solver.eigenvectors().col(0).normalized();
  bool flip = false;
  if (reference) {
    flip = normal.dot(*reference) < 0.0;
  } else if (normal.z() != 0.0) {
    flip = normal.z() < 0.0;
  } else if (normal.y() != 0.0) {
    flip = normal.y() < 0.0;
  } else {
    flip = normal.x() < 0.0;
  }
  if (flip) normal = -normal;
  const double planarity = lambda[1] > 0.0 ? std::clamp(1.0 - lambda[0] / lambda[1], 0.0, 1.0) : 0.0;
  return {normal, planarity};
}

}  // namespace iso
