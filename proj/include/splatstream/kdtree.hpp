#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "splatstream/types.hpp"

namespace splatstream {

// Median-split k-d tree over 3D points. Queries break distance ties toward the
// lower point index, so results are independent of build order and match a
// brute-force scan with the same tie rule.
class KdTree3 {
public:
    KdTree3() = default;

    explicit KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
        index_.resize(points_.size());
        std::iota(index_.begin(), index_.end(), std::uint32_t{0});
        nodes_.reserve(points_.size());
        if (!points_.empty()) root_ = build(0, points_.size());
    }

    std::size_t size() const { return points_.size(); }
    const Vec3& point(std::uint32_t i) const { return points_[i]; }

    struct Hit {
        std::uint32_t index{0};
        double dist_sq{std::numeric_limits<double>::infinity()};
    };

    // Nearest neighbor; `exclude` skips one point index (use for self-queries).
    Hit nearest(const Vec3& q, std::int64_t exclude = -1) const {
        Hit best;
        if (root_ >= 0) search_nn(root_, q, exclude, best);
        return best;
    }

    // k nearest by (distance, index); ascending order. `exclude` as above.
    std::vector<Hit> knearest(const Vec3& q, std::size_t k, std::int64_t exclude = -1) const {
        std::vector<Hit> heap;  // max-heap on (dist_sq, index)
        if (root_ >= 0 && k > 0) search_knn(root_, q, k, exclude, heap);
        std::sort(heap.begin(), heap.end(), [](const Hit& a, const Hit& b) {
            return a.dist_sq != b.dist_sq ? a.dist_sq < b.dist_sq : a.index < b.index;
        });
        return heap;
    }

private:
    struct Node {
        std::uint32_t point;
        int axis;
        std::int32_t left{-1}, right{-1};
    };

    static bool closer(double d, std::uint32_t i, const Hit& h) {
        return d < h.dist_sq || (d == h.dist_sq && i < h.index);
    }

    std::int32_t build(std::size_t lo, std::size_t hi) {
        Aabb box;
        for (std::size_t i = lo; i < hi; ++i) box.expand(points_[index_[i]]);
        Vec3 ext = box.extent();
        int axis = 0;
        if (ext.y() > ext.x()) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;
        std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(index_.begin() + lo, index_.begin() + mid, index_.begin() + hi,
                         [&](std::uint32_t a, std::uint32_t b) {
                             double pa = points_[a][axis], pb = points_[b][axis];
                             return pa != pb ? pa < pb : a < b;
                         });
        Node n;
        n.point = index_[mid];
        n.axis = axis;
        std::int32_t id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(n);
        if (mid > lo) nodes_[id].left = build(lo, mid);
        if (mid + 1 < hi) nodes_[id].right = build(mid + 1, hi);
        return id;
    }

    void search_nn(std::int32_t ni, const Vec3& q, std::int64_t exclude, Hit& best) const {
        const Node& n = nodes_[ni];
        const Vec3& p = points_[n.point];
        if (std::int64_t(n.point) != exclude) {
            double d = (p - q).squaredNorm();
            if (closer(d, n.point, best)) best = {n.point, d};
        }
        double delta = q[n.axis] - p[n.axis];
        std::int32_t first = delta < 0 ? n.left : n.right;
        std::int32_t second = delta < 0 ? n.right : n.left;
        if (first >= 0) search_nn(first, q, exclude, best);
        if (second >= 0 && delta * delta <= best.dist_sq) search_nn(second, q, exclude, best);
    }

    static bool heap_less(const Hit& a, const Hit& b) {
        // max-heap: "less" = farther from replacing the top
        return a.dist_sq != b.dist_sq ? a.dist_sq < b.dist_sq : a.index < b.index;
    }

    void search_knn(std::int32_t ni, const Vec3& q, std::size_t k, std::int64_t exclude,
                    std::vector<Hit>& heap) const {
        const Node& n = nodes_[ni];
        const Vec3& p = points_[n.point];
        if (std::int64_t(n.point) != exclude) {
            double d = (p - q).squaredNorm();
            Hit h{n.point, d};
            if (heap.size() < k) {
                heap.push_back(h);
                std::push_heap(heap.begin(), heap.end(), heap_less);
            } else if (heap_less(h, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), heap_less);
                heap.back() = h;
                std::push_heap(heap.begin(), heap.end(), heap_less);
            }
        }
        double delta = q[n.axis] - p[n.axis];
        std::int32_t first = delta < 0 ? n.left : n.right;
        std::int32_t second = delta < 0 ? n.right : n.left;
        if (first >= 0) search_knn(first, q, k, exclude, heap);
        bool full = heap.size() >= k;
        if (second >= 0 && (!full || delta * delta <= heap.front().dist_sq))
            search_knn(second, q, k, exclude, heap);
    }

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> index_;
    std::vector<Node> nodes_;
    std::int32_t root_{-1};
};

}  // namespace splatstream
