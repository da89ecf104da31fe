#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace confstream {

// Ordered multiset of nonconformity scores with order statistics.
// One store per model, shared by every expert using that model.
//
// Implemented as a treap keyed by score with subtree sizes, so both
// insert and rank queries are O(log n). Node priorities come from a
// fixed splitmix64 sequence, which keeps the tree shape (and therefore
// runtime) deterministic across runs.
class CalibrationStore {
public:
    CalibrationStore() = default;

    void insert(double score) {
        const int node = make_node(score);
        int lo = -1, hi = -1;
        split_less(root_, score, lo, hi);
        root_ = merge(merge(lo, node), hi);
    }

    std::size_t size() const noexcept {
        return root_ < 0 ? 0 : nodes_[static_cast<std::size_t>(root_)].subtree;
    }

    bool empty() const noexcept { return root_ < 0; }

    // k-th smallest score, 1-based.
    double kth(std::size_t k) const {
        if (k < 1 || k > size()) throw std::invalid_argument("CalibrationStore::kth: rank out of range");
        int cur = root_;
        while (true) {
            const Node& n = nodes_[static_cast<std::size_t>(cur)];
            const std::size_t left = subtree_size(n.left);
            if (k <= left) {
                cur = n.left;
            } else if (k == left + 1) {
                return n.value;
            } else {
                k -= left + 1;
                cur = n.right;
            }
        }
    }

    // Smallest 1-based rank r with kth(r) >= score; size()+1 when every
    // stored score is below `score`.
    std::size_t rank_geq(double score) const {
        std::size_t below = 0;
        int cur = root_;
        while (cur >= 0) {
            const Node& n = nodes_[static_cast<std::size_t>(cur)];
            if (n.value < score) {
                below += subtree_size(n.left) + 1;
                cur = n.right;
            } else {
                cur = n.left;
            }
        }
        return below + 1;
    }

    // Nondecreasing copy of the contents (test and export helper).
    std::vector<double> sorted_scores() const {
        std::vector<double> out;
        out.reserve(size());
        std::vector<int> stack;
        int cur = root_;
        while (cur >= 0 || !stack.empty()) {
            while (cur >= 0) {
                stack.push_back(cur);
                cur = nodes_[static_cast<std::size_t>(cur)].left;
            }
            cur = stack.back();
            stack.pop_back();
            out.push_back(nodes_[static_cast<std::size_t>(cur)].value);
            cur = nodes_[static_cast<std::size_t>(cur)].right;
        }
        return out;
    }

private:
    struct Node {
        double value;
        std::uint64_t priority;
        int left = -1;
        int right = -1;
        std::size_t subtree = 1;
    };

    std::size_t subtree_size(int idx) const noexcept {
        return idx < 0 ? 0 : nodes_[static_cast<std::size_t>(idx)].subtree;
    }

    void pull(int idx) {
        Node& n = nodes_[static_cast<std::size_t>(idx)];
        n.subtree = 1 + subtree_size(n.left) + subtree_size(n.right);
    }

    int make_node(double value) {
        prio_state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = prio_state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        nodes_.push_back(Node{value, z ^ (z >> 31), -1, -1, 1});
        return static_cast<int>(nodes_.size()) - 1;
    }

    // lo <- values strictly below key, hi <- the rest.
    void split_less(int idx, double key, int& lo, int& hi) {
        if (idx < 0) {
            lo = hi = -1;
            return;
        }
        Node& n = nodes_[static_cast<std::size_t>(idx)];
        if (n.value < key) {
            split_less(n.right, key, n.right, hi);
            lo = idx;
        } else {
            split_less(n.left, key, lo, n.left);
            hi = idx;
        }
        pull(idx);
    }

    int merge(int a, int b) {
        if (a < 0) return b;
        if (b < 0) return a;
        if (nodes_[static_cast<std::size_t>(a)].priority >= nodes_[static_cast<std::size_t>(b)].priority) {
            Node& n = nodes_[static_cast<std::size_t>(a)];
            n.right = merge(n.right, b);
            pull(a);
            return a;
        }
        Node& n = nodes_[static_cast<std::size_t>(b)];
        n.left = merge(a, n.left);
        pull(b);
        return b;
    }

    std::vector<Node> nodes_;
    int root_ = -1;
    std::uint64_t prio_state_ = 0x106689D45497FDB5ull;
};

}  // namespace confstream
