#pragma once

// Split grids, binned features and least-squares regression trees.
//
// A SplitGrid fixes every admissible threshold per feature; the product of the
// per-feature intervals forms the fundamental cells, and every tree fitted on
// the grid is constant on each cell. Bin k of feature f holds values v with
// thresholds[k-1] <= v < thresholds[k], so a node splitting at threshold index
// t sends bins <= t (raw values v < thresholds[t]) left.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bgnd/dataset.hpp"
#include "bgnd/error.hpp"

namespace bgnd {

inline constexpr std::size_t kDefaultMaxBins = 256;

struct SplitGrid {
    std::vector<std::vector<double>> thresholds;

    std::size_t n_features() const { return thresholds.size(); }
    std::size_t n_bins(std::size_t f) const { return thresholds[f].size() + 1; }

    std::uint16_t bin(std::size_t f, double v) const {
        const auto& t = thresholds[f];
        return static_cast<std::uint16_t>(std::upper_bound(t.begin(), t.end(), v) - t.begin());
    }

    /// Depth that can isolate every fundamental cell.
    std::size_t full_depth() const {
        std::size_t d = 0;
        for (const auto& t : thresholds) d += t.size();
        return d;
    }
};

/// Thresholds per feature: midpoints between consecutive distinct values when
/// there are at most max_bins of them, otherwise midpoints at the
/// (i / max_bins)-quantiles of the distinct values.
inline std::vector<double> grid_thresholds(std::vector<double> values, std::size_t max_bins) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> out;
    const std::size_t d = values.size();
    if (d < 2) return out;
    if (d <= max_bins) {
        out.reserve(d - 1);
        for (std::size_t i = 1; i < d; ++i) out.push_back(0.5 * (values[i - 1] + values[i]));
        return out;
    }
    for (std::size_t i = 1; i < max_bins; ++i) {
        const std::size_t pos = std::max<std::size_t>(1, i * d / max_bins);
        const double t = 0.5 * (values[pos - 1] + values[pos]);
        if (out.empty() || t > out.back()) out.push_back(t);
    }
    return out;
}

inline SplitGrid build_grid(const Dataset& data, std::size_t max_bins = kDefaultMaxBins) {
    if (max_bins < 2) throw std::invalid_argument("build_grid: max_bins must be >= 2");
    if (max_bins > std::numeric_limits<std::uint16_t>::max())
        throw std::invalid_argument("build_grid: max_bins too large");
    SplitGrid grid;
    grid.thresholds.resize(data.cols());
    std::vector<double> column(data.rows);
    for (std::size_t f = 0; f < data.cols(); ++f) {
        for (std::size_t i = 0; i < data.rows; ++i) column[i] = data.at(i, f);
        grid.thresholds[f] = grid_thresholds(column, max_bins);
    }
    return grid;
}

struct BinnedMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint16_t> bins;

    std::span<const std::uint16_t> row(std::size_t i) const { return {bins.data() + i * cols, cols}; }
    std::uint16_t at(std::size_t i, std::size_t j) const { return bins[i * cols + j]; }

    BinnedMatrix subset(std::span<const std::size_t> idx) const {
        BinnedMatrix out{idx.size(), cols, {}};
        out.bins.reserve(idx.size() * cols);
        for (std::size_t i : idx) {
            const auto r = row(i);
            out.bins.insert(out.bins.end(), r.begin(), r.end());
        }
        return out;
    }
};

inline BinnedMatrix bin_features(const Dataset& data, const SplitGrid& grid) {
    if (data.cols() != grid.n_features())
        throw InputError("bin_features: dataset has " + std::to_string(data.cols()) +
                         " features, grid expects " + std::to_string(grid.n_features()));
    BinnedMatrix out{data.rows, data.cols(), std::vector<std::uint16_t>(data.rows * data.cols())};
    for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t f = 0; f < data.cols(); ++f) {
            const double v = data.at(i, f);
            if (std::isnan(v))
                throw InputError("bin_features: missing value at row " + std::to_string(i) +
                                 ", feature '" + data.feature_names[f] + "'");
            out.bins[i * out.cols + f] = grid.bin(f, v);
        }
    return out;
}

/// Rows grouped by fundamental cell (identical bin index in every feature).
struct CellIndex {
    std::vector<std::uint32_t> cell_of_row;
    std::vector<std::size_t> cell_size;

    std::size_t n_cells() const { return cell_size.size(); }

    /// Replace each value by the mean of its cell.
    std::vector<double> cell_means(std::span<const double> v) const {
        std::vector<double> sum(n_cells(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) sum[cell_of_row[i]] += v[i];
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            out[i] = sum[cell_of_row[i]] / static_cast<double>(cell_size[cell_of_row[i]]);
        return out;
    }
};

inline CellIndex build_cells(const BinnedMatrix& x) {
    CellIndex out;
    out.cell_of_row.resize(x.rows);
    std::map<std::vector<std::uint16_t>, std::uint32_t> ids;
    std::vector<std::uint16_t> key(x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto r = x.row(i);
        key.assign(r.begin(), r.end());
        auto [it, inserted] = ids.try_emplace(key, static_cast<std::uint32_t>(out.cell_size.size()));
        if (inserted) out.cell_size.push_back(0);
        out.cell_of_row[i] = it->second;
        ++out.cell_size[it->second];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;     // -1 marks a leaf
    int bin = -1;         // threshold index in the grid; -1 when loaded from file
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;   // mean target of the node's rows

    bool is_leaf() const { return feature < 0; }
};

class Tree {
public:
    Tree() : nodes_{TreeNode{}} {}
    explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
        if (nodes_.empty()) throw InputError("tree: no nodes");
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& n = nodes_[i];
            if (n.is_leaf()) continue;
            const auto bad = [&](int c) { return c <= static_cast<int>(i) || c >= static_cast<int>(nodes_.size()); };
            if (bad(n.left) || bad(n.right))
                throw InputError("tree: node " + std::to_string(i) + " has invalid children");
        }
    }

    static Tree constant(double v) {
        Tree t;
        t.nodes_[0].value = v;
        return t;
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }

    std::size_t leaf_of(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            i = static_cast<std::size_t>(x[n.feature] < n.threshold ? n.left : n.right);
        }
        return i;
    }

    std::size_t leaf_of_binned(std::span<const std::uint16_t> x) const {
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            if (n.bin < 0) throw std::logic_error("tree: binned prediction on a tree without bin indices");
            i = static_cast<std::size_t>(x[n.feature] <= n.bin ? n.left : n.right);
        }
        return i;
    }

    double predict(std::span<const double> x) const { return nodes_[leaf_of(x)].value; }
    double predict_binned(std::span<const std::uint16_t> x) const { return nodes_[leaf_of_binned(x)].value; }

    std::size_t n_leaves() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(),
                                                      [](const TreeNode& n) { return n.is_leaf(); }));
    }

    std::size_t depth() const { return depth_from(0); }

    int max_feature() const {
        int m = -1;
        for (const auto& n : nodes_) m = std::max(m, n.feature);
        return m;
    }

    void scale_values(double s) {
        for (auto& n : nodes_) n.value *= s;
    }

private:
    std::size_t depth_from(std::size_t i) const {
        const auto& n = nodes_[i];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)),
                            depth_from(static_cast<std::size_t>(n.right)));
    }

    std::vector<TreeNode> nodes_;
};

/// Greedy depth-wise CART on squared error with histogram split search.
/// Each grow_level() call tries to split every frontier leaf once, so a tree
/// grown d levels equals a fresh fit at depth d.
class TreeGrower {
public:
    TreeGrower(const BinnedMatrix& x, std::span<const double> targets, const SplitGrid& grid)
        : x_(x), targets_(targets), grid_(grid) {
        if (x.rows == 0) throw InputError("fit_tree_ls: empty input");
        if (targets.size() != x.rows) throw InputError("fit_tree_ls: target length mismatch");
        if (x.cols != grid.n_features()) throw InputError("fit_tree_ls: grid/feature mismatch");
        for (double t : targets)
            if (!std::isfinite(t)) throw NumericalError("fit_tree_ls: non-finite target");
        rows_.resize(x.rows);
        for (std::size_t i = 0; i < x.rows; ++i) rows_[i] = static_cast<std::uint32_t>(i);
        nodes_.push_back(TreeNode{});
        nodes_[0].value = mean(0, x.rows);
        frontier_.push_back({0, 0, x.rows});
        // one histogram block per feature, filled in a single row-major pass
        offset_.resize(grid.n_features() + 1, 0);
        for (std::size_t f = 0; f < grid.n_features(); ++f) offset_[f + 1] = offset_[f] + grid.n_bins(f);
        hist_sum_.resize(offset_.back());
        hist_cnt_.resize(offset_.back());
        scratch_.resize(x.rows);
    }

    /// Returns false when no frontier leaf could be split.
    bool grow_level() {
        std::vector<Segment> next;
        for (const Segment& seg : frontier_) {
            const Split s = best_split(seg);
            if (s.feature < 0) continue;
            const std::size_t mid = partition(seg, s);
            const int l = static_cast<int>(nodes_.size());
            nodes_.push_back(TreeNode{});
            nodes_.push_back(TreeNode{});
            nodes_[l].value = mean(seg.begin, mid);
            nodes_[l + 1].value = mean(mid, seg.end);
            auto& parent = nodes_[seg.node];
            parent.feature = s.feature;
            parent.bin = s.bin;
            parent.threshold = grid_.thresholds[s.feature][s.bin];
            parent.left = l;
            parent.right = l + 1;
            next.push_back({l, seg.begin, mid});
            next.push_back({l + 1, mid, seg.end});
        }
        frontier_ = std::move(next);
        if (frontier_.empty()) return false;
        ++depth_;
        return true;
    }

    std::size_t depth() const { return depth_; }
    bool exhausted() const { return frontier_.empty(); }
    Tree tree() const { return Tree(nodes_); }

private:
    struct Segment {
        int node;
        std::size_t begin;
        std::size_t end;
    };
    struct Split {
        int feature = -1;
        int bin = -1;
    };

    double mean(std::size_t b, std::size_t e) const {
        double s = 0.0;
        for (std::size_t k = b; k < e; ++k) s += targets_[rows_[k]];
        return s / static_cast<double>(e - b);
    }

    Split best_split(const Segment& seg) {
        Split best;
        const std::size_t n = seg.end - seg.begin;
        if (n < 2) return best;
        double total = 0.0, sumsq = 0.0;
        for (std::size_t k = seg.begin; k < seg.end; ++k) {
            const double t = targets_[rows_[k]];
            total += t;
            sumsq += t * t;
        }
        const double base = total * total / static_cast<double>(n);
        // Gains below this are rounding noise of the sums (constant targets).
        double best_gain = 1e-13 * sumsq;
        if (!(best_gain > 0.0)) return best;

        std::fill(hist_sum_.begin(), hist_sum_.end(), 0.0);
        std::fill(hist_cnt_.begin(), hist_cnt_.end(), std::uint32_t{0});
        const std::size_t* off = offset_.data();
        for (std::size_t k = seg.begin; k < seg.end; ++k) {
            const std::uint32_t r = rows_[k];
            const double t = targets_[r];
            const std::uint16_t* row = x_.bins.data() + static_cast<std::size_t>(r) * x_.cols;
            for (std::size_t f = 0; f < x_.cols; ++f) {
                const std::size_t slot = off[f] + row[f];
                hist_sum_[slot] += t;
                ++hist_cnt_[slot];
            }
        }

        for (std::size_t f = 0; f < x_.cols; ++f) {
            const std::size_t nb = grid_.n_bins(f);
            if (nb < 2) continue;
            const double* hs = hist_sum_.data() + off[f];
            const std::uint32_t* hc = hist_cnt_.data() + off[f];
            double sl = 0.0;
            std::size_t nl = 0;
            for (std::size_t t = 0; t + 1 < nb; ++t) {
                sl += hs[t];
                nl += hc[t];
                if (nl == 0) continue;
                const std::size_t nr = n - nl;
                if (nr == 0) break;
                if (hc[t] == 0 && t > 0) continue;  // same partition as a lower threshold
                const double sr = total - sl;
                const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) - base;
                if (gain > best_gain) {
                    best_gain = gain;
                    best.feature = static_cast<int>(f);
                    best.bin = static_cast<int>(t);
                }
            }
        }
        return best;
    }

    std::size_t partition(const Segment& seg, const Split& s) {
        std::size_t l = seg.begin;
        std::size_t r = 0;
        for (std::size_t k = seg.begin; k < seg.end; ++k) {
            const std::uint32_t row = rows_[k];
            if (x_.at(row, static_cast<std::size_t>(s.feature)) <= s.bin) rows_[l++] = row;
            else scratch_[r++] = row;
        }
        std::copy_n(scratch_.begin(), r, rows_.begin() + static_cast<std::ptrdiff_t>(l));
        return l;
    }

    const BinnedMatrix& x_;
    std::span<const double> targets_;
    const SplitGrid& grid_;
    std::vector<TreeNode> nodes_;
    std::vector<std::uint32_t> rows_;
    std::vector<std::uint32_t> scratch_;
    std::vector<Segment> frontier_;
    std::vector<std::size_t> offset_;
    std::vector<double> hist_sum_;
    std::vector<std::uint32_t> hist_cnt_;
    std::size_t depth_ = 0;
};

inline Tree fit_tree_ls(const BinnedMatrix& x, std::span<const double> targets, std::size_t depth,
                        const SplitGrid& grid) {
    if (depth < 1) throw std::invalid_argument("fit_tree_ls: depth must be >= 1");
    TreeGrower grower(x, targets, grid);
    for (std::size_t d = 0; d < depth; ++d)
        if (!grower.grow_level()) break;
    return grower.tree();
}

}  // namespace bgnd
