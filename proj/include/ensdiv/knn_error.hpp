#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ensdiv/model.hpp"

namespace ensdiv {

struct Neighbor {
    double dist2 = 0.0;     // squared Euclidean distance
    std::size_t index = 0;  // row of the indexed point matrix

    // Nearer first; equal distances resolved by lower row index.
    friend bool operator<(const Neighbor& a, const Neighbor& b)
    {
        return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
    }
    bool operator==(const Neighbor&) const = default;
};

// Exact Euclidean k-nearest-neighbour search over a fixed point set
// (k-d tree with bucket leaves). Read-only after construction.
class NeighborIndex {
public:
    explicit NeighborIndex(PointMatrix points, std::size_t leaf_size = 12);

    std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
    int dim() const { return static_cast<int>(points_.cols()); }
    const PointMatrix& points() const { return points_; }

    // The min(k, size()) nearest points, sorted by (distance, row).
    std::vector<Neighbor> query(std::span<const double> q, std::size_t k) const;
    void query(std::span<const double> q, std::size_t k, std::vector<Neighbor>& out) const;

private:
    struct Node {
        std::size_t begin = 0, end = 0;  // range in order_ (leaves only)
        int axis = -1;                   // -1 marks a leaf
        double split = 0.0;
        std::size_t left = 0, right = 0;
    };

    std::size_t build(std::size_t begin, std::size_t end);
    void search(std::size_t node, const double* q, std::size_t k, std::vector<Neighbor>& heap) const;

    PointMatrix points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::size_t leaf_size_;
};

NeighborIndex build_index(const PointMatrix& points);

// Majority vote of the k nearest training labels. k must be odd and no
// larger than the index size.
int knn_predict(const NeighborIndex& index, std::span<const int> labels, std::span<const double> query, int k);

// Training and held-out halves of equal size.
struct SplitDataset {
    LabeledDataset train;
    LabeledDataset test;

    void validate() const;
};

// First floor(n/2) rows train, next floor(n/2) rows test; an odd last row is dropped.
SplitDataset split_in_half(const LabeledDataset& data);

// Draws 2n points and splits them into train/test halves.
SplitDataset make_split(const DistributionPair& pair, std::size_t n, std::uint64_t seed);

double holdout_error_rate(const SplitDataset& split, int k);

// Sorted row indices of a uniform subsample of size m from [0, n) without
// replacement. The stream is identified by (seed, l_index, repeat); m == n
// returns every row without touching the RNG.
std::vector<std::size_t> draw_subsample(std::size_t n, std::size_t m, std::uint64_t seed,
                                        std::size_t l_index, std::size_t repeat);

// Subsample size round(l * n).
std::size_t subsample_size(double l, std::size_t n);

// Error rates of a classifier trained on the given training rows, for each k.
std::vector<double> error_rates_on_rows(const SplitDataset& split, std::span<const std::size_t> rows,
                                        std::span<const int> ks);

// Mean held-out error over `repeats` subsamples of size round(l N).
double subsampled_error_rate(const SplitDataset& split, int k, double l, std::size_t repeats,
                             std::uint64_t seed);

struct ErrorRateTable {
    std::vector<int> ks;
    std::vector<double> ls;
    Eigen::MatrixXd rates;  // |ks| x |ls|
    std::size_t n_train = 0;
    std::size_t repeats = 1;

    std::size_t row_of(int k) const;
    double rate(int k, std::size_t l_index) const { return rates(static_cast<Eigen::Index>(row_of(k)), static_cast<Eigen::Index>(l_index)); }
};

// Throws ConfigError listing every invalid (k, l) combination, before any
// computation. Subsample draws for a given l are shared across all k.
void validate_table_request(std::size_t n_train, std::span<const int> ks, std::span<const double> ls,
                            std::size_t repeats);

ErrorRateTable error_table(const SplitDataset& split, std::span<const int> ks, std::span<const double> ls,
                           std::size_t repeats, std::uint64_t seed, unsigned threads = 1);

// count values logarithmically spaced over [lo, hi], endpoints included.
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

} // namespace ensdiv
