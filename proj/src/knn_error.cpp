#include "ensdiv/knn_error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "ensdiv/error.hpp"
#include "parallel.hpp"

namespace ensdiv {

namespace {

inline double squared_distance(const double* a, const double* b, int d)
{
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

void check_k(int k, std::size_t available)
{
    if (k < 1 || k % 2 == 0)
        throw ConfigError("k must be a positive odd integer, got " + std::to_string(k));
    if (static_cast<std::size_t>(k) > available)
        throw ConfigError("k = " + std::to_string(k) + " exceeds training size " + std::to_string(available));
}

LabeledDataset take_rows(const LabeledDataset& data, std::size_t begin, std::size_t count)
{
    LabeledDataset out;
    out.points = data.points.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
    out.labels.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      data.labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
    return out;
}

} // namespace

NeighborIndex::NeighborIndex(PointMatrix points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1))
{
    if (points_.rows() == 0)
        throw ConfigError("cannot index an empty point set");
    if (points_.cols() == 0)
        throw ConfigError("points must have at least one coordinate");
    order_.resize(size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * size() / leaf_size_ + 1);
    build(0, size());
}

std::size_t NeighborIndex::build(std::size_t begin, std::size_t end)
{
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{begin, end});
    if (end - begin <= leaf_size_)
        return id;

    const int d = dim();
    int axis = 0;
    double best_spread = -1.0;
    for (int a = 0; a < d; ++a) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = begin; i < end; ++i) {
            const double v = points_(static_cast<Eigen::Index>(order_[i]), a);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            axis = a;
        }
    }
    if (best_spread <= 0.0)
        return id;  // all points coincide

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                         return points_(static_cast<Eigen::Index>(a), axis) < points_(static_cast<Eigen::Index>(b), axis);
                     });
    const double split = points_(static_cast<Eigen::Index>(order_[mid]), axis);

    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    Node& node = nodes_[id];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
}

void NeighborIndex::search(std::size_t node_id, const double* q, std::size_t k, std::vector<Neighbor>& heap) const
{
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
        const int d = dim();
        for (std::size_t i = node.begin; i < node.end; ++i) {
            const std::size_t row = order_[i];
            const Neighbor cand{squared_distance(q, points_.row(static_cast<Eigen::Index>(row)).data(), d), row};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        return;
    }

    const double diff = q[node.axis] - node.split;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, k, heap);
    // Equal bounds are still visited: a tied point with a lower row may lie there.
    if (heap.size() < k || diff * diff <= heap.front().dist2)
        search(far, q, k, heap);
}

void NeighborIndex::query(std::span<const double> q, std::size_t k, std::vector<Neighbor>& out) const
{
    if (q.size() != static_cast<std::size_t>(dim()))
        throw ConfigError("query dimension " + std::to_string(q.size()) + " does not match index dimension "
                          + std::to_string(dim()));
    out.clear();
    k = std::min(k, size());
    if (k == 0)
        return;
    out.reserve(k);
    search(0, q.data(), k, out);
    std::sort_heap(out.begin(), out.end());
}

std::vector<Neighbor> NeighborIndex::query(std::span<const double> q, std::size_t k) const
{
    std::vector<Neighbor> out;
    query(q, k, out);
    return out;
}

NeighborIndex build_index(const PointMatrix& points)
{
    return NeighborIndex(points);
}

int knn_predict(const NeighborIndex& index, std::span<const int> labels, std::span<const double> query, int k)
{
    if (labels.size() != index.size())
        throw ConfigError("label count does not match the index size");
    check_k(k, index.size());
    const auto nn = index.query(query, static_cast<std::size_t>(k));
    int ones = 0;
    for (const auto& n : nn)
        ones += labels[n.index];
    return 2 * ones > k ? 1 : 0;
}

void SplitDataset::validate() const
{
    train.validate();
    test.validate();
    if (train.size() == 0 || test.size() == 0)
        throw ConfigError("train and test halves must be nonempty");
    if (train.dim() != test.dim())
        throw ConfigError("train and test dimensions differ");
}

SplitDataset split_in_half(const LabeledDataset& data)
{
    data.validate();
    const std::size_t half = data.size() / 2;
    if (half == 0)
        throw ConfigError("need at least two rows to split");
    return SplitDataset{take_rows(data, 0, half), take_rows(data, half, half)};
}

SplitDataset make_split(const DistributionPair& pair, std::size_t n, std::uint64_t seed)
{
    if (n == 0)
        throw ConfigError("sample size must be at least 1");
    return split_in_half(sample(pair, 2 * n, seed));
}

std::vector<double> error_rates_on_rows(const SplitDataset& split, std::span<const std::size_t> rows,
                                        std::span<const int> ks)
{
    const int kmax = *std::max_element(ks.begin(), ks.end());
    for (int k : ks)
        check_k(k, rows.size());

    PointMatrix sub(static_cast<Eigen::Index>(rows.size()), split.train.dim());
    std::vector<int> sub_labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        sub.row(static_cast<Eigen::Index>(i)) = split.train.points.row(static_cast<Eigen::Index>(rows[i]));
        sub_labels[i] = split.train.labels[rows[i]];
    }
    const NeighborIndex index(std::move(sub));

    std::vector<std::size_t> errors(ks.size(), 0);
    std::vector<Neighbor> nn;
    const std::size_t n_test = split.test.size();
    const int d = split.test.dim();
    for (std::size_t t = 0; t < n_test; ++t) {
        const double* q = split.test.points.row(static_cast<Eigen::Index>(t)).data();
        index.query(std::span<const double>(q, static_cast<std::size_t>(d)), static_cast<std::size_t>(kmax), nn);
        const int truth = split.test.labels[t];
        for (std::size_t j = 0; j < ks.size(); ++j) {
            int ones = 0;
            for (int i = 0; i < ks[j]; ++i)
                ones += sub_labels[nn[static_cast<std::size_t>(i)].index];
            const int predicted = 2 * ones > ks[j] ? 1 : 0;
            if (predicted != truth)
                ++errors[j];
        }
    }

    std::vector<double> rates(ks.size());
    for (std::size_t j = 0; j < ks.size(); ++j)
        rates[j] = static_cast<double>(errors[j]) / static_cast<double>(n_test);
    return rates;
}

double holdout_error_rate(const SplitDataset& split, int k)
{
    split.validate();
    check_k(k, split.train.size());
    std::vector<std::size_t> rows(split.train.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const int ks[] = {k};
    return error_rates_on_rows(split, rows, ks)[0];
}

std::size_t subsample_size(double l, std::size_t n)
{
    return static_cast<std::size_t>(std::llround(l * static_cast<double>(n)));
}

std::vector<std::size_t> draw_subsample(std::size_t n, std::size_t m, std::uint64_t seed,
                                        std::size_t l_index, std::size_t repeat)
{
    if (m > n)
        throw ConfigError("subsample larger than the population");
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (m == n)
        return rows;
    Rng rng(derive_seed(seed, {l_index, repeat}));
    // Partial Fisher-Yates: the first m slots become the sample.
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(m);
    std::sort(rows.begin(), rows.end());
    return rows;
}

void validate_table_request(std::size_t n_train, std::span<const int> ks, std::span<const double> ls,
                            std::size_t repeats)
{
    std::ostringstream problems;
    if (ks.empty())
        problems << "; ks is empty";
    if (ls.empty())
        problems << "; ls is empty";
    if (repeats == 0)
        problems << "; repeats must be at least 1";
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] < 1 || ks[i] % 2 == 0)
            problems << "; k = " << ks[i] << " is not a positive odd integer";
        for (std::size_t j = 0; j < i; ++j)
            if (ks[j] == ks[i])
                problems << "; k = " << ks[i] << " repeated";
    }
    for (std::size_t i = 0; i < ls.size(); ++i) {
        if (!(ls[i] > 0.0 && ls[i] <= 1.0))
            problems << "; l = " << ls[i] << " outside (0, 1]";
        if (i > 0 && !(ls[i] > ls[i - 1]))
            problems << "; ls not strictly increasing at position " << i;
    }
    for (double l : ls) {
        if (!(l > 0.0 && l <= 1.0))
            continue;
        const auto floor_m = static_cast<std::size_t>(std::floor(l * static_cast<double>(n_train)));
        for (int k : ks)
            if (k >= 1 && floor_m < static_cast<std::size_t>(k))
                problems << "; subsample floor(" << l << " * " << n_train << ") = " << floor_m
                         << " smaller than k = " << k;
    }
    const std::string msg = problems.str();
    if (!msg.empty())
        throw ConfigError("invalid error table request: " + msg.substr(2));
}

double subsampled_error_rate(const SplitDataset& split, int k, double l, std::size_t repeats, std::uint64_t seed)
{
    split.validate();
    const int ks[] = {k};
    const double ls[] = {l};
    validate_table_request(split.train.size(), ks, ls, repeats);

    const std::size_t n = split.train.size();
    const std::size_t m = subsample_size(l, n);
    double total = 0.0;
    for (std::size_t r = 0; r < repeats; ++r)
        total += error_rates_on_rows(split, draw_subsample(n, m, seed, 0, r), ks)[0];
    return total / static_cast<double>(repeats);
}

std::size_t ErrorRateTable::row_of(int k) const
{
    const auto it = std::find(ks.begin(), ks.end(), k);
    if (it == ks.end())
        throw ConfigError("k = " + std::to_string(k) + " not present in the error table");
    return static_cast<std::size_t>(it - ks.begin());
}

ErrorRateTable error_table(const SplitDataset& split, std::span<const int> ks, std::span<const double> ls,
                           std::size_t repeats, std::uint64_t seed, unsigned threads)
{
    split.validate();
    validate_table_request(split.train.size(), ks, ls, repeats);

    ErrorRateTable table;
    table.ks.assign(ks.begin(), ks.end());
    table.ls.assign(ls.begin(), ls.end());
    table.n_train = split.train.size();
    table.repeats = repeats;
    table.rates = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ks.size()), static_cast<Eigen::Index>(ls.size()));

    const std::size_t n = split.train.size();
    detail::parallel_for(ls.size(), threads, [&](std::size_t li) {
        const std::size_t m = subsample_size(ls[li], n);
        std::vector<double> acc(ks.size(), 0.0);
        for (std::size_t r = 0; r < repeats; ++r) {
            const auto rates = error_rates_on_rows(split, draw_subsample(n, m, seed, li, r), ks);
            for (std::size_t j = 0; j < ks.size(); ++j)
                acc[j] += rates[j];
        }
        for (std::size_t j = 0; j < ks.size(); ++j)
            table.rates(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(li)) = acc[j] / static_cast<double>(repeats);
    });
    return table;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count)
{
    if (!(lo > 0.0 && hi > 0.0))
        throw ConfigError("log spacing needs positive endpoints");
    if (count == 0)
        throw ConfigError("log spacing needs at least one value");
    if (count == 1)
        return {lo};
    std::vector<double> out(count);
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

} // namespace ensdiv
