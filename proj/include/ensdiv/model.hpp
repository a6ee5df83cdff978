#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ensdiv/random.hpp"

namespace ensdiv {

// Row-major so that each point is a contiguous span of d doubles.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One class-conditional Gaussian N(mu * 1_d, Sigma) with Sigma_ij = beta^|i-j|.
struct GaussianSpec {
    double mu = 0.0;
    double beta = 0.0;
    int d = 1;

    void validate() const;
    bool operator==(const GaussianSpec&) const = default;
};

struct DistributionPair {
    GaussianSpec class0;
    GaussianSpec class1;
    double prior0 = 0.5;
    double prior1 = 0.5;

    int dim() const { return class0.d; }
    void validate() const;
};

struct LabeledDataset {
    PointMatrix points;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    int dim() const { return static_cast<int>(points.cols()); }
    void validate() const;
    bool operator==(const LabeledDataset& other) const
    {
        return labels == other.labels && points.rows() == other.points.rows()
            && points.cols() == other.points.cols() && points == other.points;
    }
};

// Symmetric Toeplitz matrix with entry (i, j) = beta^|i-j|.
// Throws ConfigError for d < 1 or |beta| >= 1.
Eigen::MatrixXd build_ar_covariance(int d, double beta);

// Precomputed Cholesky factor and normalizer of one Gaussian class.
class GaussianDensity {
public:
    explicit GaussianDensity(const GaussianSpec& spec);

    int dim() const { return static_cast<int>(mean_.size()); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& cholesky() const { return lower_; }
    double log_det() const { return log_det_; }

    double log_pdf(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    // x = mean + L z, z ~ N(0, I).
    void draw(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd lower_;
    double log_det_ = 0.0;
    double log_norm_ = 0.0;
};

// Posterior P[y = 1 | x], evaluated through log-density differences.
class PosteriorModel {
public:
    explicit PosteriorModel(const DistributionPair& pair);

    const DistributionPair& pair() const { return pair_; }
    double eta(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    // Draw x from the mixture f_x = p0 f0 + p1 f1.
    void draw_mixture(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const;

private:
    DistributionPair pair_;
    GaussianDensity f0_;
    GaussianDensity f1_;
};

// n labelled points with exactly round(n * prior1) from class 1, rows in
// random order. Deterministic in seed.
LabeledDataset sample(const DistributionPair& pair, std::size_t n, std::uint64_t seed);

double posterior_eta(const DistributionPair& pair, const Eigen::Ref<const Eigen::VectorXd>& x);

// Closed-form squared Hellinger distance 1 - BC(f0, f1) of the two classes.
// Priors do not enter.
double hellinger_squared_gaussian(const DistributionPair& pair);

struct MonteCarloEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

// (1/n) sum g(eta(x_i)), x_i ~ f_x. Work is split into fixed blocks with
// seeds derived from (seed, block index), so the result does not depend on
// the thread count.
MonteCarloEstimate functional_ground_truth_mc(const DistributionPair& pair,
                                              const std::function<double(double)>& g,
                                              std::size_t n_mc,
                                              std::uint64_t seed,
                                              unsigned threads = 1);

} // namespace ensdiv
