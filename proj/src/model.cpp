#include "ensdiv/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ensdiv/error.hpp"
#include "parallel.hpp"

namespace ensdiv {

namespace {

constexpr std::size_t kMcBlock = 1u << 15;

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& cov)
{
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw ConfigError("covariance matrix is not positive definite");
    return llt.matrixL();
}

double log_det_from_lower(const Eigen::MatrixXd& lower)
{
    return 2.0 * lower.diagonal().array().log().sum();
}

} // namespace

void GaussianSpec::validate() const
{
    if (d < 1)
        throw ConfigError("dimension must be at least 1, got " + std::to_string(d));
    if (!std::isfinite(mu))
        throw ConfigError("mean must be finite");
    if (!(std::abs(beta) < 1.0))
        throw ConfigError("correlation beta must satisfy |beta| < 1, got " + std::to_string(beta));
}

void DistributionPair::validate() const
{
    class0.validate();
    class1.validate();
    if (class0.d != class1.d)
        throw ConfigError("class dimensions differ: " + std::to_string(class0.d) + " vs "
                          + std::to_string(class1.d));
    if (!(prior0 >= 0.0 && prior0 <= 1.0 && prior1 >= 0.0 && prior1 <= 1.0))
        throw ConfigError("priors must lie in [0, 1]");
    if (std::abs(prior0 + prior1 - 1.0) > 1e-12)
        throw ConfigError("priors must sum to 1");
}

void LabeledDataset::validate() const
{
    if (static_cast<std::size_t>(points.rows()) != labels.size())
        throw ConfigError("point count " + std::to_string(points.rows())
                          + " does not match label count " + std::to_string(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != 0 && labels[i] != 1)
            throw ConfigError("label at row " + std::to_string(i) + " is not 0 or 1");
}

Eigen::MatrixXd build_ar_covariance(int d, double beta)
{
    if (d < 1)
        throw ConfigError("dimension must be at least 1");
    if (!(std::abs(beta) < 1.0))
        throw ConfigError("correlation beta must satisfy |beta| < 1");
    Eigen::MatrixXd cov(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            cov(i, j) = std::pow(beta, std::abs(i - j));
    return cov;
}

GaussianDensity::GaussianDensity(const GaussianSpec& spec)
{
    spec.validate();
    mean_ = Eigen::VectorXd::Constant(spec.d, spec.mu);
    lower_ = cholesky_lower(build_ar_covariance(spec.d, spec.beta));
    log_det_ = log_det_from_lower(lower_);
    log_norm_ = -0.5 * (spec.d * std::log(2.0 * std::numbers::pi) + log_det_);
}

double GaussianDensity::log_pdf(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    const Eigen::VectorXd z = lower_.triangularView<Eigen::Lower>().solve(x - mean_);
    return log_norm_ - 0.5 * z.squaredNorm();
}

void GaussianDensity::draw(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const
{
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(dim());
    for (int i = 0; i < dim(); ++i)
        z[i] = normal(rng);
    out = mean_ + lower_.triangularView<Eigen::Lower>() * z;
}

PosteriorModel::PosteriorModel(const DistributionPair& pair)
    : pair_((pair.validate(), pair)), f0_(pair.class0), f1_(pair.class1)
{
}

double PosteriorModel::eta(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    if (pair_.prior1 == 0.0)
        return 0.0;
    if (pair_.prior0 == 0.0)
        return 1.0;
    // eta = 1 / (1 + p0 f0 / (p1 f1))
    const double log_ratio = std::log(pair_.prior0) + f0_.log_pdf(x)
                           - std::log(pair_.prior1) - f1_.log_pdf(x);
    return 1.0 / (1.0 + std::exp(log_ratio));
}

void PosteriorModel::draw_mixture(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < pair_.prior1)
        f1_.draw(rng, out);
    else
        f0_.draw(rng, out);
}

LabeledDataset sample(const DistributionPair& pair, std::size_t n, std::uint64_t seed)
{
    pair.validate();
    if (n == 0)
        throw ConfigError("sample size must be at least 1");

    const GaussianDensity f0(pair.class0);
    const GaussianDensity f1(pair.class1);
    const auto n1 = static_cast<std::size_t>(std::llround(static_cast<double>(n) * pair.prior1));

    Rng rng(seed);
    LabeledDataset out;
    out.labels.assign(n, 0);
    std::fill(out.labels.end() - static_cast<std::ptrdiff_t>(n1), out.labels.end(), 1);
    std::shuffle(out.labels.begin(), out.labels.end(), rng);

    out.points.resize(static_cast<Eigen::Index>(n), pair.dim());
    Eigen::VectorXd x(pair.dim());
    for (std::size_t i = 0; i < n; ++i) {
        (out.labels[i] == 1 ? f1 : f0).draw(rng, x);
        out.points.row(static_cast<Eigen::Index>(i)) = x.transpose();
    }
    return out;
}

double posterior_eta(const DistributionPair& pair, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    if (x.size() != pair.dim())
        throw ConfigError("query dimension does not match the distribution");
    return PosteriorModel(pair).eta(x);
}

double hellinger_squared_gaussian(const DistributionPair& pair)
{
    pair.class0.validate();
    pair.class1.validate();
    if (pair.class0.d != pair.class1.d)
        throw ConfigError("class dimensions differ");
    const int d = pair.class0.d;

    const Eigen::MatrixXd cov0 = build_ar_covariance(d, pair.class0.beta);
    const Eigen::MatrixXd cov1 = build_ar_covariance(d, pair.class1.beta);
    const Eigen::MatrixXd avg = 0.5 * (cov0 + cov1);

    const double ld0 = log_det_from_lower(cholesky_lower(cov0));
    const double ld1 = log_det_from_lower(cholesky_lower(cov1));
    Eigen::LLT<Eigen::MatrixXd> avg_llt(avg);
    if (avg_llt.info() != Eigen::Success)
        throw ConfigError("averaged covariance is not positive definite");
    const double ld_avg = log_det_from_lower(avg_llt.matrixL());

    const Eigen::VectorXd delta = Eigen::VectorXd::Constant(d, pair.class1.mu - pair.class0.mu);
    const double mahal = delta.dot(avg_llt.solve(delta));

    // log of the Bhattacharyya coefficient
    const double log_bc = 0.25 * ld0 + 0.25 * ld1 - 0.5 * ld_avg - 0.125 * mahal;
    return -std::expm1(log_bc);
}

MonteCarloEstimate functional_ground_truth_mc(const DistributionPair& pair,
                                              const std::function<double(double)>& g,
                                              std::size_t n_mc,
                                              std::uint64_t seed,
                                              unsigned threads)
{
    if (n_mc == 0)
        throw ConfigError("Monte Carlo sample count must be at least 1");
    const PosteriorModel model(pair);

    const std::size_t blocks = (n_mc + kMcBlock - 1) / kMcBlock;
    std::vector<double> sums(blocks, 0.0);
    std::vector<double> sq_sums(blocks, 0.0);

    detail::parallel_for(blocks, threads, [&](std::size_t b) {
        Rng rng(derive_seed(seed, {b}));
        const std::size_t begin = b * kMcBlock;
        const std::size_t end = std::min(n_mc, begin + kMcBlock);
        Eigen::VectorXd x(pair.dim());
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            model.draw_mixture(rng, x);
            const double v = g(model.eta(x));
            s += v;
            s2 += v * v;
        }
        sums[b] = s;
        sq_sums[b] = s2;
    });

    double s = 0.0, s2 = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        s += sums[b];
        s2 += sq_sums[b];
    }
    const double n = static_cast<double>(n_mc);
    MonteCarloEstimate out;
    out.samples = n_mc;
    out.value = s / n;
    if (n_mc > 1) {
        const double var = std::max(0.0, (s2 - n * out.value * out.value) / (n - 1.0));
        out.std_error = std::sqrt(var / n);
    }
    return out;
}

} // namespace ensdiv
