#include "ensdiv/experiments.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ensdiv/basis.hpp"
#include "ensdiv/error.hpp"
#include "ensdiv/estimator.hpp"
#include "ensdiv/knn_error.hpp"
#include "parallel.hpp"

namespace ensdiv {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view s)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = s.find(',', start);
        parts.push_back(trim(s.substr(start, comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return parts;
}

template <class T>
bool parse_number(std::string_view text, T& out)
{
    text = trim(text);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end && !text.empty();
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what)
{
    throw ParseError("line " + std::to_string(line) + ": " + what);
}

template <class T>
T number_at(std::size_t line, std::string_view key, std::string_view text)
{
    T v{};
    if (!parse_number(text, v))
        parse_fail(line, "cannot parse '" + std::string(text) + "' for key '" + std::string(key) + "'");
    return v;
}

template <class T>
std::vector<T> list_at(std::size_t line, std::string_view key, std::string_view text)
{
    std::vector<T> out;
    for (auto part : split_commas(text))
        out.push_back(number_at<T>(line, key, part));
    return out;
}

std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // population
    double mse = 0.0;
};

Moments moments(const std::vector<double>& values, double truth)
{
    Moments m;
    const double n = static_cast<double>(values.size());
    for (double v : values)
        m.mean += v;
    m.mean /= n;
    for (double v : values) {
        m.variance += (v - m.mean) * (v - m.mean);
        m.mse += (v - truth) * (v - truth);
    }
    m.variance /= n;
    m.mse /= n;
    return m;
}

} // namespace

std::string MethodSpec::label() const
{
    std::string s(to_string(method));
    if (lambda)
        s += "(lambda=" + format_number(*lambda) + ")";
    return s;
}

std::vector<double> SimulationConfig::fractions() const
{
    return ls.empty() ? log_spaced(0.05, 0.5, 12) : ls;
}

std::vector<MethodSpec> SimulationConfig::method_specs() const
{
    std::vector<MethodSpec> specs;
    for (Method m : methods) {
        if (m == Method::relaxed) {
            for (double lambda : lambdas)
                specs.push_back({m, lambda});
        } else {
            specs.push_back({m, std::nullopt});
        }
    }
    return specs;
}

void SimulationConfig::validate() const
{
    pair.validate();
    (void)target_by_name(target);
    if (trials < 1)
        throw ConfigError("trials must be at least 1");
    if (repeats < 1)
        throw ConfigError("repeats must be at least 1");
    if (truth_mc_samples < 1)
        throw ConfigError("truth_mc_samples must be at least 1");
    if (intrinsic_d < 0)
        throw ConfigError("intrinsic_d must be nonnegative");
    if (methods.empty())
        throw ConfigError("at least one method is required");
    if (ks.empty())
        throw ConfigError("ks is empty");
    if (n_grid.empty())
        throw ConfigError("n_grid is empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] < 1)
            throw ConfigError("sample sizes must be positive");
        if (i > 0 && n_grid[i] <= n_grid[i - 1])
            throw ConfigError("n_grid must be strictly increasing");
    }
    const bool uses_relaxed = std::find(methods.begin(), methods.end(), Method::relaxed) != methods.end();
    if (uses_relaxed && lambdas.empty())
        throw ConfigError("relaxed method requires at least one lambda");
    for (double lambda : lambdas)
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw ConfigError("lambda values must be positive and finite");

    const auto fr = fractions();
    const bool uses_ensemble = uses_relaxed || std::find(methods.begin(), methods.end(), Method::exact) != methods.end();
    for (std::size_t n : n_grid) {
        const std::vector<double> full{1.0};
        validate_table_request(n, ks, full, 1);
        if (uses_ensemble) {
            for (const auto& spec : method_specs())
                if (spec.method != Method::plain)
                    EnsembleConfig{fr, weight_dimension(), n, spec.lambda.value_or(1.0)}.validate();
            validate_table_request(n, ks, fr, repeats);
        }
    }
    (void)fit_alpha(target_by_name(target), ks, 1001);
}

std::vector<double> parse_fraction_list(std::string_view text)
{
    text = trim(text);
    const bool logarithmic = text.starts_with("log:");
    if (logarithmic)
        text.remove_prefix(4);
    std::vector<double> values;
    for (auto part : split_commas(text)) {
        double v = 0.0;
        if (!parse_number(part, v))
            throw ConfigError("cannot parse '" + std::string(part) + "' as a number");
        values.push_back(v);
    }
    if (!logarithmic)
        return values;
    if (values.size() != 3 || !(values[2] >= 1.0) || values[2] != std::floor(values[2]))
        throw ConfigError("expected log:lo,hi,count");
    return log_spaced(values[0], values[1], static_cast<std::size_t>(values[2]));
}

std::vector<int> parse_int_list(std::string_view text)
{
    std::vector<int> values;
    for (auto part : split_commas(text)) {
        int v = 0;
        if (!parse_number(part, v))
            throw ConfigError("cannot parse '" + std::string(part) + "' as an integer");
        values.push_back(v);
    }
    return values;
}

SimulationConfig parse_simulation_config(std::istream& in)
{
    SimulationConfig c;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line(raw);
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            parse_fail(line_no, "expected 'key = value'");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (value.empty())
            parse_fail(line_no, "empty value for key '" + std::string(key) + "'");

        if (key == "mu0") c.pair.class0.mu = number_at<double>(line_no, key, value);
        else if (key == "beta0") c.pair.class0.beta = number_at<double>(line_no, key, value);
        else if (key == "mu1") c.pair.class1.mu = number_at<double>(line_no, key, value);
        else if (key == "beta1") c.pair.class1.beta = number_at<double>(line_no, key, value);
        else if (key == "d") c.pair.class0.d = c.pair.class1.d = number_at<int>(line_no, key, value);
        else if (key == "prior1") {
            c.pair.prior1 = number_at<double>(line_no, key, value);
            c.pair.prior0 = 1.0 - c.pair.prior1;
        }
        else if (key == "target") c.target = std::string(value);
        else if (key == "ks") c.ks = list_at<int>(line_no, key, value);
        else if (key == "ls") {
            try {
                c.ls = parse_fraction_list(value);
            } catch (const ConfigError& e) {
                parse_fail(line_no, e.what());
            }
        }
        else if (key == "lambdas") c.lambdas = list_at<double>(line_no, key, value);
        else if (key == "methods") {
            c.methods.clear();
            for (auto part : split_commas(value)) {
                try {
                    c.methods.push_back(parse_method(part));
                } catch (const ConfigError& e) {
                    parse_fail(line_no, e.what());
                }
            }
        }
        else if (key == "n_grid") c.n_grid = list_at<std::size_t>(line_no, key, value);
        else if (key == "trials") c.trials = number_at<std::size_t>(line_no, key, value);
        else if (key == "seed") c.base_seed = number_at<std::uint64_t>(line_no, key, value);
        else if (key == "output") c.output = std::string(value);
        else if (key == "intrinsic_d") c.intrinsic_d = number_at<int>(line_no, key, value);
        else if (key == "repeats") c.repeats = number_at<std::size_t>(line_no, key, value);
        else if (key == "truth_mc_samples") c.truth_mc_samples = number_at<std::size_t>(line_no, key, value);
        else if (key == "threads") c.threads = number_at<unsigned>(line_no, key, value);
        else parse_fail(line_no, "unknown key '" + std::string(key) + "'");
    }
    c.validate();
    return c;
}

SimulationConfig load_simulation_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path + ": " + std::strerror(errno));
    return parse_simulation_config(in);
}

double functional_truth(const SimulationConfig& config)
{
    if (config.target == "hellinger")
        return hellinger_squared_gaussian(config.pair);
    const auto target = target_by_name(config.target);
    return functional_ground_truth_mc(config.pair, target.g, config.truth_mc_samples,
                                      derive_seed(config.base_seed, {0x7275746855ULL}), config.threads)
        .value;
}

std::vector<double> error_rate_truths(const SimulationConfig& config)
{
    std::vector<double> out;
    for (int k : config.ks)
        out.push_back(functional_ground_truth_mc(config.pair, [k](double eta) { return r_k(eta, k); },
                                                 config.truth_mc_samples,
                                                 derive_seed(config.base_seed, {0x7275746852ULL}), config.threads)
                          .value);
    return out;
}

ResultsTable run_simulation(const SimulationConfig& config)
{
    config.validate();

    TargetFunctional target = target_by_name(config.target);
    if (config.target == "hellinger")
        target = hellinger_target(config.pair.prior1);
    const BasisCoefficients alpha = fit_alpha(target, config.ks, 1001);
    const auto fractions = config.fractions();
    const auto specs = config.method_specs();
    const int d = config.weight_dimension();
    const std::size_t n_ks = config.ks.size();
    const std::size_t n_q = n_ks + 1;  // R_k ..., G

    // Weights are data independent: one solve per (N, method).
    std::vector<std::vector<EnsembleWeights>> weights(config.n_grid.size());
    for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni)
        for (const auto& spec : specs)
            weights[ni].push_back(weights_for(spec.method, fractions, d, config.n_grid[ni], spec.lambda.value_or(1.0)));

    const bool needs_table = std::any_of(specs.begin(), specs.end(), [](const MethodSpec& s) { return s.method != Method::plain; });
    const bool needs_plain = std::any_of(specs.begin(), specs.end(), [](const MethodSpec& s) { return s.method == Method::plain; });

    // estimates[cell][spec * n_q + q], cell = ni * trials + trial
    const std::size_t cells = config.n_grid.size() * config.trials;
    std::vector<std::vector<double>> estimates(cells);

    detail::parallel_for(cells, config.threads, [&](std::size_t cell) {
        const std::size_t ni = cell / config.trials;
        const std::size_t trial = cell % config.trials;
        try {
            const std::uint64_t seed = derive_seed(config.base_seed, {ni, trial});
            const SplitDataset split = make_split(config.pair, config.n_grid[ni], seed);

            std::vector<double> plain;
            if (needs_plain) {
                std::vector<std::size_t> rows(split.train.size());
                std::iota(rows.begin(), rows.end(), std::size_t{0});
                plain = error_rates_on_rows(split, rows, config.ks);
            }
            ErrorRateTable table;
            if (needs_table)
                table = error_table(split, config.ks, fractions, config.repeats, derive_seed(seed, {1}), 1);

            auto& out = estimates[cell];
            out.resize(specs.size() * n_q);
            for (std::size_t s = 0; s < specs.size(); ++s) {
                std::vector<std::pair<int, double>> phis;
                for (std::size_t q = 0; q < n_ks; ++q) {
                    const int k = config.ks[q];
                    const double phi = specs[s].method == Method::plain ? plain[q] : phi_k(table, k, weights[ni][s]);
                    phis.emplace_back(k, phi);
                    out[s * n_q + q] = phi;
                }
                out[s * n_q + n_ks] = combine(alpha, phis);
            }
        } catch (const Error& e) {
            throw Error("trial " + std::to_string(trial) + " at N = " + std::to_string(config.n_grid[ni]) + ": "
                        + e.what());
        }
    });

    std::vector<double> truths = error_rate_truths(config);
    truths.push_back(functional_truth(config));

    ResultsTable table;
    const double t = static_cast<double>(config.trials);
    for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
        for (std::size_t s = 0; s < specs.size(); ++s) {
            std::vector<double> phi_variances;
            for (std::size_t q = 0; q < n_q; ++q) {
                std::vector<double> values(config.trials);
                for (std::size_t trial = 0; trial < config.trials; ++trial)
                    values[trial] = estimates[ni * config.trials + trial][s * n_q + q];
                const Moments m = moments(values, truths[q]);

                ResultRow row;
                row.n = config.n_grid[ni];
                row.method = specs[s];
                row.quantity = q < n_ks ? "R_" + std::to_string(config.ks[q]) : "G";
                row.mean = m.mean;
                row.variance = m.variance;
                row.std_error = config.trials > 1 ? std::sqrt(m.variance / (t - 1.0)) : 0.0;
                row.bias = m.mean - truths[q];
                row.mse = m.mse;
                row.trials = config.trials;
                row.seed = config.base_seed;
                row.truth = truths[q];
                if (q < n_ks)
                    phi_variances.push_back(m.variance);
                else
                    row.variance_bound = variance_bound(alpha, phi_variances);
                table.push_back(std::move(row));
            }
        }
    }
    return table;
}

LabeledDataset parse_dataset(std::istream& in, bool has_header)
{
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string raw;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty())
            continue;
        if (has_header && line_no == 1)
            continue;
        const auto fields = split_commas(line);
        if (fields.size() < 2)
            parse_fail(line_no, "need at least one feature column and a label column");
        if (width == 0)
            width = fields.size();
        else if (fields.size() != width)
            parse_fail(line_no, "expected " + std::to_string(width) + " columns, found " + std::to_string(fields.size()));

        std::vector<double> x(fields.size() - 1);
        for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
            if (!parse_number(fields[i], x[i]))
                parse_fail(line_no, "cannot parse feature '" + std::string(fields[i]) + "'");
            if (!std::isfinite(x[i]))
                parse_fail(line_no, "non-finite feature value");
        }
        double label = 0.0;
        if (!parse_number(fields.back(), label) || (label != 0.0 && label != 1.0))
            parse_fail(line_no, "label must be 0 or 1, found '" + std::string(fields.back()) + "'");
        rows.push_back(std::move(x));
        labels.push_back(static_cast<int>(label));
    }
    if (rows.empty())
        throw ParseError("dataset has no rows");

    LabeledDataset data;
    data.points.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j + 1 < width; ++j)
            data.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    data.labels = std::move(labels);
    return data;
}

LabeledDataset load_dataset(const std::string& path, bool has_header)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path + ": " + std::strerror(errno));
    return parse_dataset(in, has_header);
}

void write_dataset(const LabeledDataset& data, const std::string& path, bool header)
{
    data.validate();
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open " + path + " for writing: " + std::strerror(errno));
    if (header) {
        for (int j = 0; j < data.dim(); ++j)
            out << 'x' << j << ',';
        out << "label\n";
    }
    char buf[64];
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (int j = 0; j < data.dim(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", data.points(static_cast<Eigen::Index>(i), j));
            out << buf << ',';
        }
        out << data.labels[i] << '\n';
    }
    if (!out)
        throw IoError("write failed for " + path);
}

void write_results(const ResultsTable& table, std::ostream& out)
{
    out << "N,method,lambda,quantity,mean,stderr,bias,mse,trials,seed,truth,variance_bound\n";
    for (const auto& r : table) {
        out << r.n << ',' << to_string(r.method.method) << ',' << (r.method.lambda ? format_number(*r.method.lambda) : "")
            << ',' << r.quantity << ',' << format_number(r.mean) << ',' << format_number(r.std_error) << ','
            << format_number(r.bias) << ',' << format_number(r.mse) << ',' << r.trials << ',' << r.seed << ','
            << format_number(r.truth) << ',' << (r.variance_bound ? format_number(*r.variance_bound) : "") << '\n';
    }
}

void emit_results(const ResultsTable& table, const std::string& path)
{
    if (table.empty())
        throw ConfigError("refusing to write an empty results table");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path + " for writing: " + std::strerror(errno));
    write_results(table, out);
    out.flush();
    if (!out)
        throw IoError("write failed for " + path + ": " + std::strerror(errno));
}

} // namespace ensdiv
