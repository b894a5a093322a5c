#include "lur/preprocess.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace lur::preprocess {

double yeo_johnson(double y, double lambda) {
    constexpr double eps = 1e-12;
    if (lambda == 1.0) {
        return y; // both branches reduce to the identity; skip the rounding of expm1(log1p(y))
    }
    if (y >= 0.0) {
        if (std::abs(lambda) < eps) {
            return std::log1p(y);
        }
        // expm1(lambda * log1p(y)) / lambda is the cancellation-free form of ((y+1)^lambda - 1)/lambda.
        return std::expm1(lambda * std::log1p(y)) / lambda;
    }
    const double p = 2.0 - lambda;
    if (std::abs(p) < eps) {
        return -std::log1p(-y);
    }
    return -std::expm1(p * std::log1p(-y)) / p;
}

double yeo_johnson_log_likelihood(std::span<const double> values, double lambda) {
    const auto n = static_cast<double>(values.size());
    double mean = 0.0;
    std::vector<double> t(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        t[i] = yeo_johnson(values[i], lambda);
        mean += t[i];
    }
    mean /= n;
    double ss = 0.0;
    double jac = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        ss += (t[i] - mean) * (t[i] - mean);
        jac += std::copysign(std::log1p(std::abs(values[i])), values[i]);
    }
    const double var = ss / n;
    if (!(var > 0.0) || !std::isfinite(var)) {
        return -std::numeric_limits<double>::infinity();
    }
    return -0.5 * n * std::log(var) + (lambda - 1.0) * jac;
}

std::size_t count_distinct(std::span<const double> values, std::size_t stop_at) {
    std::set<double> seen;
    for (double v : values) {
        seen.insert(v);
        if (seen.size() >= stop_at) {
            break;
        }
    }
    return seen.size();
}

bool is_constant(std::span<const double> values) { return count_distinct(values, 2) < 2; }

double fit_lambda(std::span<const double> values) {
    if (count_distinct(values, 3) < 3) {
        throw ValidationError("fit_lambda needs at least 3 distinct values");
    }
    constexpr int kGrid = 101;
    const double step = (kLambdaMax - kLambdaMin) / (kGrid - 1);
    int best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kGrid; ++k) {
        const double ll = yeo_johnson_log_likelihood(values, kLambdaMin + step * k);
        if (ll > best_ll) {
            best_ll = ll;
            best = k;
        }
    }
    double a = kLambdaMin + step * std::max(best - 1, 0);
    double b = kLambdaMin + step * std::min(best + 1, kGrid - 1);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = yeo_johnson_log_likelihood(values, c);
    double fd = yeo_johnson_log_likelihood(values, d);
    for (int it = 0; it < 200 && (b - a) > 1e-10; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = yeo_johnson_log_likelihood(values, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = yeo_johnson_log_likelihood(values, d);
        }
    }
    const double refined = 0.5 * (a + b);
    // The grid point stays if refinement wandered onto a worse value (flat or
    // non-finite likelihood near the bounds).
    const double grid_lambda = kLambdaMin + step * best;
    return yeo_johnson_log_likelihood(values, refined) >= best_ll ? refined : grid_lambda;
}

Matrix FittedTransform::apply(const Matrix &x) const {
    if (static_cast<std::size_t>(x.cols()) != columns.size()) {
        throw ValidationError(
            fmt::format("transform expects {} columns, got {}", columns.size(), static_cast<std::size_t>(x.cols())));
    }
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto jj = static_cast<std::size_t>(j);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            out(i, j) = (yeo_johnson(x(i, j), lambdas[jj]) - means[jj]) / sds[jj];
        }
    }
    return out;
}

void FittedTransform::apply_row(std::span<const double> in, std::span<double> out) const {
    for (std::size_t j = 0; j < columns.size(); ++j) {
        out[j] = (yeo_johnson(in[j], lambdas[j]) - means[j]) / sds[j];
    }
}

nlohmann::json FittedTransform::to_json() const {
    return {{"columns", columns}, {"lambdas", lambdas}, {"means", means}, {"sds", sds}, {"standardize", standardize}};
}

FittedTransform FittedTransform::from_json(const nlohmann::json &j) {
    FittedTransform t;
    t.columns = j.at("columns").get<std::vector<std::string>>();
    t.lambdas = j.at("lambdas").get<std::vector<double>>();
    t.means = j.at("means").get<std::vector<double>>();
    t.sds = j.at("sds").get<std::vector<double>>();
    t.standardize = j.at("standardize").get<bool>();
    const auto n = t.columns.size();
    if (t.lambdas.size() != n || t.means.size() != n || t.sds.size() != n) {
        throw ValidationError("transform arrays have inconsistent lengths");
    }
    return t;
}

std::pair<FittedTransform, Matrix> fit_transform(const Matrix &x, const std::vector<std::string> &columns,
                                                 bool standardize, bool fit_lambdas) {
    if (static_cast<std::size_t>(x.cols()) != columns.size()) {
        throw ValidationError("fit_transform: column names do not match the matrix");
    }
    if (x.rows() < 2) {
        throw ValidationError("fit_transform needs at least 2 rows");
    }
    FittedTransform t;
    t.columns = columns;
    t.standardize = standardize;
    Matrix out(x.rows(), x.cols());
    const auto n = static_cast<double>(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const Vector col = x.col(j);
        const std::span<const double> values(col.data(), static_cast<std::size_t>(col.size()));
        if (is_constant(values)) {
            throw ValidationError(fmt::format("column '{}' is constant", columns[static_cast<std::size_t>(j)]));
        }
        const double lambda = fit_lambdas && count_distinct(values, 3) >= 3 ? fit_lambda(values) : 1.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            out(i, j) = yeo_johnson(x(i, j), lambda);
        }
        double mean = 0.0;
        double sd = 1.0;
        if (standardize) {
            mean = out.col(j).sum() / n;
            // Second pass removes the residual rounding from the first mean.
            mean += (out.col(j).array() - mean).sum() / n;
            sd = std::sqrt((out.col(j).array() - mean).square().sum() / (n - 1.0));
            if (!(sd > 0.0) || !std::isfinite(sd)) {
                throw ValidationError(fmt::format("column '{}' has zero spread after transformation",
                                                  columns[static_cast<std::size_t>(j)]));
            }
            out.col(j) = (out.col(j).array() - mean) / sd;
        }
        t.lambdas.push_back(lambda);
        t.means.push_back(mean);
        t.sds.push_back(sd);
    }
    return {std::move(t), std::move(out)};
}

Matrix apply_transform(const FittedTransform &t, const Matrix &x, const std::vector<std::string> &columns) {
    if (static_cast<std::size_t>(x.cols()) != columns.size()) {
        throw ValidationError("apply_transform: column names do not match the matrix");
    }
    Matrix ordered(x.rows(), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
        const auto it = std::find(columns.begin(), columns.end(), t.columns[j]);
        if (it == columns.end()) {
            throw ValidationError(fmt::format("column '{}' required by the transform is missing", t.columns[j]));
        }
        ordered.col(static_cast<Eigen::Index>(j)) = x.col(it - columns.begin());
    }
    return t.apply(ordered);
}

namespace {

// Per-column R^2 against all other columns by least squares. Used when the
// correlation matrix is singular so that exactly collinear columns surface as
// infinite VIF.
std::vector<double> vif_by_regression(const Matrix &z) {
    const Eigen::Index p = z.cols();
    std::vector<double> out(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        Matrix others(z.rows(), p - 1);
        for (Eigen::Index k = 0, c = 0; k < p; ++k) {
            if (k != j) others.col(c++) = z.col(k);
        }
        const Vector target = z.col(j);
        const double tss = target.squaredNorm();
        double rss = tss;
        if (p > 1) {
            // Residual of the projection onto the column space, read off Q^T y.
            // (Eigen 3.4's complete orthogonal solve reads uninitialized
            // memory on rank-deficient input, so the QR is used directly.)
            Eigen::ColPivHouseholderQR<Matrix> qr(others);
            qr.setThreshold(1e-12);
            const Vector qty = qr.householderQ().adjoint() * target;
            const Eigen::Index r = qr.rank();
            rss = r < qty.size() ? qty.tail(qty.size() - r).squaredNorm() : 0.0;
        }
        const double one_minus_r2 = rss / tss;
        out[static_cast<std::size_t>(j)] =
            one_minus_r2 <= 1e-10 ? std::numeric_limits<double>::infinity() : 1.0 / one_minus_r2;
    }
    return out;
}

} // namespace

std::vector<double> variance_inflation(const Matrix &x) {
    const Eigen::Index p = x.cols();
    if (p == 0) {
        return {};
    }
    if (p == 1) {
        return {1.0};
    }
    // Centered, unit-norm columns: z^T z is the correlation matrix.
    Matrix z = x.rowwise() - x.colwise().mean();
    for (Eigen::Index j = 0; j < p; ++j) {
        const double norm = z.col(j).norm();
        if (!(norm > 0.0)) {
            throw ValidationError(fmt::format("VIF: column {} is constant", j));
        }
        z.col(j) /= norm;
    }
    const Matrix corr = z.transpose() * z;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(corr);
    if (eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 1e-10) {
        // VIF_j is the j-th diagonal entry of the inverse correlation matrix.
        const Matrix inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                           eig.eigenvectors().transpose();
        std::vector<double> out(static_cast<std::size_t>(p));
        for (Eigen::Index j = 0; j < p; ++j) {
            out[static_cast<std::size_t>(j)] = inv(j, j);
        }
        return out;
    }
    return vif_by_regression(z);
}

std::vector<std::size_t> vif_screen(const Matrix &x, double threshold) {
    if (x.rows() <= x.cols()) {
        throw ValidationError(fmt::format("vif_screen needs more rows ({}) than columns ({})",
                                          static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols())));
    }
    std::vector<std::size_t> kept(static_cast<std::size_t>(x.cols()));
    for (std::size_t j = 0; j < kept.size(); ++j) {
        kept[j] = j;
    }
    while (kept.size() > 1) {
        Matrix sub(x.rows(), static_cast<Eigen::Index>(kept.size()));
        for (std::size_t j = 0; j < kept.size(); ++j) {
            sub.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(kept[j]));
        }
        const auto vifs = variance_inflation(sub);
        std::size_t worst = 0;
        for (std::size_t j = 1; j < vifs.size(); ++j) {
            if (vifs[j] > vifs[worst]) {
                worst = j;
            }
        }
        if (!(vifs[worst] > threshold)) {
            break;
        }
        kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(worst));
    }
    return kept;
}

} // namespace lur::preprocess
