#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lur {

inline constexpr const char *kToolkitVersion = "0.3.1";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Input that violates a documented contract (bad file, bad config, bad argument).
/// The CLI maps it to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure while computing something from otherwise valid input (singular fit,
/// too many failed cells, ...). The CLI maps it to exit code 2.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::vector<double> to_std(const Vector &v) { return {v.data(), v.data() + v.size()}; }

inline Vector to_eigen(const std::vector<double> &v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace lur
