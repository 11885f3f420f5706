#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "ksdgof/errors.hpp"

namespace ksdgof {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A sample of n points in R^d, stored one point per column (d x n).
using Dataset = Eigen::MatrixXd;

using ConstPoint = Eigen::Ref<const Eigen::VectorXd>;

/// Wraps scalar observations as a 1 x n dataset.
inline Dataset dataset_from_values(std::span<const double> values) {
    Dataset data(1, static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        data(0, static_cast<Eigen::Index>(i)) = values[i];
    }
    return data;
}

inline std::vector<double> values_of(const Dataset& data) {
    if (data.rows() != 1) {
        throw InputError("values_of: expected one-dimensional data, got d = " +
                         std::to_string(data.rows()));
    }
    return {data.data(), data.data() + data.cols()};
}

namespace detail {

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* where) {
    if (a != b || a < 1) {
        throw InputError(std::string(where) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
    }
}

inline void require_nonempty(const Dataset& data, const char* where) {
    if (data.cols() < 1 || data.rows() < 1) {
        throw InputError(std::string(where) + ": empty dataset");
    }
}

}  // namespace detail
}  // namespace ksdgof
