#ifndef SAECF_TYPES_HPP
#define SAECF_TYPES_HPP

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace saecf {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Row-major variant; used for per-item weight slabs so a row gather is a
// contiguous copy.
template <class Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using IndexList = std::vector<std::uint32_t>;

}  // namespace saecf

#endif
