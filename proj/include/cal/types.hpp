#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace cal {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// External (user-facing) instance identifier, stable across exports.
using InstanceId = std::int64_t;

using MatrixRef = Eigen::Ref<const Matrix>;
using VectorRef = Eigen::Ref<const Vector>;

/// Gather a row subset of `source` into a dense matrix, preserving order.
template <class IndexRange>
Matrix gather_rows(const Matrix& source, const IndexRange& rows) {
  Matrix out(static_cast<Index>(rows.size()), source.cols());
  Index r = 0;
  for (Index i : rows) out.row(r++) = source.row(i);
  return out;
}

}  // namespace cal
