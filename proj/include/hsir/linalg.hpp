#pragma once

#include <vector>

#include "hsir/tensor.hpp"

namespace hsir {

/// Eigenvalues of a symmetric n x n matrix (row-major), descending order.
/// Cyclic Jacobi sweeps; intended for the small Gram matrices used in
/// rank diagnostics, not large-scale work.
std::vector<double> sym_eigenvalues(const std::vector<double>& m, int n);

/// Singular values of a rows x cols matrix, descending, via the Gram matrix
/// of the smaller side.
std::vector<double> singular_values(const Tensor& a);

}  // namespace hsir
