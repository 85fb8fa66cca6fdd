#pragma once

#include <cstdint>
#include <vector>

#include "tost/matrix.hpp"
#include "tost/rng.hpp"

namespace tost {

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // sorted descending
  Matrix eigenvectors;              // column i pairs with eigenvalues[i]
};

// Cyclic Jacobi on a symmetric matrix. Eigenvalues in [-1e-12, 0) are
// rounded up to 0 so PSD inputs never report negative spectra.
EigenDecomposition sym_eig(const Matrix& m);

// d x p matrix with orthonormal columns: Gaussian fill, then modified
// Gram-Schmidt with a second orthogonalization pass.
Matrix random_orthonormal(std::size_t d, std::size_t p, std::uint64_t seed);
Matrix random_orthonormal(std::size_t d, std::size_t p, Rng& rng);

// Max-subtracted softmax.
std::vector<double> softmax(const std::vector<double>& v);

}  // namespace tost
