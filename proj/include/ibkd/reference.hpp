#pragma once

// Straightforward single-threaded versions of the parallel kernels. They are
// kept for the test suite (parallel output must match them bit-for-bit or to
// rounding) and as the baseline in bench/.

#include <cstddef>
#include <vector>

#include "ibkd/evalsuite.hpp"
#include "ibkd/kernels.hpp"
#include "ibkd/linalg.hpp"

namespace ibkd::serial {

/// Textbook triple loop, i-j-k order.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Evaluates every (i,j) entry independently, no symmetry shortcut.
Matrix gram(const kernels::KernelSpec& spec, const Matrix& rows);

/// Materializes H = I − (1/n)𝟙𝟙ᵀ and returns H·K·H.
Matrix center_explicit(const Matrix& k);

/// (1/l²)·tr(Kx·H·Ks·H) by explicit matrix products.
double hsic_explicit(const Matrix& x, const Matrix& s, const kernels::KernelSpec& kx, const kernels::KernelSpec& ks);

/// Full sort of all corpus scores per query.
std::vector<eval::RankedResult> exact_retrieve(const Matrix& queries, const Matrix& corpus, std::size_t k,
                                               eval::Score score);

/// Two-pass sample covariance.
Matrix covariance(const Matrix& embeddings);

}  // namespace ibkd::serial
