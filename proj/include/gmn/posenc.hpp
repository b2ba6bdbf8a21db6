#pragma once

#include <string>

#include "gmn/graph.hpp"

namespace gmn {

enum class PeMode { none, rwse, lappe };

PeMode parse_pe_mode(const std::string& s);
std::string to_string(PeMode mode);

/// Per-node positional/structural encoding; `vectors` is n x dim().
struct PosEncoding {
    Matrix vectors;
    PeMode mode = PeMode::none;
    std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
};

PosEncoding no_encoding(const Graph& g);

/// Return probabilities [P^1_vv, ..., P^K_vv] of the random-walk matrix
/// P = D^-1 A, one sparse propagation per node. Isolated nodes get zeros.
PosEncoding rwse(const Graph& g, std::size_t K);

/// Largest node count lappe() accepts (dense eigensolver).
inline constexpr std::size_t kLapPeMaxNodes = 5000;

struct EigenDecomposition {
    Vector values;   // ascending
    Matrix vectors;  // column i pairs with values(i)
    std::size_t sweeps = 0;
};

/// Cyclic Jacobi on a dense symmetric matrix. Eigenvalues ascending,
/// each eigenvector's largest-magnitude entry made positive.
EigenDecomposition jacobi_eigen(const Matrix& symmetric, double tol = 1e-14, std::size_t max_sweeps = 100);

/// Combinatorial Laplacian D - A.
Matrix laplacian(const Graph& g);

/// Eigenvectors of L for the d_pe smallest nonzero eigenvalues. Zero columns
/// pad the result when the graph has fewer nonzero eigenvalues.
PosEncoding lappe(const Graph& g, std::size_t d_pe);

/// Column concatenation [X | P]. Mode none returns g unchanged.
Graph concat_pe(const Graph& g, const PosEncoding& pe);

} // namespace gmn
