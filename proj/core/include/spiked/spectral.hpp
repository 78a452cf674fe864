#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace spiked {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Aspect ratio d = M/N of a data matrix, restricted to (0, 1].
class Ratio {
public:
    /// Throws DomainError outside (0, 1].
    explicit Ratio(double d);
    static Ratio of(Eigen::Index rows, Eigen::Index cols);

    double value() const { return d_; }
    double sqrt() const;

private:
    double d_;
};

/// Marchenko-Pastur support edges (d-, d+) = ((1 - sqrt d)^2, (1 + sqrt d)^2).
struct MpEdges {
    double lower;
    double upper;
};

struct SpectralSummary {
    std::vector<double> eigenvalues;  // descending
    Ratio d;
    MpEdges edges;
};

// ---------------------------------------------------------------------------
// Dense symmetric eigensolver

/// Full spectrum of a symmetric matrix, sorted descending.
///
/// Householder reduction to tridiagonal form followed by implicit-shift QL.
/// The input must be symmetric to within 1e-10 * max|S_ij| (ValidationError
/// otherwise). Throws NumericalError if QL fails to converge.
std::vector<double> sym_eigenvalues(const Matrix& s);

/// Leading eigenpair of a symmetric matrix (eigenvector unit norm, sign not fixed).
struct Eigenpair {
    double value;
    Vector vector;
};
Eigenpair sym_top_eigenpair(const Matrix& s);

/// Y Y^T; only the lower triangle is filled when `lower_only` is set.
Matrix gram(const Matrix& y, bool lower_only = false);

/// Eigenvalues of Y Y^T, descending. Skips the symmetry check since the
/// Gram matrix is symmetric by construction.
std::vector<double> gram_eigenvalues(const Matrix& y);

/// Leading eigenpair of Y Y^T.
Eigenpair gram_top_eigenpair(const Matrix& y);

SpectralSummary summarize(const Matrix& y);

namespace detail {

struct Tridiagonal {
    Vector diag;
    Vector sub;  // sub(k) couples rows k and k+1; size n-1
};

/// In-place Householder tridiagonalization reading only the lower triangle
/// of `a`. Householder vectors are left below the first subdiagonal and
/// their coefficients in `tau`.
Tridiagonal tridiagonalize(Matrix& a, Vector& tau);

/// Eigenvalues of a symmetric tridiagonal matrix, descending.
std::vector<double> tridiagonal_eigenvalues(Tridiagonal t);

/// Eigenvector of the tridiagonal matrix for a given (converged) eigenvalue,
/// by inverse iteration.
Vector tridiagonal_eigenvector(const Tridiagonal& t, double eigenvalue);

/// Applies the orthogonal factor Q (A = Q T Q^T) to a vector in place.
void apply_householder(const Matrix& a, const Vector& tau, Vector& z);

}  // namespace detail

// ---------------------------------------------------------------------------
// Marchenko-Pastur reference functions

MpEdges mp_edges(Ratio d);

/// MP density for ratio d <= 1; zero outside (d-, d+).
double mp_density(double x, Ratio d);

/// Stieltjes transform s(z) = int dmu_MP(x) / (x - z) for real z outside
/// the open support (d-, d+). Throws DomainError for z inside it.
double stieltjes(double z, Ratio d);

/// Almost-sure limit of the largest eigenvalue of Y Y^T for a rank-one
/// spike of strength lambda: (1 + lambda)(1 + d / lambda) above sqrt(d),
/// d+ otherwise.
double bbp_outlier(double lambda, Ratio d);

/// int f dmu_MP, via the substitution x = d- + (d+ - d-) sin^2(theta) which
/// removes the square-root edge behaviour. Absolute tolerance 1e-10.
double mp_integral(const std::function<double(double)>& f, Ratio d);

}  // namespace spiked
