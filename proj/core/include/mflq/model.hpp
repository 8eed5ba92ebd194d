#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace mflq {

// Full parameter set of the major-minor LQ game: dynamics, cost weights,
// horizon and dimensions.  Matrix shapes follow the model equations; Q-weights
// must be symmetric PSD, R-weights symmetric PD.
struct GameParams {
    int n = 1;   // state dimension
    int n1 = 1;  // control dimension
    int n2 = 1;  // noise dimension

    Eigen::MatrixXd A0, A;    // n x n
    Eigen::MatrixXd B0, B;    // n x n1
    Eigen::MatrixXd D0, D;    // n x n2
    Eigen::MatrixXd F0, F, G; // n x n

    Eigen::MatrixXd Q0, Q, Q0f, Qf;  // n x n, symmetric PSD
    Eigen::MatrixXd R0, R;           // n1 x n1, symmetric PD
    Eigen::MatrixXd Gamma0, Gamma1, Gamma2;     // n x n
    Eigen::MatrixXd Gamma0f, Gamma1f, Gamma2f;  // n x n
    Eigen::VectorXd eta0, eta, eta0f, etaf;     // n

    double T = 1.0;

    // All-zero matrices of the right shapes (dynamics included), useful as a
    // starting point for tests.
    static GameParams zeros(int n, int n1, int n2);
};

struct DerivedCoeffs {
    Eigen::MatrixXd M0;  // B0 R0^-1 B0^T
    Eigen::MatrixXd M;   // B R^-1 B^T
};

// Initial distribution: major mean/covariance and the common minor law.
struct InitialLaw {
    Eigen::VectorXd mu0, mu;
    Eigen::MatrixXd Sigma0, Sigma;

    static InitialLaw zeros(int n);
};

struct ValidationIssue {
    std::string field;
    std::string message;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<ValidationIssue> issues);
    const std::vector<ValidationIssue>& issues() const { return issues_; }

private:
    std::vector<ValidationIssue> issues_;
};

// Returns the list of violated invariants (empty iff the parameter set is valid).
std::vector<ValidationIssue> check_params(const GameParams& p);

// Returns p unchanged when valid, throws ValidationError listing every
// violation otherwise.
const GameParams& validate(const GameParams& p);

// M0 = B0 R0^-1 B0^T, M = B R^-1 B^T via symmetric (LDLT) solves, symmetrized.
DerivedCoeffs derive_coeffs(const GameParams& p);

// JSON parameter file I/O per the documented config schema.  Omitted eta
// vectors and initial_law default to zeros.  load_params validates.
GameParams load_params(const std::string& path);
GameParams params_from_json_text(const std::string& text);
InitialLaw load_initial_law(const std::string& path, int n);
void save_params(const GameParams& p, const InitialLaw& law, const std::string& path);
std::string params_to_json_text(const GameParams& p, const InitialLaw& law);

}  // namespace mflq
