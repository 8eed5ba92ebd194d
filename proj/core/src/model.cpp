#include "mflq/model.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <fstream>
#include <sstream>

namespace mflq {

using nlohmann::json;

namespace {

constexpr double kSymTol = 1e-12;

std::string issues_to_message(const std::vector<ValidationIssue>& issues) {
    std::ostringstream os;
    os << "invalid game parameters:";
    for (const auto& i : issues) os << "\n  " << i.field << ": " << i.message;
    return os.str();
}

void check_shape(std::vector<ValidationIssue>& out, const std::string& name,
                 const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << "expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
        out.push_back({name, os.str()});
    }
}

void check_vec(std::vector<ValidationIssue>& out, const std::string& name,
               const Eigen::VectorXd& v, Eigen::Index rows) {
    if (v.size() != rows) {
        std::ostringstream os;
        os << "expected length " << rows << ", got " << v.size();
        out.push_back({name, os.str()});
    }
}

bool is_symmetric(const Eigen::MatrixXd& m) {
    double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= kSymTol * scale;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                      Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void check_psd(std::vector<ValidationIssue>& out, const std::string& name,
               const Eigen::MatrixXd& m) {
    if (m.size() == 0) return;
    if (!is_symmetric(m)) {
        out.push_back({name, "not symmetric"});
        return;
    }
    if (min_eigenvalue(m) < -kSymTol) out.push_back({name, "not positive semidefinite"});
}

void check_pd(std::vector<ValidationIssue>& out, const std::string& name,
              const Eigen::MatrixXd& m) {
    if (m.size() == 0) return;
    if (!is_symmetric(m)) {
        out.push_back({name, "not symmetric"});
        return;
    }
    if (min_eigenvalue(m) <= 0.0) out.push_back({name, "not positive definite"});
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& name, Eigen::Index rows,
                             Eigen::Index cols) {
    if (j.is_number()) {
        if (rows != 1 || cols != 1)
            throw std::runtime_error(name + ": scalar given for a non-1x1 matrix");
        return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
    }
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::runtime_error(name + ": expected nested array (row-major)");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                      static_cast<Eigen::Index>(j[0].size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m.cols())
            throw std::runtime_error(name + ": ragged rows");
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    (void)rows;
    (void)cols;
    return m;
}

Eigen::VectorXd parse_vector(const json& j, const std::string& name, Eigen::Index size) {
    if (j.is_number()) {
        if (size != 1) throw std::runtime_error(name + ": scalar given for a non-1 vector");
        return Eigen::VectorXd::Constant(1, j.get<double>());
    }
    if (!j.is_array()) throw std::runtime_error(name + ": expected array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

}  // namespace

ValidationError::ValidationError(std::vector<ValidationIssue> issues)
    : std::runtime_error(issues_to_message(issues)), issues_(std::move(issues)) {}

GameParams GameParams::zeros(int n, int n1, int n2) {
    GameParams p;
    p.n = n;
    p.n1 = n1;
    p.n2 = n2;
    auto Znn = Eigen::MatrixXd::Zero(n, n);
    p.A0 = p.A = p.F0 = p.F = p.G = Znn;
    p.B0 = p.B = Eigen::MatrixXd::Zero(n, n1);
    p.D0 = p.D = Eigen::MatrixXd::Zero(n, n2);
    p.Q0 = p.Q = p.Q0f = p.Qf = Znn;
    p.R0 = p.R = Eigen::MatrixXd::Identity(n1, n1);
    p.Gamma0 = p.Gamma1 = p.Gamma2 = Znn;
    p.Gamma0f = p.Gamma1f = p.Gamma2f = Znn;
    p.eta0 = p.eta = p.eta0f = p.etaf = Eigen::VectorXd::Zero(n);
    p.T = 1.0;
    return p;
}

InitialLaw InitialLaw::zeros(int n) {
    InitialLaw law;
    law.mu0 = law.mu = Eigen::VectorXd::Zero(n);
    law.Sigma0 = law.Sigma = Eigen::MatrixXd::Zero(n, n);
    return law;
}

std::vector<ValidationIssue> check_params(const GameParams& p) {
    std::vector<ValidationIssue> out;
    if (p.n < 1) out.push_back({"n", "must be positive"});
    if (p.n1 < 1) out.push_back({"n1", "must be positive"});
    if (p.n2 < 1) out.push_back({"n2", "must be positive"});
    if (!(p.T > 0.0)) out.push_back({"horizon", "must be positive"});
    if (!out.empty()) return out;

    const Eigen::Index n = p.n, n1 = p.n1, n2 = p.n2;
    check_shape(out, "A0", p.A0, n, n);
    check_shape(out, "A", p.A, n, n);
    check_shape(out, "B0", p.B0, n, n1);
    check_shape(out, "B", p.B, n, n1);
    check_shape(out, "D0", p.D0, n, n2);
    check_shape(out, "D", p.D, n, n2);
    check_shape(out, "F0", p.F0, n, n);
    check_shape(out, "F", p.F, n, n);
    check_shape(out, "G", p.G, n, n);
    check_shape(out, "Q0", p.Q0, n, n);
    check_shape(out, "Q", p.Q, n, n);
    check_shape(out, "Q0f", p.Q0f, n, n);
    check_shape(out, "Qf", p.Qf, n, n);
    check_shape(out, "R0", p.R0, n1, n1);
    check_shape(out, "R", p.R, n1, n1);
    check_shape(out, "Gamma0", p.Gamma0, n, n);
    check_shape(out, "Gamma1", p.Gamma1, n, n);
    check_shape(out, "Gamma2", p.Gamma2, n, n);
    check_shape(out, "Gamma0f", p.Gamma0f, n, n);
    check_shape(out, "Gamma1f", p.Gamma1f, n, n);
    check_shape(out, "Gamma2f", p.Gamma2f, n, n);
    check_vec(out, "eta0", p.eta0, n);
    check_vec(out, "eta", p.eta, n);
    check_vec(out, "eta0f", p.eta0f, n);
    check_vec(out, "etaf", p.etaf, n);
    if (!out.empty()) return out;

    check_psd(out, "Q0", p.Q0);
    check_psd(out, "Q", p.Q);
    check_psd(out, "Q0f", p.Q0f);
    check_psd(out, "Qf", p.Qf);
    check_pd(out, "R0", p.R0);
    check_pd(out, "R", p.R);
    return out;
}

const GameParams& validate(const GameParams& p) {
    auto issues = check_params(p);
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return p;
}

DerivedCoeffs derive_coeffs(const GameParams& p) {
    DerivedCoeffs d;
    Eigen::LDLT<Eigen::MatrixXd> r0(0.5 * (p.R0 + p.R0.transpose()));
    Eigen::LDLT<Eigen::MatrixXd> r(0.5 * (p.R + p.R.transpose()));
    d.M0 = p.B0 * r0.solve(p.B0.transpose());
    d.M = p.B * r.solve(p.B.transpose());
    d.M0 = 0.5 * (d.M0 + d.M0.transpose()).eval();
    d.M = 0.5 * (d.M + d.M.transpose()).eval();
    return d;
}

namespace {

GameParams parse_params(const json& j) {
    GameParams p;
    const auto& dims = j.at("dims");
    p.n = dims.at("n").get<int>();
    p.n1 = dims.at("n1").get<int>();
    p.n2 = dims.at("n2").get<int>();
    p.T = j.at("horizon").get<double>();

    const auto& dyn = j.at("dynamics");
    auto mat = [&](const json& grp, const char* k, Eigen::Index r, Eigen::Index c) {
        return parse_matrix(grp.at(k), k, r, c);
    };
    p.A0 = mat(dyn, "A0", p.n, p.n);
    p.A = mat(dyn, "A", p.n, p.n);
    p.B0 = mat(dyn, "B0", p.n, p.n1);
    p.B = mat(dyn, "B", p.n, p.n1);
    p.F0 = mat(dyn, "F0", p.n, p.n);
    p.F = mat(dyn, "F", p.n, p.n);
    p.G = mat(dyn, "G", p.n, p.n);
    if (dyn.contains("D0"))
        p.D0 = mat(dyn, "D0", p.n, p.n2);
    else
        p.D0 = Eigen::MatrixXd::Zero(p.n, p.n2);
    if (dyn.contains("D"))
        p.D = mat(dyn, "D", p.n, p.n2);
    else
        p.D = Eigen::MatrixXd::Zero(p.n, p.n2);

    const auto& cost = j.at("cost");
    p.Q0 = mat(cost, "Q0", p.n, p.n);
    p.R0 = mat(cost, "R0", p.n1, p.n1);
    p.Gamma0 = mat(cost, "Gamma0", p.n, p.n);
    p.Q0f = mat(cost, "Q0f", p.n, p.n);
    p.Gamma0f = mat(cost, "Gamma0f", p.n, p.n);
    p.Q = mat(cost, "Q", p.n, p.n);
    p.R = mat(cost, "R", p.n1, p.n1);
    p.Gamma1 = mat(cost, "Gamma1", p.n, p.n);
    p.Gamma2 = mat(cost, "Gamma2", p.n, p.n);
    p.Qf = mat(cost, "Qf", p.n, p.n);
    p.Gamma1f = mat(cost, "Gamma1f", p.n, p.n);
    p.Gamma2f = mat(cost, "Gamma2f", p.n, p.n);
    auto vec_or_zero = [&](const char* k) {
        return cost.contains(k) ? parse_vector(cost.at(k), k, p.n)
                                : Eigen::VectorXd::Zero(p.n).eval();
    };
    p.eta0 = vec_or_zero("eta0");
    p.eta0f = vec_or_zero("eta0f");
    p.eta = vec_or_zero("eta");
    p.etaf = vec_or_zero("etaf");
    return p;
}

}  // namespace

GameParams params_from_json_text(const std::string& text) {
    GameParams p = parse_params(json::parse(text));
    validate(p);
    return p;
}

GameParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return params_from_json_text(ss.str());
}

InitialLaw load_initial_law(const std::string& path, int n) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j = json::parse(in);
    InitialLaw law = InitialLaw::zeros(n);
    if (!j.contains("initial_law")) return law;
    const auto& il = j.at("initial_law");
    if (il.contains("mu0")) law.mu0 = parse_vector(il.at("mu0"), "mu0", n);
    if (il.contains("mu")) law.mu = parse_vector(il.at("mu"), "mu", n);
    if (il.contains("Sigma0")) law.Sigma0 = parse_matrix(il.at("Sigma0"), "Sigma0", n, n);
    if (il.contains("Sigma")) law.Sigma = parse_matrix(il.at("Sigma"), "Sigma", n, n);
    return law;
}

std::string params_to_json_text(const GameParams& p, const InitialLaw& law) {
    json j;
    j["dims"] = {{"n", p.n}, {"n1", p.n1}, {"n2", p.n2}};
    j["horizon"] = p.T;
    j["dynamics"] = {{"A0", matrix_to_json(p.A0)}, {"A", matrix_to_json(p.A)},
                     {"B0", matrix_to_json(p.B0)}, {"B", matrix_to_json(p.B)},
                     {"D0", matrix_to_json(p.D0)}, {"D", matrix_to_json(p.D)},
                     {"F0", matrix_to_json(p.F0)}, {"F", matrix_to_json(p.F)},
                     {"G", matrix_to_json(p.G)}};
    j["cost"] = {{"Q0", matrix_to_json(p.Q0)},           {"R0", matrix_to_json(p.R0)},
                 {"Gamma0", matrix_to_json(p.Gamma0)},   {"eta0", vector_to_json(p.eta0)},
                 {"Q0f", matrix_to_json(p.Q0f)},         {"Gamma0f", matrix_to_json(p.Gamma0f)},
                 {"eta0f", vector_to_json(p.eta0f)},     {"Q", matrix_to_json(p.Q)},
                 {"R", matrix_to_json(p.R)},             {"Gamma1", matrix_to_json(p.Gamma1)},
                 {"Gamma2", matrix_to_json(p.Gamma2)},   {"eta", vector_to_json(p.eta)},
                 {"Qf", matrix_to_json(p.Qf)},           {"Gamma1f", matrix_to_json(p.Gamma1f)},
                 {"Gamma2f", matrix_to_json(p.Gamma2f)}, {"etaf", vector_to_json(p.etaf)}};
    j["initial_law"] = {{"mu0", vector_to_json(law.mu0)},
                        {"Sigma0", matrix_to_json(law.Sigma0)},
                        {"mu", vector_to_json(law.mu)},
                        {"Sigma", matrix_to_json(law.Sigma)}};
    return j.dump(2);
}

void save_params(const GameParams& p, const InitialLaw& law, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << params_to_json_text(p, law) << "\n";
}

}  // namespace mflq
