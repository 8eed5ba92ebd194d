#include "helpers.hpp"
#include "mflq/model.hpp"

#include <doctest.h>

using namespace mflq;

TEST_CASE("example parameters validate") {
    CHECK(check_params(ex1_params()).empty());
    CHECK(check_params(ex2_params()).empty());
}

TEST_CASE("shape and definiteness violations are reported by field") {
    GameParams p = ex1_params();
    p.B0 = Eigen::MatrixXd::Zero(2, 1);
    auto issues = check_params(p);
    REQUIRE_FALSE(issues.empty());
    bool found = false;
    for (const auto& i : issues) found = found || i.field == "B0";
    CHECK(found);

    p = ex1_params();
    p.R = s1(0.0);  // not positive definite
    issues = check_params(p);
    REQUIRE_FALSE(issues.empty());
    CHECK(issues.front().field == "R");
    CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("derived coefficients") {
    auto d = derive_coeffs(ex1_params());
    CHECK(d.M0(0, 0) == doctest::Approx(8.0));  // 2 * (1/0.5) * 2
    CHECK(d.M(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("json round trip preserves every field") {
    std::mt19937_64 rng(7);
    GameParams p = random_params(rng, 2);
    InitialLaw law = InitialLaw::zeros(2);
    law.mu0 << 0.3, -0.1;
    law.Sigma0 = Eigen::MatrixXd::Identity(2, 2) * 0.5;
    GameParams q = params_from_json_text(params_to_json_text(p, law));
    CHECK((q.A0 - p.A0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((q.Qf - p.Qf).cwiseAbs().maxCoeff() == 0.0);
    CHECK((q.Gamma2f - p.Gamma2f).cwiseAbs().maxCoeff() == 0.0);
    CHECK((q.etaf - p.etaf).cwiseAbs().maxCoeff() == 0.0);
    CHECK(q.T == p.T);
}

TEST_CASE("omitted eta and noise blocks default to zero") {
    const std::string text = R"({
      "dims": {"n": 1, "n1": 1, "n2": 1},
      "horizon": 2.0,
      "dynamics": {"A0": 1, "A": 1, "B0": 1, "B": 1, "F0": 0, "F": 0, "G": 0},
      "cost": {"Q0": 1, "R0": 1, "Gamma0": 0, "Q0f": 0, "Gamma0f": 0,
               "Q": 1, "R": 1, "Gamma1": 0, "Gamma2": 0,
               "Qf": 0, "Gamma1f": 0, "Gamma2f": 0}
    })";
    GameParams p = params_from_json_text(text);
    CHECK(p.eta0.cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.etaf.cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.D0.cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.D.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("malformed json is rejected") {
    CHECK_THROWS(params_from_json_text("{ not json"));
    CHECK_THROWS(params_from_json_text("{}"));  // missing sections
}
