#include "sosctrl/certifier.h"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <doctest.h>

#include "json.hpp"
#include "sosctrl/plant.h"
#include "sosctrl/polynomial.h"

using namespace sosctrl;

namespace {

Eigen::VectorXd Vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<int>(values.size()));
  int i = 0;
  for (double value : values) v(i++) = value;
  return v;
}

// One-state plant xdot = f(x) + g0 * u with a box input.
PlantModel ScalarPlant(const std::string& f_expr, double g0, double lo,
                       double hi) {
  PlantModel plant;
  plant.name = "scalar";
  plant.vars = VariableSet::Indexed("x", 1);
  plant.f = PolyVector(1);
  plant.f(0) = ParsePolynomial(f_expr, plant.vars);
  plant.g = PolyMatrix(1, 1);
  plant.g(0, 0) = Polynomial::Constant(plant.vars, g0);
  plant.input_lower = Vec({lo});
  plant.input_upper = Vec({hi});
  plant.input_vertices = BoxVertices(plant.input_lower, plant.input_upper);
  plant.goal_state = Eigen::VectorXd::Zero(1);
  plant.goal_input = Eigen::VectorXd::Zero(1);
  plant.Validate();
  return plant;
}

ClfCandidate SquareCandidate(const PlantModel& plant, double rho,
                             double kappa) {
  ClfCandidate candidate;
  candidate.V = SquaredNorm(plant.vars);
  candidate.rho = rho;
  candidate.kappa = kappa;
  return candidate;
}

bool NotesMention(const CertificateReport& report, const std::string& what) {
  return report.notes.find(what) != std::string::npos;
}

}  // namespace

TEST_CASE("decay plant certifies strictly below its boundary rate") {
  // xdot = -x decays V = x^2 at exactly rate 2, so any kappa below 2 leaves
  // a strict margin everywhere and any kappa at or above 2 leaves none.
  const PlantModel plant = ScalarPlant("-1*x1", 0.0, -1.0, 1.0);

  SUBCASE("strict margin certifies at any sublevel value") {
    for (double rho : {0.5, 10.0}) {
      const CertificateReport report =
          CertifyClf(SquareCandidate(plant, rho, 1.9), plant);
      CAPTURE(rho);
      CHECK(report.status == CertificateStatus::kCertified);
      CHECK(report.positivity_ok);
      CHECK(report.soundness.passed);
      CHECK(report.soundness.evaluated == report.soundness.requested);
      CHECK(report.identity_residual <= 1e-6);
      CHECK(!report.multipliers.empty());
    }
  }

  SUBCASE("the boundary rate itself is refused") {
    // Vdot + 2V vanishes identically: the failure set is the whole line, on
    // which (V - rho)x^2 dips negative, so no certificate can exist.
    const CertificateReport report =
        CertifyClf(SquareCandidate(plant, 0.1, 2.0), plant);
    CHECK(report.status == CertificateStatus::kNotCertified);
    CHECK(NotesMention(report, "derivative"));
  }

  SUBCASE("rates beyond the boundary are refused") {
    const CertificateReport report =
        CertifyClf(SquareCandidate(plant, 0.1, 2.5), plant);
    CHECK(report.status == CertificateStatus::kNotCertified);
  }
}

TEST_CASE("driven scalar plant certifies exactly up to rho = 1/4") {
  // xdot = x + u with |u| <= 1: the best vertex gives Vdot = 2x^2 - 2|x|,
  // which meets -2V = -2x^2 exactly at |x| = 1/2, so rho_max = 1/4.
  const PlantModel plant = ScalarPlant("1*x1", 1.0, -1.0, 1.0);

  CHECK(CertifyClf(SquareCandidate(plant, 0.20, 2.0), plant).status ==
        CertificateStatus::kCertified);
  CHECK(CertifyClf(SquareCandidate(plant, 0.24, 2.0), plant).status ==
        CertificateStatus::kCertified);
  CHECK(CertifyClf(SquareCandidate(plant, 0.26, 2.0), plant).status ==
        CertificateStatus::kNotCertified);
  CHECK(CertifyClf(SquareCandidate(plant, 0.30, 2.0), plant).status ==
        CertificateStatus::kNotCertified);
}

TEST_CASE("certified reports carry a negative sampled strictness margin") {
  const PlantModel plant = ScalarPlant("1*x1", 1.0, -1.0, 1.0);
  const CertificateReport report =
      CertifyClf(SquareCandidate(plant, 0.2, 2.0), plant);
  REQUIRE(report.status == CertificateStatus::kCertified);
  CHECK(report.soundness.worst_margin < 0.0);
  CHECK(report.epsilon == doctest::Approx(1e-4));
  CHECK(report.alpha == 1);
}

TEST_CASE("maximize_rho brackets the analytic limit") {
  const PlantModel plant = ScalarPlant("1*x1", 1.0, -1.0, 1.0);
  BisectionConfig config;
  config.rho_lo = 0.05;
  config.rho_hi = 1.0;
  const BisectionResult result =
      MaximizeRho(SquareCandidate(plant, 0.0, 2.0), plant, {}, config);

  CHECK(result.rho_star >= 0.249);
  CHECK(result.rho_star <= 0.251);
  CHECK(result.report.status == CertificateStatus::kCertified);

  // The certifiable set is an interval: no certified probe may exceed a
  // rejected one.
  double max_certified = 0.0, min_rejected = 2.0;
  for (const auto& [rho, status] : result.probes) {
    if (status == CertificateStatus::kCertified) {
      max_certified = std::max(max_certified, rho);
    } else {
      min_rejected = std::min(min_rejected, rho);
    }
  }
  CHECK(max_certified <= min_rejected);
}

TEST_CASE("maximize_rho returns the upper bound when everything certifies") {
  const PlantModel plant = ScalarPlant("-1*x1", 0.0, -1.0, 1.0);
  BisectionConfig config;
  config.rho_lo = 0.5;
  config.rho_hi = 4.0;
  const BisectionResult result =
      MaximizeRho(SquareCandidate(plant, 0.0, 1.0), plant, {}, config);
  CHECK(result.rho_star == 4.0);
  CHECK(result.probes.size() == 2);
}

TEST_CASE("maximize_rho rejects an uncertifiable lower bound") {
  const PlantModel plant = ScalarPlant("1*x1", 1.0, -1.0, 1.0);
  BisectionConfig config;
  config.rho_lo = 0.3;
  config.rho_hi = 1.0;
  CHECK_THROWS_AS(
      MaximizeRho(SquareCandidate(plant, 0.0, 2.0), plant, {}, config),
      std::invalid_argument);
}

TEST_CASE("toy planar plant certifies the unit-disk guess at rho 0.3") {
  const PlantModel plant = Toy2d();
  ClfCandidate candidate;
  candidate.V = SquaredNorm(plant.vars);
  candidate.rho = 0.3;
  candidate.kappa = 0.1;
  const CertificateReport report = CertifyClf(candidate, plant);
  CHECK(report.status == CertificateStatus::kCertified);
  CHECK(report.positivity_ok);
  CHECK(report.soundness.passed);
  CHECK(!report.multipliers.empty());
}

TEST_CASE("barrier certification on the single-integrator") {
  // xdot = u, |u| <= 1, unsafe region {x >= 1}, h = 1 - x^2. The worst-case
  // decay max_u hdot = 2|x| beats kappa*(x^2 - 1) everywhere h > -1 for
  // kappa = 1, and fails near |x| = 1.105 for kappa = 10.
  const PlantModel plant = ScalarPlant("0", 1.0, -1.0, 1.0);
  CbfCandidate candidate;
  candidate.h = ParsePolynomial("1 - 1*x1^2", plant.vars);
  candidate.beta_minus = -1.0;
  candidate.kappa = 1.0;
  candidate.unsafe_pieces = {{ParsePolynomial("1 - 1*x1", plant.vars)}};

  SUBCASE("gentle decay rate certifies") {
    const CertificateReport report = CertifyCbf(candidate, plant);
    CHECK(report.status == CertificateStatus::kCertified);
    CHECK(report.soundness.passed);
    CHECK(report.soundness.evaluated == report.soundness.requested);
    CHECK(report.identity_residual <= 1e-6);
  }

  SUBCASE("aggressive decay rate is refused") {
    candidate.kappa = 10.0;
    const CertificateReport report = CertifyCbf(candidate, plant);
    CHECK(report.status == CertificateStatus::kNotCertified);
    CHECK(NotesMention(report, "derivative"));
  }

  SUBCASE("constant negative h is vacuously certified") {
    candidate.h = Polynomial::Constant(plant.vars, -1.0);
    candidate.beta_minus = -0.5;
    const CertificateReport report = CertifyCbf(candidate, plant);
    CHECK(report.status == CertificateStatus::kCertified);
    // h <= beta_minus everywhere: nothing satisfies the sampling filter.
    CHECK(report.soundness.evaluated == 0);
    CHECK(report.soundness.passed);
  }

  SUBCASE("constant positive h fails containment, not the derivative") {
    candidate.h = Polynomial::Constant(plant.vars, 1.0);
    candidate.beta_minus = -0.5;
    const CertificateReport report = CertifyCbf(candidate, plant);
    CHECK(report.status == CertificateStatus::kNotCertified);
    CHECK(NotesMention(report, "unsafe_0"));
    CHECK(!NotesMention(report, "derivative"));
  }
}

TEST_CASE("raising the truncation level never flips a verdict to refusal") {
  const PlantModel decay = ScalarPlant("-1*x1", 0.0, -1.0, 1.0);
  const PlantModel driven = ScalarPlant("1*x1", 1.0, -1.0, 1.0);
  const PlantModel toy = Toy2d();

  struct Case {
    const PlantModel* plant;
    ClfCandidate candidate;
  };
  std::vector<Case> corpus;
  corpus.push_back({&decay, SquareCandidate(decay, 0.5, 1.9)});
  corpus.push_back({&driven, SquareCandidate(driven, 0.2, 2.0)});
  corpus.push_back({&driven, SquareCandidate(driven, 0.3, 2.0)});
  {
    ClfCandidate toy_candidate;
    toy_candidate.V = SquaredNorm(toy.vars);
    toy_candidate.rho = 0.3;
    toy_candidate.kappa = 0.1;
    corpus.push_back({&toy, toy_candidate});
  }

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CAPTURE(i);
    CertifyOptions level1;
    const CertificateStatus base =
        CertifyClf(corpus[i].candidate, *corpus[i].plant, level1).status;

    CertifyOptions level2 = level1;
    level2.truncation_level = 2;
    const CertificateStatus raised =
        CertifyClf(corpus[i].candidate, *corpus[i].plant, level2).status;

    if (base == CertificateStatus::kCertified) {
      CHECK(raised != CertificateStatus::kNotCertified);
    }
    if (base == CertificateStatus::kNotCertified) {
      // A sound hierarchy cannot certify what level 1 refuted analytically.
      CHECK(raised != CertificateStatus::kCertified);
    }
  }

  // Full preorder coincides with level 2 on two generators.
  CertifyOptions full;
  full.truncation_level = CertifyOptions::kFullPreorder;
  CHECK(CertifyClf(corpus[1].candidate, driven, full).status ==
        CertificateStatus::kCertified);
}

TEST_CASE("pendulum seed certifies at small rho on the circle manifold") {
  const PlantModel plant = Pendulum();
  const Polynomial V0 = LqrSeed(plant, Eigen::MatrixXd::Identity(3, 3),
                                Eigen::MatrixXd::Identity(1, 1));
  // The downright pose (0, 2, 0) is a drift equilibrium with zero V-slope,
  // so certificates exist only while it stays outside the sublevel set.
  const double v_downright = V0.Evaluate(Vec({0.0, 2.0, 0.0}));
  REQUIRE(v_downright > 0.0);

  ClfCandidate candidate;
  candidate.V = V0;
  candidate.rho = 1e-3;
  candidate.kappa = 0.1;
  const CertificateReport report = CertifyClf(candidate, plant);
  CHECK(report.status == CertificateStatus::kCertified);
  CHECK(report.soundness.evaluated > 0);
  CHECK(report.soundness.passed);

  ClfCandidate beyond = candidate;
  beyond.rho = 1.5 * v_downright;
  CHECK(CertifyClf(beyond, plant).status ==
        CertificateStatus::kNotCertified);
}

TEST_CASE("certificate reports serialize to parseable json") {
  const PlantModel plant = ScalarPlant("1*x1", 1.0, -1.0, 1.0);
  const CertificateReport report =
      CertifyClf(SquareCandidate(plant, 0.2, 2.0), plant);
  const std::string text = ReportToJsonText(report);

  const nlohmann::json j = nlohmann::json::parse(text);
  CHECK(j["status"] == "Certified");
  CHECK(j["solver"]["status"] == "Optimal");
  CHECK(j["soundness"]["passed"] == true);
  CHECK(j["multipliers"].is_array());
  CHECK(!j["multipliers"].empty());
  for (const auto& entry : j["multipliers"]) {
    // Expressions must round-trip through the parser.
    const Polynomial p =
        ParsePolynomial(entry["expression"].get<std::string>(), plant.vars);
    CHECK(p.TotalDegree() >= 0);
  }
}

TEST_CASE("malformed candidates and configs are rejected up front") {
  const PlantModel plant = ScalarPlant("1*x1", 1.0, -1.0, 1.0);
  ClfCandidate ok = SquareCandidate(plant, 0.2, 2.0);

  ClfCandidate bad = ok;
  bad.kappa = 0.0;
  CHECK_THROWS_AS(CertifyClf(bad, plant), std::invalid_argument);
  bad = ok;
  bad.rho = -0.1;
  CHECK_THROWS_AS(CertifyClf(bad, plant), std::invalid_argument);
  bad = ok;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(CertifyClf(bad, plant), std::invalid_argument);
  bad = ok;
  bad.V = ok.V + Polynomial::Constant(plant.vars, 1.0);
  CHECK_THROWS_AS(CertifyClf(bad, plant), std::invalid_argument);
  bad = ok;
  bad.V = SquaredNorm(VariableSet::Indexed("y", 2));
  CHECK_THROWS_AS(CertifyClf(bad, plant), std::invalid_argument);

  CertifyOptions odd;
  odd.multiplier_degree = 3;
  CHECK_THROWS_AS(CertifyClf(ok, plant, odd), std::invalid_argument);

  CbfCandidate cb;
  cb.h = ParsePolynomial("1 - 1*x1^2", plant.vars);
  cb.beta_minus = 0.5;
  cb.unsafe_pieces = {{ParsePolynomial("1 - 1*x1", plant.vars)}};
  CHECK_THROWS_AS(CertifyCbf(cb, plant), std::invalid_argument);
  cb.beta_minus = -1.0;
  cb.unsafe_pieces.clear();
  CHECK_THROWS_AS(CertifyCbf(cb, plant), std::invalid_argument);

  // An odd-degree h leaves the derivative constraint at odd top degree.
  CbfCandidate odd_h;
  odd_h.h = ParsePolynomial("-1*x1^3", plant.vars);
  odd_h.beta_minus = -1.0;
  odd_h.unsafe_pieces = {{ParsePolynomial("1 - 1*x1", plant.vars)}};
  CHECK_THROWS_AS(CertifyCbf(odd_h, plant), std::invalid_argument);
}

TEST_CASE("soundness sampler agrees with analytic margins") {
  const PlantModel plant = ScalarPlant("-1*x1", 0.0, -1.0, 1.0);

  // kappa = 1 leaves margin Vdot + V = -x^2 < 0 at every sampled point.
  const SoundnessSample sound =
      SampleClfSoundness(SquareCandidate(plant, 1.0, 1.0), plant, 2000);
  CHECK(sound.evaluated == 2000);
  CHECK(sound.passed);
  CHECK(sound.worst_margin < 0.0);

  // kappa = 3 flips the margin to +x^2 > 0: the sampler must refuse.
  const SoundnessSample unsound =
      SampleClfSoundness(SquareCandidate(plant, 1.0, 3.0), plant, 2000);
  CHECK(unsound.evaluated == 2000);
  CHECK(!unsound.passed);
  CHECK(unsound.worst_margin > 1e-6);
}

TEST_CASE("halton points are deterministic and fill the unit cube") {
  HaltonSampler a(2), b(2);
  for (int i = 0; i < 32; ++i) {
    const Eigen::VectorXd pa = a.Next();
    const Eigen::VectorXd pb = b.Next();
    CHECK(pa == pb);
    CHECK(pa.minCoeff() >= 0.0);
    CHECK(pa.maxCoeff() < 1.0);
  }
  CHECK_THROWS_AS(HaltonSampler(40), std::invalid_argument);
}

TEST_CASE("manifold projector lands on the pendulum circle") {
  const PlantModel plant = Pendulum();
  const ManifoldProjector projector(plant.state_equalities);
  CHECK(!projector.empty());

  Eigen::VectorXd x = Vec({0.3, 1.7, 0.5});
  REQUIRE(projector.Project(x));
  CHECK(std::abs(plant.state_equalities[0].Evaluate(x)) <= 1e-10);
  // The constraint does not involve x3, so the step must not move it.
  CHECK(x(2) == doctest::Approx(0.5));

  const ManifoldProjector none({});
  Eigen::VectorXd y = Vec({1.0, 2.0, 3.0});
  CHECK(none.Project(y));
  CHECK(y == Vec({1.0, 2.0, 3.0}));
}
