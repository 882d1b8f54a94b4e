#include "support.hpp"

#include <isopoints/config.hpp>
#include <isopoints/io.hpp>
#include <isopoints/metrics.hpp>
#include <isopoints/synth.hpp>

#include <doctest.h>

#include <sstream>

using namespace iso;

TEST_SUITE("io") {

TEST_CASE("ply round trip") {
  OrientedPoints cloud;
  cloud.points = test::uniform_points(300, 1);
  for (const auto& p : test::uniform_points(300, 2)) cloud.normals.push_back(p.normalized());
  std::stringstream ss;
  write_ply(ss, cloud);
  const std::string text = ss.str();
  CHECK(text.rfind("ply\nformat ascii 1.0\n", 0) == 0);
  CHECK(text.find("element vertex 300\n") != std::string::npos);
  CHECK(text.find("property float nz\n") != std::string::npos);
  const OrientedPoints back = read_ply(ss);
  REQUIRE(back.size() == 300);
  REQUIRE(back.has_normals());
  double worst = 0.0;
  for (std::size_t i = 0; i < 300; ++i)
    worst = std::max({worst, (back.points[i] - cloud.points[i]).cwiseAbs().maxCoeff(),
                      (back.normals[i] - cloud.normals[i]).cwiseAbs().maxCoeff()});
  CHECK(worst <= 1e-9);
}

TEST_CASE("ply without normals and malformed files") {
  std::stringstream plain("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                          "property float z\nend_header\n0 0 0\n1 2 3\n");
  const auto c = read_ply(plain);
  CHECK(c.size() == 2);
  CHECK_FALSE(c.has_normals());
  CHECK(c.points[1] == Point3(1, 2, 3));

  std::stringstream truncated("ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                              "property float z\nend_header\n0 0 0\n");
  CHECK_THROWS_AS(read_ply(truncated), IoError);
  std::stringstream binary("ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n");
  CHECK_THROWS_AS(read_ply(binary), IoError);
  std::stringstream junk("hello\n");
  CHECK_THROWS_AS(read_ply(junk), IoError);
  CHECK_THROWS_AS(read_ply("/nonexistent/dir/file.ply"), IoError);
}

TEST_CASE("weights round trip bitwise") {
  auto net = SirenNetwork::init(16, 2, 30.0, 4);
  net.round_to_float();
  std::stringstream ss;
  write_weights(ss, net);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "ISOW");
  CHECK(bytes.size() == 12 + 3 * 12 + 4 * net.parameter_count());
  const SirenNetwork back = read_weights(ss);
  CHECK((back.parameters().array() == net.parameters().array()).all());
  CHECK(back.layers().front().omega == 30.0);
  for (const auto& p : test::uniform_points(100, 5)) CHECK(std::abs(back.eval(p) - net.eval(p)) <= 1e-12);

  std::stringstream again;
  write_weights(again, back);
  CHECK(again.str() == bytes);

  std::stringstream bad(bytes.substr(0, 20));
  CHECK_THROWS_AS(read_weights(bad), IoError);
  std::string wrong = bytes;
  wrong[0] = 'X';
  std::stringstream magic(wrong);
  CHECK_THROWS_AS(read_weights(magic), IoError);
}

TEST_CASE("log csv") {
  LogEntry a;
  a.iter = 0;
  a.on_sdf = 0.5;
  a.wall_seconds = 0.25;
  LogEntry b = a;
  b.iter = 50;
  b.iso_sdf = 0.125;
  b.iso_normal = 0.0625;
  std::stringstream ss;
  write_log_csv(ss, {a, b});
  std::string header, row0, row1;
  std::getline(ss, header);
  std::getline(ss, row0);
  std::getline(ss, row1);
  CHECK(header == "iter,L_onSDF,L_normal,L_offSDF,L_eikonal,L_isoSDF,L_isoNormal,wall_seconds");
  CHECK(row0 == "0,0.5,0,0,0,,,0.25");
  CHECK(row1 == "50,0.5,0,0,0,0.125,0.0625,0.25");
}

TEST_CASE("format_real is shortest round trip") {
  CHECK(format_real(0.1) == "0.1");
  CHECK(format_real(1.0) == "1");
  const double x = 1.0 / 3.0;
  CHECK(std::stod(format_real(x)) == x);
}

}

TEST_SUITE("config") {

TEST_CASE("precedence flag over file over default") {
  RunConfig rc;
  CHECK(rc.provenance("alpha_off") == Provenance::Default);
  rc.set("alpha_off", "50", Provenance::Flag);
  rc.load_text("# comment\nalpha_off = 10\nK = 12   # trailing\n\nlearning_rate=0.001\n");
  CHECK(rc.fit.alpha_off == 50.0);
  CHECK(rc.provenance("alpha_off") == Provenance::Flag);
  CHECK(rc.sampler.K == 12);
  CHECK(rc.provenance("K") == Provenance::File);
  CHECK(rc.fit.learning_rate == 0.001);
  rc.set("K", "4", Provenance::Flag);
  CHECK(rc.sampler.K == 4);
  CHECK(to_string(Provenance::File) == "file");
}

TEST_CASE("every field is settable and bad input is rejected") {
  RunConfig rc;
  const auto keys = RunConfig::keys();
  CHECK(keys.size() > 30);
  rc.set("tau0", "0.05", Provenance::Flag);
  CHECK(rc.sampler.tau0 == 0.05);
  rc.set("outlier_weighting", "off", Provenance::Flag);
  CHECK_FALSE(rc.fit.outlier_weighting);
  rc.set("psi_literal", "true", Provenance::Flag);
  CHECK(rc.fit.psi_literal);
  rc.set("seed", "18446744073709551615", Provenance::Flag);
  CHECK(rc.fit.seed == 18446744073709551615ULL);
  CHECK_THROWS_AS(rc.set("no_such_key", "1", Provenance::Flag), PreconditionError);
  CHECK_THROWS_AS(rc.set("iters", "12x", Provenance::Flag), PreconditionError);
  CHECK_THROWS_AS(rc.set("psi_literal", "maybe", Provenance::Flag), PreconditionError);
  CHECK_THROWS_AS(rc.load_text("iters 5\n"), PreconditionError);
  CHECK_THROWS_AS(rc.load_file("/nonexistent/config.cfg"), IoError);
}

}

TEST_SUITE("synth") {

TEST_CASE("noisy sphere cloud") {
  SynthConfig cfg;
  cfg.seed = 3;
  const auto s = synthesize(cfg);
  CHECK(s.cloud.size() == 5000);
  CHECK(s.cloud.has_normals());
  std::size_t outliers = 0;
  const auto sphere = AnalyticField::sphere(0.5);
  double spread = 0.0;
  for (std::size_t i = 0; i < s.cloud.size(); ++i) {
    CHECK(FieldDomain::unit_cube().contains(s.cloud.points[i]));
    CHECK(std::abs(s.cloud.normals[i].norm() - 1.0) < 1e-12);
    if (s.is_outlier[i]) {
      ++outliers;
      CHECK(std::abs(sphere.eval(s.cloud.points[i])) >= 0.2 * cfg.diagonal);
    } else {
      spread += std::pow(sphere.eval(s.cloud.points[i]), 2);
    }
  }
  CHECK(outliers == 250);
  CHECK(!s.is_outlier[4749]);
  CHECK(s.is_outlier[4750]);
  CHECK(std::sqrt(spread / 4750) == doctest::Approx(0.01 * cfg.diagonal).epsilon(0.05));
  CHECK(synthesize(cfg).cloud.points == s.cloud.points);
  cfg.shape = "cube";
  CHECK_THROWS_AS(synthesize(cfg), PreconditionError);
}

}
