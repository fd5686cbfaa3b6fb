#pragma once

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>

#include "semiclassic/cartan.hpp"
#include "semiclassic/linalg.hpp"

namespace testutil {

using semiclassic::Mat;

inline Mat rotation2(double theta) {
  Mat r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

// Embeds two 2x2 symplectic factors into dim 4 on the ambient planes
// (x1, y1) = coordinates (0, 2) and (x2, y2) = coordinates (1, 3).  Placing
// the factors contiguously would pair x1 with x2 and is not symplectic.
inline Mat embed_two(const Mat& a, const Mat& b) {
  Mat m = Mat::Zero(4, 4);
  const int pa[2] = {0, 2};
  const int pb[2] = {1, 3};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      m(pa[i], pa[j]) = a(i, j);
      m(pb[i], pb[j]) = b(i, j);
    }
  }
  return m;
}

// Random element of the symplectic group: exp(J0 * S) with S symmetric.
inline Mat random_symplectic(int dim, std::mt19937& rng, double scale = 0.4) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat s(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      s(i, j) = u(rng);
      s(j, i) = s(i, j);
    }
  }
  const Mat a = semiclassic::ambient_j0(dim) * s;
  return a.exp();
}

inline std::string fixtures_dir() { return SEMICLASSIC_FIXTURES_DIR; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << "cannot read " << path;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  ASSERT_TRUE(out.good()) << "cannot write " << path;
  out << content;
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the installed CLI binary with the given arguments, capturing stdout,
// stderr, and the process exit code.
inline CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string base = ::testing::TempDir() + "cli_capture_" + std::to_string(counter++);
  const std::string out_path = base + ".out";
  const std::string err_path = base + ".err";
  const std::string cmd =
      std::string(SEMICLASSIC_CLI_BIN) + " " + args + " >" + out_path + " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  CliResult res;
  if (WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
  res.out = read_file(out_path);
  res.err = read_file(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return res;
}

}  // namespace testutil
