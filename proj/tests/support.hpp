#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "sigauth/error.hpp"
#include "sigauth/sigdata.hpp"

namespace sigauth::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sigauth_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = g(rng);
  return m;
}

// A sample with T points at 100 Hz whose channel c reads f(c, t).
template <typename F>
SignatureSample sample_from(std::size_t points, F&& f, std::string user = "u001",
                            SampleKind kind = SampleKind::Genuine) {
  SignatureSample s;
  s.user_id = std::move(user);
  s.kind = kind;
  for (std::size_t i = 0; i < points; ++i) s.timestamps.push_back(static_cast<double>(i) / 100.0);
  for (std::size_t c = 0; c < kChannels; ++c)
    for (double t : s.timestamps) s.channels[c].push_back(f(c, t));
  return s;
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an sigauth::Error";
  return ErrorCode::InvalidArgument;
}

template <typename Fn>
Error error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an sigauth::Error";
  return Error(ErrorCode::InvalidArgument, "none");
}

}  // namespace sigauth::test
