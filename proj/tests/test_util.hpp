#pragma once

#include <doctest.h>

#include <filesystem>
#include <string>

#include "zsca/error.hpp"
#include "zsca/numerics.hpp"

namespace zsca::testing {

namespace fs = std::filesystem;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

// Finite-difference check of one parameter matrix reached through `get`.
template <typename Model, typename Get, typename Loss>
double param_check(const Model& model, Get get, Loss loss, const Matrix& analytic) {
  Model probe = model;
  const Matrix start = get(probe);
  return grad_check(
      [&](const Matrix& x) {
        get(probe) = x;
        return loss(probe);
      },
      start, analytic);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) : path_(fs::temp_directory_path() / ("zsca_" + tag)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

}  // namespace zsca::testing
