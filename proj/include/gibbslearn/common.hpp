// Copyright 2026 The gibbslearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GIBBSLEARN_COMMON_HPP
#define GIBBSLEARN_COMMON_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace gibbslearn {

using Complex = std::complex<double>;
using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Every failure raised by the library. The message is the contract; callers
/// (and the CLI) surface it verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.12g", value);
  return buffer;
}

inline double max_abs(const MatrixXc& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline MatrixXc hermitian_part(const MatrixXc& m) {
  return 0.5 * (m + m.adjoint());
}

inline bool is_hermitian(const MatrixXc& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return max_abs(m - m.adjoint()) <= tol;
}

/// Largest singular value.
inline double operator_norm(const MatrixXc& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXc> svd(m);
  return svd.singularValues()(0);
}

inline double frobenius_norm_sq(const MatrixXc& m) { return m.squaredNorm(); }

}  // namespace gibbslearn

#endif  // GIBBSLEARN_COMMON_HPP
