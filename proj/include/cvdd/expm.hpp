#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>

namespace cvdd {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Dense matrix exponential by scaling and squaring with a [13/13] Pade
/// approximant (Higham 2005). Accurate to ~1e-13 relative for the anti-Hermitian
/// generators used throughout this library.
inline ComplexMatrix expm(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("expm: matrix must be square");
  }
  if (!m.allFinite()) {
    throw std::invalid_argument("expm: non-finite entries");
  }
  const Eigen::Index n = m.rows();
  if (n == 0) return m;

  static constexpr double b[] = {64764752532480000.0,
                                 32382376266240000.0,
                                 7771770303897600.0,
                                 1187353796428800.0,
                                 129060195264000.0,
                                 10559470521600.0,
                                 670442572800.0,
                                 33522128640.0,
                                 1323241920.0,
                                 40840800.0,
                                 960960.0,
                                 16380.0,
                                 182.0,
                                 1.0};
  constexpr double theta13 = 5.371920351148152;

  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm1 > theta13) {
    s = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  }
  const ComplexMatrix a = m / std::ldexp(1.0, s);
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  const ComplexMatrix a2 = a * a;
  const ComplexMatrix a4 = a2 * a2;
  const ComplexMatrix a6 = a4 * a2;

  ComplexMatrix inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
  ComplexMatrix u = a * (a6 * inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  ComplexMatrix inner_v = b[12] * a6 + b[10] * a4 + b[8] * a2;
  ComplexMatrix v = a6 * inner_v + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

  ComplexMatrix r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < s; ++i) r = r * r;
  return r;
}

}  // namespace cvdd
