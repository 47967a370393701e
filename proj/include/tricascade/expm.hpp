#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/LU>

namespace tricascade {

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant (Higham 2005 coefficients and threshold).
template <typename Derived>
typename Derived::PlainObject matrix_exponential(const Eigen::MatrixBase<Derived>& a) {
  using Matrix = typename Derived::PlainObject;
  using Scalar = typename Derived::Scalar;
  using std::ceil;
  using std::log2;
  using std::max;

  static constexpr double kB[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                  1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                  670442572800.0,      33522128640.0,       1323241920.0,
                                  40840800.0,          960960.0,            16380.0,
                                  182.0,               1.0};
  constexpr double kTheta13 = 5.371920351148152;

  const Eigen::Index n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Scalar norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > Scalar(kTheta13))
    squarings = static_cast<int>(ceil(log2(static_cast<double>(norm) / kTheta13)));
  const Matrix s = a.derived() / std::ldexp(Scalar(1), squarings);

  const Matrix s2 = s * s;
  const Matrix s4 = s2 * s2;
  const Matrix s6 = s4 * s2;
  auto b = [](int k) { return Scalar(kB[k]); };

  const Matrix u_inner = b(13) * s6 + b(11) * s4 + b(9) * s2;
  const Matrix u = s * (s6 * u_inner + b(7) * s6 + b(5) * s4 + b(3) * s2 + b(1) * id);
  const Matrix v_inner = b(12) * s6 + b(10) * s4 + b(8) * s2;
  const Matrix v = s6 * v_inner + b(6) * s6 + b(4) * s4 + b(2) * s2 + b(0) * id;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  return r;
}

}  // namespace tricascade
