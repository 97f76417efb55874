#pragma once

#include "heavytail/core.hpp"

#include <cstddef>

namespace heavytail::lp {

/// minimize c^T x  subject to  A x <= b,  x >= 0.
struct LinearProgram {
  DenseMatrix a;
  Vector b;
  Vector c;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Solution {
  Status status = Status::infeasible;
  Vector x;
  double objective = 0.0;
  std::size_t pivots = 0;
};

/// Dense two-phase tableau simplex with Bland's anti-cycling rule. Intended
/// for small problems (a few hundred variables and rows).
Solution solve(const LinearProgram& program, double eps = 1e-11,
               std::size_t max_pivots = 100000);

const char* to_string(Status status);

}  // namespace heavytail::lp
