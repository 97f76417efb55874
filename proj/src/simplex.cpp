#include "heavytail/simplex.hpp"

#include "heavytail/errors.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace heavytail::lp {

namespace {

// Tableau layout (rows m + 2, cols n + 2):
//   rows 0..m-1   constraints, column n+1 holds the right-hand side
//   row m         phase-2 objective (maximize -c^T x)
//   row m+1       phase-1 objective (maximize -x_art)
//   column n      artificial variable, identified by nonbasic label -1
class Tableau {
 public:
  Tableau(const LinearProgram& p, double eps)
      : m_(static_cast<int>(p.b.size())),
        n_(static_cast<int>(p.c.size())),
        eps_(eps),
        basic_(m_),
        nonbasic_(n_ + 1),
        d_(static_cast<std::size_t>(m_ + 2), std::vector<double>(static_cast<std::size_t>(n_ + 2), 0.0)) {
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < n_; ++j) {
        at(i, j) = p.a(i, j);
      }
      basic_[i] = n_ + i;
      at(i, n_) = -1.0;
      at(i, n_ + 1) = p.b(i);
    }
    for (int j = 0; j < n_; ++j) {
      nonbasic_[j] = j;
      at(m_, j) = p.c(j);  // reduced costs of the minimization
    }
    nonbasic_[n_] = -1;
    at(m_ + 1, n_) = 1.0;
  }

  Status run(std::size_t max_pivots) {
    max_pivots_ = max_pivots;
    int r = 0;
    for (int i = 1; i < m_; ++i) {
      if (at(i, n_ + 1) < at(r, n_ + 1)) {
        r = i;
      }
    }
    if (m_ > 0 && at(r, n_ + 1) < -eps_) {
      // Phase 1: bring the artificial variable in at the most violated row.
      pivot(r, n_);
      const Status phase1 = iterate(2);
      if (phase1 == Status::iteration_limit) {
        return phase1;
      }
      if (phase1 != Status::optimal || at(m_ + 1, n_ + 1) < -eps_) {
        return Status::infeasible;
      }
      for (int i = 0; i < m_; ++i) {
        if (basic_[i] == -1) {
          int s = -1;
          for (int j = 0; j <= n_; ++j) {
            if (nonbasic_[j] != -1 && std::fabs(at(i, j)) > eps_ &&
                (s == -1 || nonbasic_[j] < nonbasic_[s])) {
              s = j;
            }
          }
          if (s != -1) {
            pivot(i, s);
          }
        }
      }
    }
    return iterate(1);
  }

  Vector solution() const {
    Vector x = Vector::Zero(n_);
    for (int i = 0; i < m_; ++i) {
      if (basic_[i] >= 0 && basic_[i] < n_) {
        x(basic_[i]) = at(i, n_ + 1);
      }
    }
    return x;
  }

  std::size_t pivots() const { return pivots_; }

 private:
  double& at(int i, int j) { return d_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }
  double at(int i, int j) const {
    return d_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }

  void pivot(int r, int s) {
    ++pivots_;
    const double inv = 1.0 / at(r, s);
    for (int i = 0; i < m_ + 2; ++i) {
      if (i != r && std::fabs(at(i, s)) > 0.0) {
        const double factor = at(i, s) * inv;
        for (int j = 0; j < n_ + 2; ++j) {
          at(i, j) -= at(r, j) * factor;
        }
        at(i, s) = -factor;
      }
    }
    for (int j = 0; j < n_ + 2; ++j) {
      if (j != s) {
        at(r, j) *= inv;
      }
    }
    at(r, s) = inv;
    std::swap(basic_[r], nonbasic_[s]);
  }

  // Bland's rule: lowest-labelled improving column, ties in the ratio test
  // broken by lowest basic label.
  Status iterate(int phase) {
    const int obj = phase == 1 ? m_ : m_ + 1;
    for (;;) {
      if (pivots_ >= max_pivots_) {
        return Status::iteration_limit;
      }
      int s = -1;
      for (int j = 0; j <= n_; ++j) {
        if (phase == 1 && nonbasic_[j] == -1) {
          continue;
        }
        if (at(obj, j) < -eps_ && (s == -1 || nonbasic_[j] < nonbasic_[s])) {
          s = j;
        }
      }
      if (s == -1) {
        return Status::optimal;
      }
      int r = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        if (at(i, s) <= eps_) {
          continue;
        }
        const double ratio = at(i, n_ + 1) / at(i, s);
        if (r == -1 || ratio < best - eps_ ||
            (std::fabs(ratio - best) <= eps_ && basic_[i] < basic_[r])) {
          r = i;
          best = ratio;
        }
      }
      if (r == -1) {
        return Status::unbounded;
      }
      pivot(r, s);
    }
  }

  int m_;
  int n_;
  double eps_;
  std::vector<int> basic_;
  std::vector<int> nonbasic_;
  std::vector<std::vector<double>> d_;
  std::size_t pivots_ = 0;
  std::size_t max_pivots_ = 0;
};

}  // namespace

Solution solve(const LinearProgram& program, double eps, std::size_t max_pivots) {
  if (program.a.rows() != program.b.size() || program.a.cols() != program.c.size()) {
    throw ShapeError("lp::solve: A, b and c dimensions disagree");
  }
  require_finite(program.a, "lp constraint matrix");
  require_finite(program.b, "lp right-hand side");
  require_finite(program.c, "lp objective");

  Tableau tableau(program, eps);
  Solution out;
  out.status = tableau.run(max_pivots);
  out.pivots = tableau.pivots();
  if (out.status == Status::optimal) {
    out.x = tableau.solution();
    out.objective = program.c.dot(out.x);
  }
  return out;
}

const char* to_string(Status status) {
  switch (status) {
    case Status::optimal:
      return "optimal";
    case Status::infeasible:
      return "infeasible";
    case Status::unbounded:
      return "unbounded";
    case Status::iteration_limit:
      return "iteration limit";
  }
  return "unknown";
}

}  // namespace heavytail::lp
