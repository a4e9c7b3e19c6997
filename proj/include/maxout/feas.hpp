#pragma once

// Feasibility of linear systems {a·x <= b} ∪ {a·x = b} over R^d.
//
// Systems are persistent: appending rows creates a new system that shares the
// parent's storage, so sibling regions in an enumeration share their common
// prefix. Feasibility is decided by a phase-1 simplex on the auxiliary problem
//   minimize x0  s.t.  a_i·x - x0 <= b_i,  x0 >= 0,
// with free variables split as x = x+ - x-, equality rows kept as a pair of
// opposite inequalities, and Bland's rule against cycling.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "maxout/error.hpp"

namespace maxout {

enum class RowKind { LE, EQ };

/// A batch of rows to be appended in one step.
class RowBlock {
 public:
  explicit RowBlock(int dim) : dim_(dim) {}

  void add(std::span<const double> a, double b, RowKind kind = RowKind::LE) {
    if (static_cast<int>(a.size()) != dim_)
      throw Error(ErrorKind::Shape, "row: expected " + std::to_string(dim_) + " coefficients, got " +
                                        std::to_string(a.size()));
    for (double v : a)
      if (!std::isfinite(v)) throw Error(ErrorKind::Numerical, "row: non-finite coefficient");
    if (!std::isfinite(b)) throw Error(ErrorKind::Numerical, "row: non-finite right-hand side");
    coeffs_.insert(coeffs_.end(), a.begin(), a.end());
    rhs_.push_back(b);
    kinds_.push_back(kind);
  }

  void add(const Eigen::VectorXd& a, double b, RowKind kind = RowKind::LE) {
    add(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())), b, kind);
  }

  int dim() const { return dim_; }
  std::size_t size() const { return rhs_.size(); }
  bool empty() const { return rhs_.empty(); }

 private:
  friend class InequalitySystem;
  int dim_;
  std::vector<double> coeffs_;
  std::vector<double> rhs_;
  std::vector<RowKind> kinds_;
};

struct SystemRow {
  std::vector<double> a;
  double b = 0.0;
  RowKind kind = RowKind::LE;
};

class InequalitySystem {
 public:
  explicit InequalitySystem(int dim) : dim_(dim) {
    if (dim < 1) throw Error(ErrorKind::Shape, "system: dimension must be positive");
  }

  int dim() const { return dim_; }
  std::size_t size() const { return tail_ ? tail_->total : 0; }

  InequalitySystem with_row(std::span<const double> a, double b, RowKind kind = RowKind::LE) const {
    RowBlock block(dim_);
    block.add(a, b, kind);
    return with_rows(std::move(block));
  }

  InequalitySystem with_row(const Eigen::VectorXd& a, double b, RowKind kind = RowKind::LE) const {
    return with_row(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())), b, kind);
  }

  InequalitySystem with_rows(RowBlock block) const {
    if (block.dim() != dim_) throw Error(ErrorKind::Shape, "system: row block dimension mismatch");
    if (block.empty()) return *this;
    auto chunk = std::make_shared<Chunk>();
    chunk->total = size() + block.size();
    chunk->coeffs = std::move(block.coeffs_);
    chunk->rhs = std::move(block.rhs_);
    chunk->kinds = std::move(block.kinds_);
    chunk->parent = tail_;
    InequalitySystem next(dim_);
    next.tail_ = std::move(chunk);
    return next;
  }

  /// Visits rows in insertion order: fn(const double* a, double b, RowKind kind).
  template <class Fn>
  void for_each_row(Fn&& fn) const {
    std::vector<const Chunk*> chain;
    for (const Chunk* c = tail_.get(); c; c = c->parent.get()) chain.push_back(c);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      const Chunk& c = **it;
      for (std::size_t i = 0; i < c.rhs.size(); ++i) fn(c.coeffs.data() + i * dim_, c.rhs[i], c.kinds[i]);
    }
  }

  std::vector<SystemRow> rows() const {
    std::vector<SystemRow> out;
    out.reserve(size());
    for_each_row([&](const double* a, double b, RowKind kind) { out.push_back({{a, a + dim_}, b, kind}); });
    return out;
  }

  /// Plain-text dump, one row per line: "a1 a2 … ad <= b" or "… == b".
  std::string dump() const {
    std::ostringstream os;
    os << std::setprecision(17);
    for_each_row([&](const double* a, double b, RowKind kind) {
      for (int j = 0; j < dim_; ++j) os << a[j] << ' ';
      os << (kind == RowKind::LE ? "<= " : "== ") << b << '\n';
    });
    return os.str();
  }

 private:
  struct Chunk {
    std::vector<double> coeffs;
    std::vector<double> rhs;
    std::vector<RowKind> kinds;
    std::shared_ptr<const Chunk> parent;
    std::size_t total = 0;
  };

  int dim_;
  std::shared_ptr<const Chunk> tail_;
};

enum class FeasibilityStatus { Feasible, Infeasible };

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::Infeasible;
  std::optional<Eigen::VectorXd> witness;  // present iff Feasible
  int pivots = 0;

  bool feasible() const { return status == FeasibilityStatus::Feasible; }
};

struct FeasOptions {
  double pivot_tol = 1e-9;
  double objective_tol = 1e-7;  // feasible iff the phase-1 optimum is at most this
  std::size_t max_rows = 100000;
  int max_pivots = 0;  // 0 selects a bound proportional to the tableau size
};

/// Raised when the simplex cannot reach a verdict (iteration cap, non-finite
/// tableau, or a phase-1 ray that exact arithmetic rules out).
class FeasibilityError : public Error {
 public:
  FeasibilityError(const std::string& what, std::size_t rows)
      : Error(ErrorKind::Numerical, what + " (" + std::to_string(rows) + " rows)"), rows_(rows) {}
  std::size_t rows() const { return rows_; }

 private:
  std::size_t rows_;
};

namespace detail {

// Dense tableau in equation form: x_B[i] + Σ_j T(i,j) x_N[j] = rhs(i), plus an
// objective row z + Σ_j R(j) x_N[j] = zval. Only nonbasic columns are stored.
class Phase1Tableau {
 public:
  Phase1Tableau(const InequalitySystem& sys, const FeasOptions& opt) : d_(sys.dim()), opt_(opt) {
    std::size_t m = 0;
    sys.for_each_row([&](const double*, double, RowKind kind) { m += kind == RowKind::EQ ? 2 : 1; });
    m_ = m;
    n_ = 2 * d_ + 1;
    T_.assign(m_ * n_, 0.0);
    rhs_.assign(m_, 0.0);
    basis_.resize(m_);
    nonbasic_.resize(n_);
    for (int j = 0; j < n_; ++j) nonbasic_[j] = j;
    std::size_t i = 0;
    auto put = [&](const double* a, double b, double sign) {
      double* row = &T_[i * n_];
      for (int j = 0; j < d_; ++j) {
        row[j] = sign * a[j];
        row[d_ + j] = -sign * a[j];
      }
      row[aux()] = -1.0;
      rhs_[i] = sign * b;
      basis_[i] = n_ + static_cast<int>(i);  // slack ids follow the structural and auxiliary ids
      ++i;
    };
    sys.for_each_row([&](const double* a, double b, RowKind kind) {
      put(a, b, 1.0);
      if (kind == RowKind::EQ) put(a, b, -1.0);
    });
    R_.assign(n_, 0.0);
    R_[aux()] = -1.0;  // z = x0
    zval_ = 0.0;
  }

  FeasibilityResult solve() {
    FeasibilityResult result;
    std::size_t start = 0;
    for (std::size_t i = 1; i < m_; ++i)
      if (rhs_[i] < rhs_[start]) start = i;
    if (m_ == 0 || rhs_[start] >= 0.0) {
      result.status = FeasibilityStatus::Feasible;
      result.witness = Eigen::VectorXd::Zero(d_);
      return result;
    }
    pivot(start, aux());
    const int cap = opt_.max_pivots > 0 ? opt_.max_pivots : 50 * static_cast<int>(m_ + n_) + 100;
    int pivots = 1;
    for (;; ++pivots) {
      if (pivots > cap) throw FeasibilityError("phase-1 simplex exceeded pivot limit", m_);
      // Bland: entering variable with the smallest id among improving columns.
      int enter = -1;
      for (int j = 0; j < n_; ++j)
        if (R_[j] > opt_.pivot_tol && (enter < 0 || nonbasic_[j] < nonbasic_[enter])) enter = j;
      if (enter < 0) break;

      long leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        const double t = T_[i * n_ + enter];
        if (t <= opt_.pivot_tol) continue;
        const double ratio = std::max(rhs_[i], 0.0) / t;
        const double tie = 1e-12 * std::max(1.0, std::abs(best));
        if (leave < 0 || ratio < best - tie) {
          best = ratio;
          leave = static_cast<long>(i);
        } else if (ratio <= best + tie && prefer(i, static_cast<std::size_t>(leave))) {
          leave = static_cast<long>(i);
          best = std::min(best, ratio);
        }
      }
      if (leave < 0) throw FeasibilityError("phase-1 objective unbounded", m_);
      pivot(static_cast<std::size_t>(leave), enter);
      if (!std::isfinite(zval_)) throw FeasibilityError("non-finite phase-1 tableau", m_);
    }
    result.pivots = pivots;
    if (zval_ > opt_.objective_tol) {
      result.status = FeasibilityStatus::Infeasible;
      return result;
    }
    result.status = FeasibilityStatus::Feasible;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d_);
    for (std::size_t i = 0; i < m_; ++i) {
      const int var = basis_[i];
      if (var < d_) x(var) += rhs_[i];
      else if (var < 2 * d_) x(var - d_) -= rhs_[i];
    }
    result.witness = std::move(x);
    return result;
  }

 private:
  int aux() const { return 2 * d_; }

  // Leaving-row tie-break: drive the auxiliary variable out first, then Bland.
  bool prefer(std::size_t candidate, std::size_t current) const {
    if (basis_[current] == aux()) return false;
    if (basis_[candidate] == aux()) return true;
    return basis_[candidate] < basis_[current];
  }

  void pivot(std::size_t r, int e) {
    double* prow = &T_[r * n_];
    const double p = prow[e];
    const double inv = 1.0 / p;
    for (int j = 0; j < n_; ++j) prow[j] *= inv;
    prow[e] = inv;
    rhs_[r] *= inv;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &T_[i * n_];
      const double f = row[e];
      if (f == 0.0) continue;
      row[e] = 0.0;
      for (int j = 0; j < n_; ++j) row[j] -= f * prow[j];
      rhs_[i] -= f * rhs_[r];
    }
    const double f = R_[e];
    if (f != 0.0) {
      R_[e] = 0.0;
      for (int j = 0; j < n_; ++j) R_[j] -= f * prow[j];
      zval_ -= f * rhs_[r];
    }
    std::swap(basis_[r], nonbasic_[e]);
  }

  int d_;
  FeasOptions opt_;
  std::size_t m_ = 0;
  int n_ = 0;
  std::vector<double> T_;
  std::vector<double> rhs_;
  std::vector<int> basis_;
  std::vector<int> nonbasic_;
  std::vector<double> R_;
  double zval_ = 0.0;
};

}  // namespace detail

/// Decides whether some x satisfies every row. Deterministic for a fixed system.
inline FeasibilityResult is_feasible(const InequalitySystem& sys, const FeasOptions& opt = {}) {
  if (sys.size() > opt.max_rows)
    throw Error(ErrorKind::Precondition, "system has " + std::to_string(sys.size()) +
                                             " rows, above the configured maximum " +
                                             std::to_string(opt.max_rows));
  detail::Phase1Tableau tableau(sys, opt);
  FeasibilityResult res = tableau.solve();
  if (res.feasible()) {
    double le = 0.0, eq = 0.0;
    sys.for_each_row([&](const double* a, double b, RowKind kind) {
      double ax = 0.0;
      for (int j = 0; j < sys.dim(); ++j) ax += a[j] * (*res.witness)(j);
      if (kind == RowKind::LE) le = std::max(le, ax - b);
      else eq = std::max(eq, std::abs(ax - b));
    });
    if (le > 1e-9 || eq > 1e-7) throw FeasibilityError("witness fails the row check", sys.size());
  }
  return res;
}

/// Largest violation of any row at x (LE: a·x - b, EQ: |a·x - b|); <= 0 means x satisfies all rows.
inline double max_violation(const InequalitySystem& sys, const Eigen::VectorXd& x) {
  double worst = -std::numeric_limits<double>::infinity();
  sys.for_each_row([&](const double* a, double b, RowKind kind) {
    double ax = 0.0;
    for (int j = 0; j < sys.dim(); ++j) ax += a[j] * x(j);
    worst = std::max(worst, kind == RowKind::LE ? ax - b : std::abs(ax - b));
  });
  return worst;
}

}  // namespace maxout
