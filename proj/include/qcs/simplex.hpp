#pragma once

// Revised primal simplex for l1-constrained sums of ReLUs:
//
//   minimize  sum_r [ sigma_r <a_{i(r)}, z> + c_r ]_+   subject to ||z||_1 <= R.
//
// With z = u+ - u-, slack s and w+ - w- = sigma_r <a, z> + c_r this is the LP
//
//   min 1^T w+   s.t.   w+_r - w-_r - sigma_r a_{i(r)}^T (u+ - u-) = c_r   (one row per term)
//                       1^T u+ + 1^T u- + s = R
//                       u+, u-, w+, w-, s >= 0.
//
// Every term row owns the unit columns of w+_r / w-_r. A basis therefore
// consists of one unit column for most rows plus k <= 2n+1 structural columns
// (u+, u-, s) covering the remaining k rows. Only the k x k block of the
// structural columns on those rows is kept, as an explicit inverse that is
// updated per pivot and refactored periodically. The all-slack basis
// (w+_r or w-_r by the sign of c_r, s = R) is feasible, so no phase one is needed.
//
// Pricing is Dantzig's rule with u+/u- reduced costs divided by the norm of
// their constraint column, which cuts the pivot count by an order of
// magnitude on these problems. Long runs of degenerate pivots switch to
// Bland's rule until progress resumes.
//
// Optionally a second phase then minimizes 1^T (u+ + u-) = ||z||_1 over the
// optimal face: nonbasic columns with a positive reduced cost are fixed at
// zero and the simplex continues with the new cost vector.

#include "qcs/types.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace qcs::lp {

struct ReluProgram {
  const Matrix* matrix = nullptr;    // m x n, rows a_i
  std::vector<Index> measurement;    // i(r)
  std::vector<double> sign;          // sigma_r
  std::vector<double> offset;        // c_r
  double radius = 1.0;

  Index terms() const { return static_cast<Index>(measurement.size()); }
};

struct SimplexOptions {
  Index max_pivots = 0;            // 0: automatic
  int refactor_every = 50;
  double pivot_tol = 1e-9;
  double cost_tol = 1e-9;
  double feas_tol = 1e-9;
  int degenerate_streak_for_bland = 64;
  bool min_l1_tiebreak = true;     // pick the smallest ||z||_1 among optimal vertices
};

enum class SimplexStatus { Optimal, IterationLimit, NumericalFailure };

inline std::string to_string(SimplexStatus s) {
  switch (s) {
    case SimplexStatus::Optimal: return "optimal";
    case SimplexStatus::IterationLimit: return "iteration-limit";
    case SimplexStatus::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

struct SimplexResult {
  Vector z;
  double objective = 0.0;  // sum_r [.]_+ evaluated at z
  double lp_objective = 0.0;  // 1^T w+ of the final basis
  Index pivots = 0;
  Index bland_pivots = 0;
  Index tiebreak_pivots = 0;
  SimplexStatus status = SimplexStatus::Optimal;
};

/// Evaluates the objective directly.
inline double relu_program_value(const ReluProgram& p, const Vector& z) {
  const Vector az = (*p.matrix) * z;
  double sum = 0.0;
  for (Index r = 0; r < p.terms(); ++r) {
    const auto ur = static_cast<std::size_t>(r);
    sum += relu(p.sign[ur] * az(p.measurement[ur]) + p.offset[ur]);
  }
  return sum;
}

class ReluSimplex {
 public:
  ReluSimplex(const ReluProgram& p, SimplexOptions opt = {})
      : p_(p), a_(*p.matrix), opt_(opt), n_(a_.cols()), m_(a_.rows()), rows_(p.terms()) {
    if (p.sign.size() != p.measurement.size() || p.offset.size() != p.measurement.size())
      throw DimensionError("ReluSimplex: term arrays differ in length");
    if (!(p.radius >= 0.0)) throw std::invalid_argument("ReluSimplex: radius must be nonnegative");
    for (Index i : p.measurement)
      if (i < 0 || i >= m_) throw DimensionError("ReluSimplex: measurement index out of range");
    if (opt_.max_pivots <= 0) opt_.max_pivots = 50 * (rows_ + 2 * n_ + 1) + 1000;
    kmax_ = 2 * n_ + 1;
    col_norm_ = Vector::Ones(n_);
    for (Index r = 0; r < rows_; ++r) col_norm_ += a_.row(meas(r)).transpose().cwiseAbs2();
    col_norm_ = col_norm_.cwiseSqrt();
  }

  SimplexResult solve() {
    init_basis();
    SimplexResult res;
    int since_refactor = 0;
    int degenerate = 0;
    bool bland = false;
    bool fix_pending = false;
    Vector yrow(rows_);
    Vector g(n_);
    Vector wmeas(m_);

    for (;;) {
      if (res.pivots >= opt_.max_pivots) {
        res.status = SimplexStatus::IterationLimit;
        break;
      }
      if (since_refactor >= opt_.refactor_every) {
        if (!refactor()) {
          res.status = SimplexStatus::NumericalFailure;
          break;
        }
        since_refactor = 0;
      }

      // Duals: y_r = cost of the unit column basic in row r, the rest from the
      // structural block.
      compute_duals(yrow);
      const double y_l1 = y_l1_;

      // Pricing.
      wmeas.setZero();
      for (Index r = 0; r < rows_; ++r) wmeas(meas(r)) += yrow(r) * sgn(r);
      g.noalias() = a_.transpose() * wmeas;

      Index enter = -1;
      double best = -opt_.cost_tol;
      auto consider = [&](Index var, double d, double scale = 1.0) {
        if (fix_pending) {
          if (d > opt_.cost_tol) fixed_[static_cast<std::size_t>(var)] = 1;
          return;
        }
        if (d >= -opt_.cost_tol || fixed_[static_cast<std::size_t>(var)]) return;
        if (bland) {
          if (enter < 0 || var < enter) enter = var, best = d;
        } else if (d / scale < best) {
          best = d / scale;
          enter = var;
        }
      };
      const double cu = tiebreak_ ? 1.0 : 0.0;
      const double cw = tiebreak_ ? 0.0 : 1.0;
      auto price = [&] {
        for (Index j = 0; j < n_; ++j) {
          if (struct_pos_[static_cast<std::size_t>(j)] < 0) consider(j, cu + g(j) - y_l1, col_norm_(j));
          if (struct_pos_[static_cast<std::size_t>(n_ + j)] < 0) consider(n_ + j, cu - g(j) - y_l1, col_norm_(j));
        }
        if (struct_pos_[static_cast<std::size_t>(2 * n_)] < 0) consider(2 * n_, -y_l1);
        for (Index r = 0; r < rows_; ++r) {
          const auto st = state_[static_cast<std::size_t>(r)];
          if (st != RowState::Plus) consider(plus_var(r), cw - yrow(r));
          if (st != RowState::Minus) consider(minus_var(r), yrow(r));
        }
      };
      price();
      if (enter < 0) {
        if (tiebreak_ || !opt_.min_l1_tiebreak) {
          res.status = SimplexStatus::Optimal;
          break;
        }
        // Restrict to the optimal face and switch to the l1 cost.
        fix_pending = true;
        price();
        fix_pending = false;
        tiebreak_ = true;
        degenerate = 0;
        bland = false;
        continue;
      }

      // Direction d = B^{-1} a_q.
      const bool enter_struct = enter < kmax_;
      Index enter_row = -1;
      double enter_coef = 0.0;
      if (!enter_struct) {
        enter_row = (enter - kmax_) / 2;
        enter_coef = ((enter - kmax_) % 2 == 0) ? 1.0 : -1.0;
        if (state_[static_cast<std::size_t>(enter_row)] != RowState::Open) {
          // The row's own unit column is basic; the pair is never priced in
          // by a consistent dual, so this only happens after numerical drift.
          if (!refactor()) {
            res.status = SimplexStatus::NumericalFailure;
            break;
          }
          since_refactor = 0;
          continue;
        }
      }
      const Index k = k_;
      Vector col_r(k);
      for (Index a = 0; a < k; ++a) {
        const Index r = rows_u_[static_cast<std::size_t>(a)];
        col_r(a) = enter_struct ? coef(r, enter) : (r == enter_row ? enter_coef : 0.0);
      }
      const Vector d_u = binv_.topLeftCorner(k, k) * col_r;
      const Vector u_du = structural_times(d_u);  // (U d_U) on measurement scale: A v

      // Ratio test (Harris two-pass) over structural positions and unit-column rows.
      double theta_max = std::numeric_limits<double>::infinity();
      for (Index b = 0; b < k; ++b)
        if (d_u(b) > opt_.pivot_tol) theta_max = std::min(theta_max, (xu_(b) + opt_.feas_tol) / d_u(b));
      auto d_row = [&](Index r) {
        const double aq = enter_struct ? coef(r, enter) : 0.0;
        return row_sign(r) * (aq - sgn(r) * u_du(meas(r)));
      };
      for (Index r = 0; r < rows_; ++r) {
        if (state_[static_cast<std::size_t>(r)] == RowState::Open) continue;
        const double d = d_row(r);
        if (d > opt_.pivot_tol) theta_max = std::min(theta_max, (xrow_(r) + opt_.feas_tol) / d);
      }
      if (!std::isfinite(theta_max)) {
        res.status = SimplexStatus::NumericalFailure;  // bounded below by 0, so unboundedness is drift
        break;
      }
      Index leave_pos = -1;  // structural position
      Index leave_row = -1;  // unit-column row
      double leave_d = 0.0;
      Index leave_var = std::numeric_limits<Index>::max();
      auto take = [&](double d, Index var, Index pos, Index row) {
        const bool better = bland ? (var < leave_var) : (d > leave_d);
        if (leave_var == std::numeric_limits<Index>::max() || better) {
          leave_d = d;
          leave_var = var;
          leave_pos = pos;
          leave_row = row;
        }
      };
      for (Index b = 0; b < k; ++b) {
        const double d = d_u(b);
        if (d > opt_.pivot_tol && xu_(b) / d <= theta_max) take(d, cols_u_[static_cast<std::size_t>(b)], b, -1);
      }
      for (Index r = 0; r < rows_; ++r) {
        if (state_[static_cast<std::size_t>(r)] == RowState::Open) continue;
        const double d = d_row(r);
        if (d > opt_.pivot_tol && xrow_(r) / d <= theta_max) take(d, basic_var_of_row(r), -1, r);
      }
      if (leave_pos < 0 && leave_row < 0) {
        res.status = SimplexStatus::NumericalFailure;
        break;
      }
      const double leave_value = leave_pos >= 0 ? xu_(leave_pos) : xrow_(leave_row);
      const double theta = std::max(0.0, leave_value / leave_d);

      // Primal update.
      for (Index b = 0; b < k; ++b) xu_(b) = std::max(0.0, xu_(b) - theta * d_u(b));
      for (Index r = 0; r < rows_; ++r) {
        if (state_[static_cast<std::size_t>(r)] == RowState::Open) continue;
        const double d = d_row(r);
        if (d != 0.0) xrow_(r) = std::max(0.0, xrow_(r) - theta * d);
      }

      // Basis change.
      bool ok = true;
      if (enter_struct && leave_pos >= 0) {
        ok = replace_column(leave_pos, enter, d_u, theta);
      } else if (enter_struct) {
        ok = grow(enter, leave_row, d_u, theta);
      } else if (leave_row >= 0) {
        ok = swap_rows(enter_row, enter_coef, leave_row, theta);
      } else {
        ok = shrink(leave_pos, enter_row, enter_coef, theta);
      }
      ++res.pivots;
      if (tiebreak_) ++res.tiebreak_pivots;
      ++since_refactor;
      if (bland) ++res.bland_pivots;
      if (!ok) {
        if (!refactor()) {
          res.status = SimplexStatus::NumericalFailure;
          break;
        }
        since_refactor = 0;
      }

      if (theta * leave_d <= opt_.feas_tol) {
        if (++degenerate >= opt_.degenerate_streak_for_bland) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
    }

    refactor();
    res.z = current_z();
    res.objective = relu_program_value(p_, res.z);
    res.lp_objective = 0.0;
    for (Index r = 0; r < rows_; ++r)
      if (state_[static_cast<std::size_t>(r)] == RowState::Plus) res.lp_objective += xrow_(r);
    return res;
  }

 private:
  enum class RowState : std::int8_t { Plus, Minus, Open };

  Index meas(Index r) const { return p_.measurement[static_cast<std::size_t>(r)]; }
  double sgn(Index r) const { return p_.sign[static_cast<std::size_t>(r)]; }
  double rhs(Index r) const { return r == rows_ ? p_.radius : p_.offset[static_cast<std::size_t>(r)]; }
  Index plus_var(Index r) const { return kmax_ + 2 * r; }
  Index minus_var(Index r) const { return kmax_ + 2 * r + 1; }
  double row_sign(Index r) const { return state_[static_cast<std::size_t>(r)] == RowState::Plus ? 1.0 : -1.0; }
  Index basic_var_of_row(Index r) const {
    return state_[static_cast<std::size_t>(r)] == RowState::Plus ? plus_var(r) : minus_var(r);
  }

  // Coefficient of structural variable `var` in row r (r == rows_ is the l1 row).
  double coef(Index r, Index var) const {
    if (r == rows_) return 1.0;
    if (var < n_) return -sgn(r) * a_(meas(r), var);
    if (var < 2 * n_) return sgn(r) * a_(meas(r), var - n_);
    return 0.0;
  }

  // For a vector t over structural positions returns A v with
  // v_j = t(u-_j) - t(u+_j), so that (U t)_r = sigma_r (A v)_{i(r)} for term rows.
  Vector structural_times(const Vector& t) const {
    Vector v = Vector::Zero(n_);
    for (Index b = 0; b < k_; ++b) {
      const Index var = cols_u_[static_cast<std::size_t>(b)];
      if (var < n_) v(var) -= t(b);
      else if (var < 2 * n_) v(var - n_) += t(b);
    }
    return a_ * v;
  }

  void init_basis() {
    state_.assign(static_cast<std::size_t>(rows_), RowState::Plus);
    xrow_.resize(rows_);
    for (Index r = 0; r < rows_; ++r) {
      const double c = rhs(r);
      state_[static_cast<std::size_t>(r)] = c >= 0.0 ? RowState::Plus : RowState::Minus;
      xrow_(r) = std::abs(c);
    }
    struct_pos_.assign(static_cast<std::size_t>(kmax_), -1);
    row_pos_.assign(static_cast<std::size_t>(rows_ + 1), -1);
    cols_u_.assign(1, 2 * n_);
    rows_u_.assign(1, rows_);
    struct_pos_[static_cast<std::size_t>(2 * n_)] = 0;
    row_pos_[static_cast<std::size_t>(rows_)] = 0;
    k_ = 1;
    binv_ = Eigen::MatrixXd::Zero(kmax_, kmax_);
    binv_(0, 0) = 1.0;
    xu_ = Vector::Zero(kmax_);
    xu_(0) = p_.radius;
    fixed_.assign(static_cast<std::size_t>(kmax_ + 2 * rows_), 0);
    tiebreak_ = false;
  }

  void compute_duals(Vector& yrow) {
    // y_E: cost of the row's unit column (1 for w+ in the first phase, else
    // 0). t_b = sum_{E rows} y_r coef(r, col_b), c_U the structural costs.
    const double yplus = tiebreak_ ? 0.0 : 1.0;
    Vector pm = Vector::Zero(m_);
    if (yplus != 0.0)
      for (Index r = 0; r < rows_; ++r)
        if (state_[static_cast<std::size_t>(r)] == RowState::Plus) pm(meas(r)) += sgn(r);
    const Vector apm = yplus == 0.0 ? Vector::Zero(n_) : Vector(a_.transpose() * pm);
    Vector t(k_);
    for (Index b = 0; b < k_; ++b) {
      const Index var = cols_u_[static_cast<std::size_t>(b)];
      if (var >= 2 * n_) {
        t(b) = 0.0;
      } else {
        const double s = apm(var < n_ ? var : var - n_);
        t(b) = (tiebreak_ ? 1.0 : 0.0) - (var < n_ ? -s : s);
      }
    }
    // y_U^T U_R = c_U^T - y_E^T U_E.
    const Vector yu = (t.transpose() * binv_.topLeftCorner(k_, k_)).transpose();
    for (Index r = 0; r < rows_; ++r) {
      const auto st = state_[static_cast<std::size_t>(r)];
      if (st == RowState::Plus) yrow(r) = yplus;
      else if (st == RowState::Minus) yrow(r) = 0.0;
      else yrow(r) = yu(row_pos_[static_cast<std::size_t>(r)]);
    }
    y_l1_ = yu(row_pos_[static_cast<std::size_t>(rows_)]);
  }

  // Entering structural replaces structural at position l; rows unchanged.
  bool replace_column(Index l, Index var, const Vector& d_u, double theta) {
    const double piv = d_u(l);
    if (std::abs(piv) < opt_.pivot_tol) return false;
    auto bi = binv_.topLeftCorner(k_, k_);
    bi.row(l) /= piv;
    for (Index b = 0; b < k_; ++b)
      if (b != l && d_u(b) != 0.0) bi.row(b) -= d_u(b) * bi.row(l);
    struct_pos_[static_cast<std::size_t>(cols_u_[static_cast<std::size_t>(l)])] = -1;
    cols_u_[static_cast<std::size_t>(l)] = var;
    struct_pos_[static_cast<std::size_t>(var)] = l;
    xu_(l) = theta;
    return true;
  }

  // Entering structural, leaving unit column of row r0: block grows by one.
  bool grow(Index var, Index r0, const Vector& d_u, double theta) {
    if (k_ >= kmax_) return false;
    const Index k = k_;
    Vector u_r0(k);
    for (Index b = 0; b < k; ++b) u_r0(b) = coef(r0, cols_u_[static_cast<std::size_t>(b)]);
    const double s = coef(r0, var) - u_r0.dot(d_u);
    if (std::abs(s) < opt_.pivot_tol) return false;
    const Vector w = (u_r0.transpose() * binv_.topLeftCorner(k, k)).transpose();
    binv_.topLeftCorner(k, k).noalias() += (d_u / s) * w.transpose();
    binv_.block(0, k, k, 1) = -d_u / s;
    binv_.block(k, 0, 1, k) = -w.transpose() / s;
    binv_(k, k) = 1.0 / s;
    cols_u_.push_back(var);
    rows_u_.push_back(r0);
    struct_pos_[static_cast<std::size_t>(var)] = k;
    row_pos_[static_cast<std::size_t>(r0)] = k;
    state_[static_cast<std::size_t>(r0)] = RowState::Open;
    xu_(k) = theta;
    ++k_;
    return true;
  }

  // Entering unit column of open row r1, leaving unit column of row r0:
  // r0 takes r1's place in the block (Sherman-Morrison on one row).
  bool swap_rows(Index r1, double coef1, Index r0, double theta) {
    const Index k = k_;
    const Index pos = row_pos_[static_cast<std::size_t>(r1)];
    Vector u_r0(k);
    for (Index b = 0; b < k; ++b) u_r0(b) = coef(r0, cols_u_[static_cast<std::size_t>(b)]);
    auto bi = binv_.topLeftCorner(k, k);
    const Vector col_p = bi.col(pos);
    const double denom = u_r0.dot(col_p);
    if (std::abs(denom) < opt_.pivot_tol) return false;
    // delta = u_r0 - u_r1; (delta^T Binv) = u_r0^T Binv - e_pos^T.
    Eigen::RowVectorXd dt = u_r0.transpose() * bi;
    dt(pos) -= 1.0;
    bi.noalias() -= (col_p / denom) * dt;
    rows_u_[static_cast<std::size_t>(pos)] = r0;
    row_pos_[static_cast<std::size_t>(r0)] = pos;
    row_pos_[static_cast<std::size_t>(r1)] = -1;
    state_[static_cast<std::size_t>(r0)] = RowState::Open;
    state_[static_cast<std::size_t>(r1)] = coef1 > 0 ? RowState::Plus : RowState::Minus;
    xrow_(r1) = theta;
    return true;
  }

  // Entering unit column of open row r1, leaving structural at position l:
  // block loses column l and row r1.
  bool shrink(Index l, Index r1, double coef1, double theta) {
    const Index k = k_;
    const Index pos = row_pos_[static_cast<std::size_t>(r1)];
    auto bi = binv_.topLeftCorner(k, k);
    const double piv = bi(l, pos);
    if (std::abs(piv) < opt_.pivot_tol) return false;
    const Vector c = bi.col(pos);
    const Eigen::RowVectorXd rl = bi.row(l);
    bi.noalias() -= (c / piv) * rl;
    // Move the last position into the holes (Binv rows follow columns, Binv
    // columns follow rows).
    const Index last = k - 1;
    if (l != last) {
      bi.row(l) = bi.row(last);
      std::swap(cols_u_[static_cast<std::size_t>(l)], cols_u_[static_cast<std::size_t>(last)]);
      xu_(l) = xu_(last);
      struct_pos_[static_cast<std::size_t>(cols_u_[static_cast<std::size_t>(l)])] = l;
    }
    if (pos != last) {
      bi.col(pos) = bi.col(last);
      std::swap(rows_u_[static_cast<std::size_t>(pos)], rows_u_[static_cast<std::size_t>(last)]);
      row_pos_[static_cast<std::size_t>(rows_u_[static_cast<std::size_t>(pos)])] = pos;
    }
    struct_pos_[static_cast<std::size_t>(cols_u_.back())] = -1;
    row_pos_[static_cast<std::size_t>(rows_u_.back())] = -1;
    cols_u_.pop_back();
    rows_u_.pop_back();
    --k_;
    state_[static_cast<std::size_t>(r1)] = coef1 > 0 ? RowState::Plus : RowState::Minus;
    xrow_(r1) = theta;
    return true;
  }

  bool refactor() {
    const Index k = k_;
    Eigen::MatrixXd u(k, k);
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) u(a, b) = coef(rows_u_[static_cast<std::size_t>(a)], cols_u_[static_cast<std::size_t>(b)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(u);
    const double det = lu.determinant();
    if (!std::isfinite(det) || det == 0.0) return false;
    binv_.topLeftCorner(k, k) = lu.inverse();
    Vector b(k);
    for (Index a = 0; a < k; ++a) b(a) = rhs(rows_u_[static_cast<std::size_t>(a)]);
    const Vector xu = binv_.topLeftCorner(k, k) * b;
    for (Index a = 0; a < k; ++a) xu_(a) = std::max(0.0, xu(a));
    const Vector u_x = structural_times(xu_.head(k));
    for (Index r = 0; r < rows_; ++r) {
      if (state_[static_cast<std::size_t>(r)] == RowState::Open) continue;
      xrow_(r) = std::max(0.0, row_sign(r) * (rhs(r) - sgn(r) * u_x(meas(r))));
    }
    return true;
  }

  Vector current_z() const {
    Vector z = Vector::Zero(n_);
    for (Index b = 0; b < k_; ++b) {
      const Index var = cols_u_[static_cast<std::size_t>(b)];
      if (var < n_) z(var) += xu_(b);
      else if (var < 2 * n_) z(var - n_) -= xu_(b);
    }
    return z;
  }

  const ReluProgram& p_;
  const Matrix& a_;
  SimplexOptions opt_;
  Index n_, m_, rows_, kmax_ = 0, k_ = 0;
  std::vector<RowState> state_;
  Vector xrow_;
  std::vector<Index> struct_pos_, row_pos_, cols_u_, rows_u_;
  Eigen::MatrixXd binv_;
  Vector xu_;
  double y_l1_ = 0.0;
  std::vector<char> fixed_;
  Vector col_norm_;
  bool tiebreak_ = false;
};

inline SimplexResult solve_relu_program(const ReluProgram& p, SimplexOptions opt = {}) {
  return ReluSimplex(p, opt).solve();
}

}  // namespace qcs::lp
