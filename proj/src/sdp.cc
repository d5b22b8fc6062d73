#include "ratecert/sdp.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace ratecert {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Entries of one constraint restricted to one block, plus the dense
/// restriction of A_ij to its support (used to form W A_ij W cheaply).
struct BlockRow {
  int con = 0;
  std::vector<int> r, c;
  std::vector<double> v;
  std::vector<int> support;
  MatrixXd small;
};

/// Row/column-scaled copy of a problem in the layout the iteration needs.
struct Scaled {
  std::vector<int> sizes;
  std::vector<MatrixXd> C;
  std::vector<std::vector<BlockRow>> rows;
  MatrixXd B;
  VectorXd cf;
  VectorXd b;
  VectorXd row_scale;  // original row i = scaled row i * row_scale(i)
  VectorXd col_scale;  // scaled theta_v = theta_v * col_scale(v)
  int m = 0;
  int nf = 0;
  int n_total = 0;
};

struct InternalOptions {
  SdpOptions base;
  /// Rows ignored when sizing the initial point.
  int skip_row_for_start = -1;
  /// Stop as soon as free variable `early_index` is at or below early_value
  /// and the primal residual is below early_residual.
  int early_index = -1;
  double early_value = 0.0;
  double early_residual = 1e-9;
  /// On breakdown, accept the current point when the dual objective, a lower
  /// bound on the optimum, is at least early_dual_value at a nearly feasible
  /// primal-dual pair.
  double early_dual_value = std::numeric_limits<double>::infinity();
  double early_dual_residual = 1e-6;
};

/// Iterate snapshot kept so that a late breakdown can fall back to the most
/// accurate point seen.
struct Snapshot {
  std::vector<Eigen::MatrixXd> X, Z;
  Eigen::VectorXd y, th;
  int iter = -1;
  double measure = std::numeric_limits<double>::infinity();
};

double Inner(const MatrixXd& a, const MatrixXd& b) { return a.cwiseProduct(b).sum(); }

MatrixXd Sym(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

double EntryWeight(int r, int c) { return r == c ? 1.0 : 2.0; }

Scaled Prepare(const SdpProblem& p) {
  Scaled s;
  s.sizes = p.block_sizes;
  s.m = p.num_constraints();
  s.nf = p.num_free();
  s.n_total = 0;
  for (int sz : s.sizes) s.n_total += sz;
  s.C.resize(s.sizes.size());
  for (std::size_t j = 0; j < s.sizes.size(); ++j) {
    if (j < p.objective.size() && p.objective[j].size() > 0) {
      s.C[j] = Sym(p.objective[j]);
    } else {
      s.C[j] = MatrixXd::Zero(s.sizes[j], s.sizes[j]);
    }
  }
  s.B = MatrixXd::Zero(s.m, s.nf);
  s.b.resize(s.m);
  s.cf = VectorXd::Zero(s.nf);
  for (int v = 0; v < s.nf; ++v) s.cf(v) = p.free_objective[static_cast<std::size_t>(v)];

  // Row norms (Frobenius over all blocks plus free coefficients).
  s.row_scale = VectorXd::Ones(s.m);
  for (int i = 0; i < s.m; ++i) {
    const auto& con = p.constraints[static_cast<std::size_t>(i)];
    double sq = 0.0;
    for (const auto& e : con.entries) sq += EntryWeight(e.row, e.col) * e.value * e.value;
    for (const auto& [v, a] : con.free) sq += a * a;
    const double nrm = std::sqrt(sq);
    s.row_scale(i) = nrm > 0.0 ? nrm : 1.0;
  }
  for (int i = 0; i < s.m; ++i) {
    const auto& con = p.constraints[static_cast<std::size_t>(i)];
    for (const auto& [v, a] : con.free) s.B(i, v) += a / s.row_scale(i);
    s.b(i) = con.rhs / s.row_scale(i);
  }
  s.col_scale = VectorXd::Ones(s.nf);
  for (int v = 0; v < s.nf; ++v) {
    const double nrm = s.B.col(v).norm();
    if (nrm > 0.0) {
      s.col_scale(v) = nrm;
      s.B.col(v) /= nrm;
      s.cf(v) /= nrm;
    }
  }

  s.rows.resize(s.sizes.size());
  for (int i = 0; i < s.m; ++i) {
    const auto& con = p.constraints[static_cast<std::size_t>(i)];
    // Group this constraint's entries by block, merging duplicates.
    std::vector<std::vector<const SdpEntry*>> by_block(s.sizes.size());
    for (const auto& e : con.entries) by_block[static_cast<std::size_t>(e.block)].push_back(&e);
    for (std::size_t j = 0; j < s.sizes.size(); ++j) {
      if (by_block[j].empty()) continue;
      BlockRow br;
      br.con = i;
      for (const SdpEntry* e : by_block[j]) {
        const int r = std::min(e->row, e->col);
        const int c = std::max(e->row, e->col);
        br.r.push_back(r);
        br.c.push_back(c);
        br.v.push_back(e->value / s.row_scale(i));
        br.support.push_back(r);
        br.support.push_back(c);
      }
      std::sort(br.support.begin(), br.support.end());
      br.support.erase(std::unique(br.support.begin(), br.support.end()), br.support.end());
      const int t = static_cast<int>(br.support.size());
      br.small = MatrixXd::Zero(t, t);
      for (std::size_t q = 0; q < br.v.size(); ++q) {
        const int a = static_cast<int>(std::lower_bound(br.support.begin(), br.support.end(), br.r[q]) -
                                       br.support.begin());
        const int bb = static_cast<int>(std::lower_bound(br.support.begin(), br.support.end(), br.c[q]) -
                                        br.support.begin());
        br.small(a, bb) += br.v[q];
        if (a != bb) br.small(bb, a) += br.v[q];
      }
      s.rows[j].push_back(std::move(br));
    }
  }
  return s;
}

VectorXd ApplyA(const Scaled& s, const std::vector<MatrixXd>& X) {
  VectorXd out = VectorXd::Zero(s.m);
  for (std::size_t j = 0; j < s.rows.size(); ++j) {
    for (const auto& br : s.rows[j]) {
      double acc = 0.0;
      for (std::size_t q = 0; q < br.v.size(); ++q) {
        acc += EntryWeight(br.r[q], br.c[q]) * br.v[q] * X[j](br.r[q], br.c[q]);
      }
      out(br.con) += acc;
    }
  }
  return out;
}

std::vector<MatrixXd> ApplyAT(const Scaled& s, const VectorXd& y) {
  std::vector<MatrixXd> out(s.sizes.size());
  for (std::size_t j = 0; j < s.sizes.size(); ++j) {
    out[j] = MatrixXd::Zero(s.sizes[j], s.sizes[j]);
    for (const auto& br : s.rows[j]) {
      const double yi = y(br.con);
      if (yi == 0.0) continue;
      for (std::size_t q = 0; q < br.v.size(); ++q) {
        out[j](br.r[q], br.c[q]) += yi * br.v[q];
        if (br.r[q] != br.c[q]) out[j](br.c[q], br.r[q]) += yi * br.v[q];
      }
    }
  }
  return out;
}

double MinEigen(const MatrixXd& a) {
  if (a.rows() == 0) return kInf;
  if (a.rows() == 1) return a(0, 0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double MaxEigen(const MatrixXd& a) {
  if (a.rows() == 0) return -kInf;
  if (a.rows() == 1) return a(0, 0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

/// Largest alpha with P + alpha dP PSD, given the lower Cholesky factor L of P.
double MaxStep(const MatrixXd& L, const MatrixXd& dP) {
  const auto tri = L.triangularView<Eigen::Lower>();
  MatrixXd tmp = tri.solve(dP);
  tmp = tri.solve(tmp.transpose()).transpose();
  const double lmin = MinEigen(tmp);
  return lmin < 0.0 ? -1.0 / lmin : kInf;
}

struct Scaling {
  MatrixXd L;     // chol(X)
  MatrixXd R;     // chol(Z)
  MatrixXd G;     // W = G G^T
  MatrixXd Ginv;  // G^{-1}
  MatrixXd W;
  VectorXd lambda;
};

bool ComputeScaling(const MatrixXd& X, const MatrixXd& Z, Scaling* sc) {
  Eigen::LLT<MatrixXd> lx(X);
  Eigen::LLT<MatrixXd> lz(Z);
  if (lx.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
  sc->L = lx.matrixL();
  sc->R = lz.matrixL();
  Eigen::JacobiSVD<MatrixXd> svd(sc->R.transpose() * sc->L, Eigen::ComputeFullU | Eigen::ComputeFullV);
  sc->lambda = svd.singularValues();
  if (sc->lambda.minCoeff() <= 0.0) return false;
  const VectorXd inv_sqrt = sc->lambda.cwiseSqrt().cwiseInverse();
  const VectorXd sqrt_l = sc->lambda.cwiseSqrt();
  sc->G = sc->L * svd.matrixV() * inv_sqrt.asDiagonal();
  // G^{-1} = Sigma^{1/2} V^T L^{-1}.
  MatrixXd vt = svd.matrixV().transpose();
  MatrixXd linv_t = sc->L.triangularView<Eigen::Lower>().solve<Eigen::OnTheRight>(vt);
  sc->Ginv = sqrt_l.asDiagonal() * linv_t;
  sc->W = sc->G * sc->G.transpose();
  sc->W = Sym(sc->W);
  return true;
}

/// Factorization of the reduced Newton system [M B; B^T 0].
///
/// Without free variables M is factored by Cholesky. With free variables the
/// whole indefinite system is factored by partial-pivoting LU; eliminating
/// theta through M^{-1} instead loses the equation B^T dy = rf once M becomes
/// ill-conditioned.
class NewtonSystem {
 public:
  bool Factor(const MatrixXd& M, const MatrixXd& B) {
    M_ = &M;
    B_ = &B;
    const double diag_max = std::max(M.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    if (B.cols() == 0) {
      double reg = 0.0;
      for (int attempt = 0; attempt < 8; ++attempt) {
        if (reg == 0.0) {
          llt_.compute(M);
        } else {
          MatrixXd Mr = M;
          Mr.diagonal().array() += reg;
          llt_.compute(Mr);
        }
        if (llt_.info() == Eigen::Success) break;
        reg = reg == 0.0 ? 1e-14 * diag_max : reg * 100.0;
      }
      return llt_.info() == Eigen::Success;
    }
    const Eigen::Index m = M.rows();
    const Eigen::Index nf = B.cols();
    MatrixXd K(m + nf, m + nf);
    K.topLeftCorner(m, m) = M;
    K.topRightCorner(m, nf) = B;
    K.bottomLeftCorner(nf, m) = B.transpose();
    K.bottomRightCorner(nf, nf).setZero();
    lu_.compute(K);
    return std::isfinite(lu_.rcond()) && lu_.rcond() > 0.0;
  }

  void Solve(const VectorXd& h, const VectorXd& rf, VectorXd* dy, VectorXd* dth) const {
    SolveOnce(h, rf, dy, dth);
    for (int refine = 0; refine < 2; ++refine) {
      const VectorXd r1 = h - (*M_) * (*dy) - (*B_) * (*dth);
      const VectorXd r2 = rf - B_->transpose() * (*dy);
      VectorXd cy, cth;
      SolveOnce(r1, r2, &cy, &cth);
      *dy += cy;
      *dth += cth;
    }
  }

 private:
  void SolveOnce(const VectorXd& h, const VectorXd& rf, VectorXd* dy, VectorXd* dth) const {
    if (B_->cols() == 0) {
      *dy = llt_.solve(h);
      *dth = VectorXd::Zero(0);
      return;
    }
    VectorXd rhs(h.size() + rf.size());
    rhs << h, rf;
    const VectorXd sol = lu_.solve(rhs);
    *dy = sol.head(h.size());
    *dth = sol.tail(rf.size());
  }

  const MatrixXd* M_ = nullptr;
  const MatrixXd* B_ = nullptr;
  Eigen::LLT<MatrixXd> llt_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

MatrixXd BuildSchur(const Scaled& s, const std::vector<Scaling>& sc) {
  MatrixXd M = MatrixXd::Zero(s.m, s.m);
  for (std::size_t j = 0; j < s.rows.size(); ++j) {
    const MatrixXd& W = sc[j].W;
    const auto& rows = s.rows[j];
    for (std::size_t a = 0; a < rows.size(); ++a) {
      const BlockRow& br = rows[a];
      const int t = static_cast<int>(br.support.size());
      MatrixXd Wsub(W.rows(), t);
      for (int q = 0; q < t; ++q) Wsub.col(q) = W.col(br.support[static_cast<std::size_t>(q)]);
      const MatrixXd F = Wsub * (br.small * Wsub.transpose());
      for (std::size_t k = a; k < rows.size(); ++k) {
        const BlockRow& bk = rows[k];
        double acc = 0.0;
        for (std::size_t q = 0; q < bk.v.size(); ++q) {
          acc += EntryWeight(bk.r[q], bk.c[q]) * bk.v[q] * F(bk.r[q], bk.c[q]);
        }
        M(bk.con, br.con) += acc;
      }
    }
  }
  // Lower triangle is complete; mirror it.
  for (int i = 0; i < s.m; ++i) {
    for (int k = i + 1; k < s.m; ++k) M(i, k) = M(k, i);
  }
  return M;
}

struct Direction {
  std::vector<MatrixXd> dX, dZ;
  VectorXd dy, dth;
};

Direction ComputeDirection(const Scaled& s, const std::vector<Scaling>& sc, const NewtonSystem& ns,
                           const std::vector<MatrixXd>& Rc, const std::vector<MatrixXd>& Rd, const VectorXd& rp,
                           const VectorXd& rf) {
  const std::size_t nb = s.sizes.size();
  std::vector<MatrixXd> tmp(nb);
  for (std::size_t j = 0; j < nb; ++j) tmp[j] = Rc[j] - sc[j].W * Rd[j] * sc[j].W;
  const VectorXd h = rp - ApplyA(s, tmp);
  Direction d;
  ns.Solve(h, rf, &d.dy, &d.dth);
  const auto aty = ApplyAT(s, d.dy);
  d.dX.resize(nb);
  d.dZ.resize(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    d.dZ[j] = Rd[j] - aty[j];
    d.dX[j] = Sym(tmp[j] + sc[j].W * aty[j] * sc[j].W);
  }
  return d;
}

struct Steps {
  double primal = 1.0;
  double dual = 1.0;
};

Steps StepLengths(const std::vector<Scaling>& sc, const Direction& d, double fraction) {
  double ap = kInf, ad = kInf;
  for (std::size_t j = 0; j < sc.size(); ++j) {
    ap = std::min(ap, MaxStep(sc[j].L, d.dX[j]));
    ad = std::min(ad, MaxStep(sc[j].R, d.dZ[j]));
  }
  return {std::min(1.0, fraction * ap), std::min(1.0, fraction * ad)};
}

double FrobeniusNormSq(const std::vector<MatrixXd>& v) {
  double acc = 0.0;
  for (const auto& m : v) acc += m.squaredNorm();
  return acc;
}

SdpSolution Unscale(const Scaled& s, const std::vector<MatrixXd>& X, const VectorXd& th, const VectorXd& y,
                    const std::vector<MatrixXd>& Z) {
  SdpSolution sol;
  sol.X = X;
  sol.Z = Z;
  sol.free = th.cwiseQuotient(s.col_scale);
  sol.y = y.cwiseQuotient(s.row_scale);
  return sol;
}

SdpSolution RunSolver(const SdpProblem& problem, const InternalOptions& opt) {
  problem.Validate();
  const Scaled s = Prepare(problem);
  const SdpOptions& o = opt.base;
  const std::size_t nb = s.sizes.size();

  // Initial point in the spirit of SDPT3's default.
  std::vector<MatrixXd> X(nb), Z(nb);
  const double cnorm = std::sqrt(FrobeniusNormSq(s.C));
  for (std::size_t j = 0; j < nb; ++j) {
    const double sz = s.sizes[j];
    double max_ratio = 0.0, max_anorm = 0.0;
    for (const auto& br : s.rows[j]) {
      double an = 0.0;
      for (std::size_t q = 0; q < br.v.size(); ++q) an += EntryWeight(br.r[q], br.c[q]) * br.v[q] * br.v[q];
      an = std::sqrt(an);
      max_anorm = std::max(max_anorm, an);
      if (br.con == opt.skip_row_for_start) continue;
      max_ratio = std::max(max_ratio, (1.0 + std::abs(s.b(br.con))) / (1.0 + an));
    }
    const double xi = std::max({10.0, std::sqrt(sz), sz * max_ratio});
    const double eta =
        std::max({10.0, std::sqrt(sz), (1.0 + std::max(max_anorm, s.C[j].norm())) / std::sqrt(sz)});
    X[j] = xi * MatrixXd::Identity(s.sizes[j], s.sizes[j]);
    Z[j] = eta * MatrixXd::Identity(s.sizes[j], s.sizes[j]);
  }
  VectorXd y = VectorXd::Zero(s.m);
  VectorXd th = VectorXd::Zero(s.nf);
  const double bnorm = s.b.norm();

  SdpSolution result;
  std::vector<Scaling> sc(nb);
  int stall = 0;
  double progress_measure = kInf;
  Snapshot best;
  // Latest iterate whose objective values certify an optimum bounded away
  // from zero.
  Snapshot bounded;
  for (int iter = 0; iter <= o.max_iterations; ++iter) {
    const VectorXd ax = ApplyA(s, X);
    const VectorXd rp = s.b - ax - s.B * th;
    const auto aty = ApplyAT(s, y);
    std::vector<MatrixXd> Rd(nb);
    for (std::size_t j = 0; j < nb; ++j) Rd[j] = s.C[j] - Z[j] - aty[j];
    const VectorXd rf = s.cf - s.B.transpose() * y;
    double pobj = s.cf.dot(th), xz = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      pobj += Inner(s.C[j], X[j]);
      xz += Inner(X[j], Z[j]);
    }
    const double dobj = s.b.dot(y);
    const double mu = xz / s.n_total;
    const double rel_p = rp.norm() / (1.0 + bnorm);
    const double rel_d = std::sqrt(FrobeniusNormSq(Rd) + rf.squaredNorm()) / (1.0 + cnorm);
    const double rel_g = std::max(std::abs(pobj - dobj), xz) / (1.0 + std::abs(pobj) + std::abs(dobj));

    if (o.verbose) {
      fmt::print(stderr, "iter {:3d} pobj {: .6e} dobj {: .6e} rp {:.2e} rd {:.2e} gap {:.2e} mu {:.2e}\n", iter,
                 pobj, dobj, rel_p, rel_d, rel_g, mu);
    }

    auto finish = [&](SdpStatus status, const std::string& message) {
      result = Unscale(s, X, th, y, Z);
      result.status = status;
      result.iterations = iter;
      result.message = message;
      return result;
    };
    const double measure = std::max({rel_p, rel_d, rel_g});
    if (measure < best.measure) best = {X, Z, y, th, iter, measure};
    if (dobj >= opt.early_dual_value && pobj >= opt.early_dual_value && rel_d <= opt.early_dual_residual &&
        rel_p <= opt.early_dual_residual) {
      bounded = {X, Z, y, th, iter, measure};
    }
    // Breakdown exit: fall back to the best iterate if it is accurate enough.
    auto fail = [&](const std::string& message) {
      if (best.measure <= 10.0 * o.tolerance) {
        result = Unscale(s, best.X, best.th, best.y, best.Z);
        result.status = SdpStatus::kOptimal;
        result.iterations = iter;
        result.message = fmt::format("converged to reduced accuracy at iteration {} ({})", best.iter, message);
        return result;
      }
      if (bounded.iter >= 0) {
        result = Unscale(s, bounded.X, bounded.th, bounded.y, bounded.Z);
        result.status = SdpStatus::kOptimal;
        result.iterations = iter;
        result.message =
            fmt::format("optimum bounded away from zero at iteration {} ({})", bounded.iter, message);
        return result;
      }
      return finish(SdpStatus::kNumericalTrouble, message);
    };

    if (opt.early_index >= 0 && th(opt.early_index) / s.col_scale(opt.early_index) <= opt.early_value &&
        rel_p <= opt.early_residual) {
      return finish(SdpStatus::kOptimal, "strictly feasible point found");
    }

    if (rel_p <= o.tolerance && rel_d <= o.tolerance && rel_g <= o.tolerance) {
      return finish(SdpStatus::kOptimal, "converged");
    }
    // Infeasibility: a normalized dual improving ray.
    if (dobj > 0.0 && rel_p > o.tolerance) {
      const VectorXd yhat = y / dobj;
      const auto at = ApplyAT(s, yhat);
      double lmax = -kInf;
      for (const auto& m : at) lmax = std::max(lmax, MaxEigen(m));
      const double fres = s.nf > 0 ? (s.B.transpose() * yhat).cwiseAbs().maxCoeff() : 0.0;
      if (lmax <= o.ray_tolerance && fres <= o.ray_tolerance) {
        finish(SdpStatus::kInfeasible, "dual improving ray found");
        result.dual_ray = yhat.cwiseQuotient(s.row_scale);
        return result;
      }
    }
    // Unboundedness: a normalized primal improving ray.
    if (pobj < 0.0 && rel_d > o.tolerance) {
      std::vector<MatrixXd> xh(nb);
      for (std::size_t j = 0; j < nb; ++j) xh[j] = X[j] / (-pobj);
      const VectorXd thh = th / (-pobj);
      const VectorXd res = ApplyA(s, xh) + s.B * thh;
      if (res.cwiseAbs().maxCoeff() <= o.ray_tolerance) {
        finish(SdpStatus::kUnbounded, "primal improving ray found");
        result.primal_ray = xh;
        result.primal_ray_free = thh.cwiseQuotient(s.col_scale);
        return result;
      }
    }
    if (measure < 0.5 * progress_measure) {
      progress_measure = measure;
      stall = 0;
    } else {
      ++stall;
    }
    if (iter == o.max_iterations || stall > 25) {
      return fail(iter == o.max_iterations ? "iteration limit reached" : "no progress");
    }

    bool ok = true;
    for (std::size_t j = 0; j < nb && ok; ++j) ok = ComputeScaling(X[j], Z[j], &sc[j]);
    if (!ok) return fail("iterate lost definiteness");
    const MatrixXd M = BuildSchur(s, sc);
    NewtonSystem ns;
    if (!ns.Factor(M, s.B)) return fail("Schur complement factorization failed");

    // Predictor.
    std::vector<MatrixXd> Rc(nb);
    for (std::size_t j = 0; j < nb; ++j) Rc[j] = -X[j];
    const Direction pred = ComputeDirection(s, sc, ns, Rc, Rd, rp, rf);
    const Steps ps = StepLengths(sc, pred, 1.0);
    double xz_aff = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      xz_aff += Inner(X[j] + ps.primal * pred.dX[j], Z[j] + ps.dual * pred.dZ[j]);
    }
    const double mu_aff = std::max(xz_aff, 0.0) / s.n_total;
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    // Corrector in the NT-scaled space.
    for (std::size_t j = 0; j < nb; ++j) {
      const Scaling& g = sc[j];
      const MatrixXd dxt = g.Ginv * pred.dX[j] * g.Ginv.transpose();
      const MatrixXd dzt = g.G.transpose() * pred.dZ[j] * g.G;
      MatrixXd T = -0.5 * (dxt * dzt + dzt * dxt);
      for (int i = 0; i < T.rows(); ++i) T(i, i) += sigma * mu - g.lambda(i) * g.lambda(i);
      MatrixXd D(T.rows(), T.cols());
      for (int a = 0; a < T.rows(); ++a) {
        for (int c = 0; c < T.cols(); ++c) D(a, c) = 2.0 * T(a, c) / (g.lambda(a) + g.lambda(c));
      }
      Rc[j] = g.G * D * g.G.transpose();
    }
    const Direction corr = ComputeDirection(s, sc, ns, Rc, Rd, rp, rf);
    const Steps st = StepLengths(sc, corr, o.step_fraction);
    if (st.primal < 1e-10 && st.dual < 1e-10) return fail("step length collapsed");
    for (std::size_t j = 0; j < nb; ++j) {
      X[j] = Sym(X[j] + st.primal * corr.dX[j]);
      Z[j] = Sym(Z[j] + st.dual * corr.dZ[j]);
    }
    th += st.primal * corr.dth;
    y += st.dual * corr.dy;
  }
  return result;
}

void FillResiduals(const SdpProblem& problem, SdpSolution* sol) {
  const KktReport r = CheckKkt(problem, *sol);
  sol->primal_objective = r.primal_objective;
  sol->dual_objective = r.dual_objective;
  sol->primal_residual = r.primal_residual;
  double dres = r.dual_equality_residual;
  // Dual residual of the maintained Z (not re-projected).
  for (int j = 0; j < problem.num_blocks() && j < static_cast<int>(sol->Z.size()); ++j) {
    MatrixXd Rd = (j < static_cast<int>(problem.objective.size()) && problem.objective[j].size() > 0)
                      ? problem.objective[j]
                      : MatrixXd::Zero(problem.block_sizes[j], problem.block_sizes[j]);
    Rd -= sol->Z[j];
    for (int i = 0; i < problem.num_constraints(); ++i) {
      for (const auto& e : problem.constraints[i].entries) {
        if (e.block != j) continue;
        Rd(e.row, e.col) -= sol->y(i) * e.value;
        if (e.row != e.col) Rd(e.col, e.row) -= sol->y(i) * e.value;
      }
    }
    dres = std::max(dres, Rd.cwiseAbs().maxCoeff());
  }
  sol->dual_residual = dres;
  sol->gap = r.gap;
}

}  // namespace

int SdpProblem::AddBlock(int size) {
  if (size <= 0) throw std::invalid_argument("SdpProblem::AddBlock: size must be positive");
  block_sizes.push_back(size);
  objective.emplace_back();
  return num_blocks() - 1;
}

int SdpProblem::AddFreeVariable(double cost) {
  free_objective.push_back(cost);
  return num_free() - 1;
}

void SdpProblem::Validate() const {
  if (constraints.empty()) throw std::invalid_argument("SdpProblem: no constraints");
  for (std::size_t j = 0; j < objective.size(); ++j) {
    const auto& c = objective[j];
    if (c.size() == 0) continue;
    if (j >= block_sizes.size() || c.rows() != block_sizes[j] || c.cols() != block_sizes[j]) {
      throw std::invalid_argument(fmt::format("SdpProblem: objective block {} has wrong shape", j));
    }
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + c.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument(fmt::format("SdpProblem: objective block {} is not symmetric", j));
    }
  }
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const auto& con = constraints[i];
    bool nonzero = false;
    for (const auto& e : con.entries) {
      if (e.block < 0 || e.block >= num_blocks()) throw std::invalid_argument("SdpProblem: bad block index");
      const int sz = block_sizes[static_cast<std::size_t>(e.block)];
      if (e.row < 0 || e.col < 0 || e.row >= sz || e.col >= sz) {
        throw std::invalid_argument(fmt::format("SdpProblem: entry out of range in constraint {}", i));
      }
      if (!std::isfinite(e.value)) throw std::invalid_argument("SdpProblem: non-finite coefficient");
      nonzero = nonzero || e.value != 0.0;
    }
    for (const auto& [v, a] : con.free) {
      if (v < 0 || v >= num_free()) throw std::invalid_argument("SdpProblem: bad free variable index");
      nonzero = nonzero || a != 0.0;
    }
    if (!nonzero) throw std::invalid_argument(fmt::format("SdpProblem: constraint {} is identically zero", i));
    if (!std::isfinite(con.rhs)) throw std::invalid_argument("SdpProblem: non-finite right-hand side");
  }
}

Eigen::MatrixXd SdpProblem::ConstraintMatrix(int constraint, int block) const {
  const int sz = block_sizes[static_cast<std::size_t>(block)];
  MatrixXd A = MatrixXd::Zero(sz, sz);
  for (const auto& e : constraints[static_cast<std::size_t>(constraint)].entries) {
    if (e.block != block) continue;
    A(e.row, e.col) += e.value;
    if (e.row != e.col) A(e.col, e.row) += e.value;
  }
  return A;
}

std::string ToString(SdpStatus status) {
  switch (status) {
    case SdpStatus::kOptimal:
      return "optimal";
    case SdpStatus::kInfeasible:
      return "infeasible";
    case SdpStatus::kUnbounded:
      return "unbounded";
    case SdpStatus::kNumericalTrouble:
      return "numerical_trouble";
  }
  return "unknown";
}

std::string ToString(FeasibilityStatus status) {
  switch (status) {
    case FeasibilityStatus::kFeasible:
      return "feasible";
    case FeasibilityStatus::kMarginal:
      return "marginal";
    case FeasibilityStatus::kInfeasible:
      return "infeasible";
    case FeasibilityStatus::kNumericalTrouble:
      return "numerical_trouble";
  }
  return "unknown";
}

SdpSolution Solve(const SdpProblem& problem, const SdpOptions& options) {
  InternalOptions opt;
  opt.base = options;
  SdpSolution sol = RunSolver(problem, opt);
  if (sol.status == SdpStatus::kOptimal) FillResiduals(problem, &sol);
  return sol;
}

bool KktReport::MeetsContract() const {
  return relative_primal_residual <= 1e-7 && relative_gap <= 1e-7 && min_primal_eigenvalue >= -1e-8;
}

KktReport CheckKkt(const SdpProblem& problem, const SdpSolution& sol) {
  KktReport r;
  const int m = problem.num_constraints();
  double bmax = 0.0;
  r.min_primal_eigenvalue = kInf;
  for (const auto& x : sol.X) r.min_primal_eigenvalue = std::min(r.min_primal_eigenvalue, MinEigen(x));
  for (int i = 0; i < m; ++i) {
    const auto& con = problem.constraints[static_cast<std::size_t>(i)];
    double lhs = 0.0;
    for (const auto& e : con.entries) lhs += EntryWeight(e.row, e.col) * e.value * sol.X[e.block](e.row, e.col);
    for (const auto& [v, a] : con.free) lhs += a * sol.free(v);
    r.primal_residual = std::max(r.primal_residual, std::abs(lhs - con.rhs));
    bmax = std::max(bmax, std::abs(con.rhs));
    r.dual_objective += con.rhs * sol.y(i);
  }
  r.relative_primal_residual = r.primal_residual / (1.0 + bmax);
  for (int v = 0; v < problem.num_free(); ++v) {
    double acc = -problem.free_objective[static_cast<std::size_t>(v)];
    for (int i = 0; i < m; ++i) {
      for (const auto& [w, a] : problem.constraints[static_cast<std::size_t>(i)].free) {
        if (w == v) acc += a * sol.y(i);
      }
    }
    r.dual_equality_residual = std::max(r.dual_equality_residual, std::abs(acc));
    r.primal_objective += problem.free_objective[static_cast<std::size_t>(v)] * sol.free(v);
  }
  for (int j = 0; j < problem.num_blocks(); ++j) {
    const int sz = problem.block_sizes[static_cast<std::size_t>(j)];
    MatrixXd C = (j < static_cast<int>(problem.objective.size()) && problem.objective[j].size() > 0)
                     ? problem.objective[j]
                     : MatrixXd::Zero(sz, sz);
    r.primal_objective += Inner(C, sol.X[j]);
    MatrixXd Zr = C;
    for (int i = 0; i < m; ++i) Zr -= sol.y(i) * problem.ConstraintMatrix(i, j);
    r.dual_cone_violation = std::max(r.dual_cone_violation, std::max(0.0, -MinEigen(Zr)));
  }
  r.gap = std::abs(r.primal_objective - r.dual_objective);
  r.relative_gap = r.gap / (1.0 + std::abs(r.primal_objective));
  return r;
}

RayReport CheckDualRay(const SdpProblem& problem, const Eigen::VectorXd& y) {
  RayReport r;
  r.max_eigenvalue = -kInf;
  for (int j = 0; j < problem.num_blocks(); ++j) {
    MatrixXd A = MatrixXd::Zero(problem.block_sizes[j], problem.block_sizes[j]);
    for (int i = 0; i < problem.num_constraints(); ++i) A += y(i) * problem.ConstraintMatrix(i, j);
    r.max_eigenvalue = std::max(r.max_eigenvalue, MaxEigen(A));
  }
  for (int v = 0; v < problem.num_free(); ++v) {
    double acc = 0.0;
    for (int i = 0; i < problem.num_constraints(); ++i) {
      for (const auto& [w, a] : problem.constraints[static_cast<std::size_t>(i)].free) {
        if (w == v) acc += a * y(i);
      }
    }
    r.free_residual = std::max(r.free_residual, std::abs(acc));
  }
  for (int i = 0; i < problem.num_constraints(); ++i) r.objective += problem.constraints[i].rhs * y(i);
  return r;
}

FeasibilityResult SolveFeasibility(const SdpProblem& problem, const FeasibilityOptions& options) {
  problem.Validate();
  SdpProblem aug;
  int total_dim = 0;
  for (int sz : problem.block_sizes) {
    aug.AddBlock(sz);
    total_dim += sz;
  }
  const int slack_block = aug.AddBlock(1);
  for (int v = 0; v < problem.num_free(); ++v) aug.AddFreeVariable(0.0);
  const int tau = aug.AddFreeVariable(1.0);
  double bmax = 0.0;
  for (const auto& con : problem.constraints) {
    SdpConstraint c = con;
    double trace = 0.0;
    for (const auto& e : con.entries) {
      if (e.row == e.col) trace += e.value;
    }
    // X = X_aug - tau I.
    if (trace != 0.0) c.free.emplace_back(tau, -trace);
    aug.constraints.push_back(std::move(c));
    bmax = std::max(bmax, std::abs(con.rhs));
  }
  const double bound = options.trace_bound > 0.0 ? options.trace_bound : 1e4 * (1.0 + bmax) * total_dim;
  SdpConstraint trace_row;
  for (int j = 0; j < problem.num_blocks(); ++j) {
    for (int r = 0; r < problem.block_sizes[j]; ++r) trace_row.entries.push_back({j, r, r, 1.0});
  }
  trace_row.entries.push_back({slack_block, 0, 0, 1.0});
  // The bound applies to X = X_aug - tau I, which keeps tau bounded below
  // even when free variables can scale the whole system.
  trace_row.free.emplace_back(tau, -static_cast<double>(total_dim));
  trace_row.rhs = bound;
  aug.constraints.push_back(std::move(trace_row));
  InternalOptions opt;
  opt.base = options.sdp;
  opt.skip_row_for_start = aug.num_constraints() - 1;
  opt.early_index = tau;
  // A primal point with tau this small already proves tau* <= feasible_tau.
  opt.early_value = 0.1 * options.feasible_tau;
  opt.early_residual = 0.1 * options.sdp.tolerance;
  opt.early_dual_value = 10.0 * options.infeasible_tau;
  SdpSolution raw = RunSolver(aug, opt);

  FeasibilityResult out;
  out.tau = raw.free.size() > tau ? raw.free(tau) : 0.0;
  SdpSolution& sol = out.solution;
  sol.status = raw.status;
  sol.iterations = raw.iterations;
  sol.message = raw.message;
  if (raw.X.size() == aug.block_sizes.size()) {
    for (int j = 0; j < problem.num_blocks(); ++j) {
      sol.X.push_back(raw.X[j] - out.tau * MatrixXd::Identity(problem.block_sizes[j], problem.block_sizes[j]));
      sol.Z.push_back(raw.Z[j]);
    }
    sol.free = raw.free.head(problem.num_free());
    sol.y = raw.y.head(problem.num_constraints());
    FillResiduals(problem, &sol);
  }
  if (raw.status != SdpStatus::kOptimal) {
    out.status = FeasibilityStatus::kNumericalTrouble;
    return out;
  }
  if (out.tau <= options.feasible_tau) {
    out.status = FeasibilityStatus::kFeasible;
  } else if (out.tau >= options.infeasible_tau) {
    out.status = FeasibilityStatus::kInfeasible;
  } else {
    out.status = FeasibilityStatus::kMarginal;
  }
  return out;
}

void WriteSdpa(const SdpProblem& problem, std::ostream& out) {
  problem.Validate();
  const int m = problem.num_constraints();
  const int nf = problem.num_free();
  fmt::print(out, "\"ratecert problem in dual form: maximize b^T y s.t. C - sum y_i A_i PSD\"\n");
  fmt::print(out, "{}\n", m);
  fmt::print(out, "{}\n", problem.num_blocks() + (nf > 0 ? 1 : 0));
  for (int sz : problem.block_sizes) fmt::print(out, "{} ", sz);
  if (nf > 0) fmt::print(out, "{}", -2 * nf);
  fmt::print(out, "\n");
  // SDPA minimizes c^T x with F(x) = sum F_i x_i - F_0 PSD; take x = y,
  // c = -b, F_i = -A_i, F_0 = -C.
  for (int i = 0; i < m; ++i) fmt::print(out, "{:.17g} ", -problem.constraints[i].rhs);
  fmt::print(out, "\n");
  for (int j = 0; j < problem.num_blocks(); ++j) {
    if (j >= static_cast<int>(problem.objective.size()) || problem.objective[j].size() == 0) continue;
    const auto& c = problem.objective[j];
    for (int r = 0; r < c.rows(); ++r) {
      for (int cc = r; cc < c.cols(); ++cc) {
        if (c(r, cc) != 0.0) fmt::print(out, "0 {} {} {} {:.17g}\n", j + 1, r + 1, cc + 1, -c(r, cc));
      }
    }
  }
  const int lp_block = problem.num_blocks() + 1;
  // B^T y - c_f >= 0 and -(B^T y - c_f) >= 0.
  for (int v = 0; v < nf; ++v) {
    const double cf = problem.free_objective[static_cast<std::size_t>(v)];
    if (cf != 0.0) {
      fmt::print(out, "0 {} {} {} {:.17g}\n", lp_block, 2 * v + 1, 2 * v + 1, cf);
      fmt::print(out, "0 {} {} {} {:.17g}\n", lp_block, 2 * v + 2, 2 * v + 2, -cf);
    }
  }
  for (int i = 0; i < m; ++i) {
    const auto& con = problem.constraints[static_cast<std::size_t>(i)];
    for (const auto& e : con.entries) {
      fmt::print(out, "{} {} {} {} {:.17g}\n", i + 1, e.block + 1, std::min(e.row, e.col) + 1,
                 std::max(e.row, e.col) + 1, -e.value);
    }
    for (const auto& [v, a] : con.free) {
      fmt::print(out, "{} {} {} {} {:.17g}\n", i + 1, lp_block, 2 * v + 1, 2 * v + 1, a);
      fmt::print(out, "{} {} {} {} {:.17g}\n", i + 1, lp_block, 2 * v + 2, 2 * v + 2, -a);
    }
  }
}

}  // namespace ratecert
