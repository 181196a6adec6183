#include "pfr/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "pfr/errors.hpp"

namespace pfr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPivotTol = 1e-9;

// Original variable j expressed through standard-form columns:
//   x_j = offset + sign * x[col] - (minus >= 0 ? x[minus] : 0)
struct VarMap {
  double offset = 0.0;
  double sign = 1.0;
  Index col = -1;
  Index minus = -1;
};

// min c'x  s.t.  A x = b, x >= 0, b >= 0, with an identity column per row
// available as the starting basis.
struct StandardForm {
  MatrixXd A;
  VectorXd b;
  VectorXd c;
  double c_offset = 0.0;
  std::vector<bool> artificial;
  std::vector<Index> start_basis;
  std::vector<VarMap> vars;
  std::vector<double> row_sign;  // per original row: +1, or -1 when flipped
};

StandardForm to_standard_form(const LinearProgram& lp) {
  StandardForm sf;
  const std::size_t nv = lp.num_variables();
  sf.vars.resize(nv);
  Index ncols = 0;
  std::vector<std::pair<Index, double>> bound_rows;  // x[col] <= value
  for (std::size_t j = 0; j < nv; ++j) {
    const double lo = lp.lower(j);
    const double hi = lp.upper(j);
    VarMap& vm = sf.vars[j];
    if (lo == hi) {
      vm.offset = lo;
    } else if (std::isfinite(lo)) {
      vm.offset = lo;
      vm.col = ncols++;
      if (std::isfinite(hi)) bound_rows.emplace_back(vm.col, hi - lo);
    } else if (std::isfinite(hi)) {
      vm.offset = hi;
      vm.sign = -1.0;
      vm.col = ncols++;
    } else {
      vm.col = ncols++;
      vm.minus = ncols++;
    }
  }
  const Index n_struct = ncols;
  const auto& rows = lp.rows();
  const Index m = static_cast<Index>(rows.size() + bound_rows.size());

  MatrixXd body = MatrixXd::Zero(m, n_struct);
  VectorXd rhs(m);
  std::vector<Sense> senses(static_cast<std::size_t>(m));
  VectorXd c = VectorXd::Zero(n_struct);
  for (std::size_t j = 0; j < nv; ++j) {
    const VarMap& vm = sf.vars[j];
    sf.c_offset += lp.cost(j) * vm.offset;
    if (vm.col >= 0) c[vm.col] += lp.cost(j) * vm.sign;
    if (vm.minus >= 0) c[vm.minus] -= lp.cost(j);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = static_cast<Index>(i);
    double b = rows[i].rhs;
    for (const LpTerm& t : rows[i].terms) {
      const VarMap& vm = sf.vars[t.var];
      b -= t.coef * vm.offset;
      if (vm.col >= 0) body(r, vm.col) += t.coef * vm.sign;
      if (vm.minus >= 0) body(r, vm.minus) -= t.coef;
    }
    rhs[r] = b;
    senses[i] = rows[i].sense;
  }
  for (std::size_t k = 0; k < bound_rows.size(); ++k) {
    const Index r = static_cast<Index>(rows.size() + k);
    body(r, bound_rows[k].first) = 1.0;
    rhs[r] = bound_rows[k].second;
    senses[static_cast<std::size_t>(r)] = Sense::Le;
  }

  // Slack columns, sign flips, then artificials where no +1 slack exists.
  Index n_slack = 0;
  for (Sense s : senses) n_slack += s != Sense::Eq;
  std::vector<double> slack_coef(static_cast<std::size_t>(m), 0.0);
  std::vector<Index> slack_col(static_cast<std::size_t>(m), -1);
  std::vector<double> flip(static_cast<std::size_t>(m), 1.0);
  Index next = n_struct;
  Index n_art = 0;
  for (Index r = 0; r < m; ++r) {
    const auto ur = static_cast<std::size_t>(r);
    if (senses[ur] == Sense::Le) slack_coef[ur] = 1.0;
    if (senses[ur] == Sense::Ge) slack_coef[ur] = -1.0;
    if (senses[ur] != Sense::Eq) slack_col[ur] = next++;
    if (rhs[r] < 0.0) flip[ur] = -1.0;
    if (!(slack_coef[ur] * flip[ur] > 0.0)) ++n_art;
  }
  const Index n_total = n_struct + n_slack + n_art;
  sf.A = MatrixXd::Zero(m, n_total);
  sf.b.resize(m);
  sf.c = VectorXd::Zero(n_total);
  sf.c.head(n_struct) = c;
  sf.artificial.assign(static_cast<std::size_t>(n_total), false);
  sf.start_basis.resize(static_cast<std::size_t>(m));
  Index art = n_struct + n_slack;
  for (Index r = 0; r < m; ++r) {
    const auto ur = static_cast<std::size_t>(r);
    sf.A.row(r).head(n_struct) = flip[ur] * body.row(r);
    sf.b[r] = flip[ur] * rhs[r];
    if (slack_col[ur] >= 0) sf.A(r, slack_col[ur]) = flip[ur] * slack_coef[ur];
    if (slack_coef[ur] * flip[ur] > 0.0) {
      sf.start_basis[ur] = slack_col[ur];
    } else {
      sf.A(r, art) = 1.0;
      sf.artificial[static_cast<std::size_t>(art)] = true;
      sf.start_basis[ur] = art++;
    }
  }
  sf.row_sign.assign(flip.begin(), flip.begin() + static_cast<std::ptrdiff_t>(rows.size()));
  return sf;
}

class Tableau {
 public:
  Tableau(const StandardForm& sf, const SimplexOptions& opts)
      : sf_(sf), opts_(opts), basis_(sf.start_basis) {
    is_basic_.assign(static_cast<std::size_t>(sf.A.cols()), false);
    for (Index j : basis_) is_basic_[static_cast<std::size_t>(j)] = true;
  }

  // Minimizes `cost` over columns where `allowed` is true. Returns false when
  // an entering column has no bounding row (unbounded direction).
  bool optimize(const VectorXd& cost, const std::vector<bool>& allowed) {
    cost_ = cost;
    refactor();
    bool fresh = true;
    int since_refactor = 0;
    while (true) {
      if (since_refactor >= opts_.refactor_every) {
        refactor();
        since_refactor = 0;
        fresh = true;
      }
      const Index q = entering(allowed);
      if (q < 0) {
        if (fresh) return true;
        refactor();
        since_refactor = 0;
        fresh = true;
        continue;
      }
      const Index r = leaving(q);
      if (r < 0) {
        if (!fresh) {
          refactor();
          since_refactor = 0;
          fresh = true;
          continue;
        }
        return false;
      }
      if (++iterations_ > opts_.max_iter) {
        throw LpError(LpStatus::IterationLimit,
                      fmt::format("simplex stopped after {} pivots", opts_.max_iter));
      }
      const bool degenerate = beta_[r] <= opts_.tolerance;
      streak_ = degenerate ? streak_ + 1 : 0;
      if (streak_ >= opts_.degenerate_streak) bland_ = true;
      pivot(r, q);
      ++since_refactor;
      fresh = false;
    }
  }

  // Pivots basic artificials out wherever a usable non-artificial entry exists.
  void expel_artificials() {
    for (Index r = 0; r < static_cast<Index>(basis_.size()); ++r) {
      if (!sf_.artificial[static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)])]) continue;
      Index best = -1;
      double best_val = 1e-7;
      for (Index j = 0; j < T_.cols(); ++j) {
        if (sf_.artificial[static_cast<std::size_t>(j)] || is_basic_[static_cast<std::size_t>(j)]) {
          continue;
        }
        if (std::abs(T_(r, j)) > best_val) {
          best_val = std::abs(T_(r, j));
          best = j;
        }
      }
      if (best >= 0) pivot(r, best);
    }
  }

  void refactor() {
    const Index m = sf_.A.rows();
    MatrixXd B(m, m);
    VectorXd cb(m);
    for (Index r = 0; r < m; ++r) {
      const Index j = basis_[static_cast<std::size_t>(r)];
      B.col(r) = sf_.A.col(j);
      cb[r] = cost_[j];
    }
    const Eigen::PartialPivLU<MatrixXd> lu(B);
    T_ = lu.solve(sf_.A);
    beta_ = lu.solve(sf_.b);
    duals_ = lu.transpose().solve(cb);
    d_ = cost_ - sf_.A.transpose() * duals_;
    for (Index r = 0; r < m; ++r) {
      if (beta_[r] < 0.0 && beta_[r] > -opts_.tolerance) beta_[r] = 0.0;
    }
  }

  const VectorXd& beta() const { return beta_; }
  const VectorXd& duals() const { return duals_; }
  const std::vector<Index>& basis() const { return basis_; }
  double objective() const {
    double z = 0.0;
    for (std::size_t r = 0; r < basis_.size(); ++r) {
      z += cost_[basis_[r]] * beta_[static_cast<Index>(r)];
    }
    return z;
  }
  int iterations() const { return iterations_; }
  bool used_bland() const { return bland_; }

 private:
  Index entering(const std::vector<bool>& allowed) const {
    Index best = -1;
    double best_d = 0.0;
    for (Index j = 0; j < d_.size(); ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (!allowed[uj] || is_basic_[uj]) continue;
      const double tol = opts_.tolerance * (1.0 + std::abs(cost_[j]));
      if (d_[j] >= -tol) continue;
      if (bland_) return j;
      if (d_[j] < best_d) {
        best_d = d_[j];
        best = j;
      }
    }
    return best;
  }

  Index leaving(Index q) const {
    Index best = -1;
    double best_ratio = kInf;
    double best_pivot = 0.0;
    for (Index r = 0; r < T_.rows(); ++r) {
      const double a = T_(r, q);
      if (a <= kPivotTol) continue;
      const double ratio = std::max(beta_[r], 0.0) / a;
      const double tie = 1e-12 * (1.0 + best_ratio);
      if (best < 0 || ratio < best_ratio - tie) {
        best = r;
        best_ratio = ratio;
        best_pivot = a;
      } else if (ratio <= best_ratio + tie) {
        const bool take = bland_ ? basis_[static_cast<std::size_t>(r)] <
                                       basis_[static_cast<std::size_t>(best)]
                                 : a > best_pivot;
        if (take) {
          best = r;
          best_ratio = std::min(best_ratio, ratio);
          best_pivot = a;
        }
      }
    }
    return best;
  }

  void pivot(Index r, Index q) {
    const double p = T_(r, q);
    T_.row(r) /= p;
    beta_[r] /= p;
    for (Index i = 0; i < T_.rows(); ++i) {
      if (i == r) continue;
      const double f = T_(i, q);
      if (f == 0.0) continue;
      T_.row(i) -= f * T_.row(r);
      beta_[i] -= f * beta_[r];
    }
    const double f = d_[q];
    d_ -= f * T_.row(r).transpose();
    const auto ur = static_cast<std::size_t>(r);
    is_basic_[static_cast<std::size_t>(basis_[ur])] = false;
    basis_[ur] = q;
    is_basic_[static_cast<std::size_t>(q)] = true;
  }

  const StandardForm& sf_;
  const SimplexOptions& opts_;
  std::vector<Index> basis_;
  std::vector<bool> is_basic_;
  VectorXd cost_;
  MatrixXd T_;
  VectorXd beta_;
  VectorXd d_;
  VectorXd duals_;
  int iterations_ = 0;
  int streak_ = 0;
  bool bland_ = false;
};

std::string lp_name(const std::string& raw) {
  std::string out;
  for (char ch : raw) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.';
    out += ok ? ch : '_';
  }
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out.front())) || out.front() == '.') {
    out.insert(out.begin(), '_');
  }
  return out;
}

void write_terms(std::ostringstream& os, const std::vector<std::pair<std::string, double>>& terms) {
  if (terms.empty()) {
    os << " 0";
    return;
  }
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double c = terms[k].second;
    os << (c < 0 ? " - " : (k ? " + " : " ")) << fmt::format("{:.17g}", std::abs(c)) << ' '
       << terms[k].first;
  }
}

}  // namespace

std::size_t LinearProgram::add_variable(std::string name, double lower, double upper,
                                        double cost) {
  names_.push_back(std::move(name));
  lower_.push_back(lower);
  upper_.push_back(upper);
  cost_.push_back(cost);
  return names_.size() - 1;
}

std::size_t LinearProgram::add_row(std::string name, std::vector<LpTerm> terms, Sense sense,
                                   double rhs) {
  rows_.push_back({std::move(name), std::move(terms), sense, rhs});
  return rows_.size() - 1;
}

Eigen::VectorXd LinearProgram::activities(const Eigen::VectorXd& x) const {
  VectorXd a = VectorXd::Zero(static_cast<Index>(rows_.size()));
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    for (const LpTerm& t : rows_[i].terms) a[static_cast<Index>(i)] += t.coef * x[static_cast<Index>(t.var)];
  }
  return a;
}

double LinearProgram::objective(const Eigen::VectorXd& x) const {
  double z = 0.0;
  for (std::size_t j = 0; j < cost_.size(); ++j) z += cost_[j] * x[static_cast<Index>(j)];
  return z;
}

void LinearProgram::validate() const {
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (!std::isfinite(cost_[j]) || std::isnan(lower_[j]) || std::isnan(upper_[j]) ||
        lower_[j] == kInf || upper_[j] == -kInf) {
      throw PreconditionError(fmt::format("variable {} has invalid data", names_[j]));
    }
    if (lower_[j] > upper_[j]) {
      throw LpError(LpStatus::Infeasible,
                    fmt::format("variable {} has lower bound {} above upper bound {}", names_[j],
                                lower_[j], upper_[j]));
    }
  }
  for (const LpRow& row : rows_) {
    if (!std::isfinite(row.rhs)) {
      throw PreconditionError(fmt::format("row {} has a non-finite right-hand side", row.name));
    }
    for (const LpTerm& t : row.terms) {
      if (t.var >= names_.size() || !std::isfinite(t.coef)) {
        throw PreconditionError(fmt::format("row {} has an invalid term", row.name));
      }
    }
  }
}

std::string LinearProgram::to_lp_format() const {
  std::ostringstream os;
  os << "Minimize\n obj:";
  std::vector<std::pair<std::string, double>> terms;
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (cost_[j] != 0.0) terms.emplace_back(lp_name(names_[j]), cost_[j]);
  }
  write_terms(os, terms);
  os << "\nSubject To\n";
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    terms.clear();
    for (const LpTerm& t : rows_[i].terms) terms.emplace_back(lp_name(names_[t.var]), t.coef);
    os << ' ' << lp_name(rows_[i].name.empty() ? fmt::format("r{}", i) : rows_[i].name) << ':';
    write_terms(os, terms);
    const char* op = rows_[i].sense == Sense::Le ? "<=" : rows_[i].sense == Sense::Ge ? ">=" : "=";
    os << ' ' << op << ' ' << fmt::format("{:.17g}", rows_[i].rhs) << '\n';
  }
  os << "Bounds\n";
  for (std::size_t j = 0; j < names_.size(); ++j) {
    const std::string n = lp_name(names_[j]);
    const double lo = lower_[j];
    const double hi = upper_[j];
    if (lo == hi) {
      os << ' ' << n << " = " << fmt::format("{:.17g}", lo) << '\n';
    } else if (!std::isfinite(lo) && !std::isfinite(hi)) {
      os << ' ' << n << " free\n";
    } else {
      os << ' ' << (std::isfinite(lo) ? fmt::format("{:.17g}", lo) : "-inf") << " <= " << n
         << " <= " << (std::isfinite(hi) ? fmt::format("{:.17g}", hi) : "+inf") << '\n';
    }
  }
  os << "End\n";
  return os.str();
}

LpSolution simplex_solve(const LinearProgram& lp, const SimplexOptions& opts) {
  lp.validate();
  const StandardForm sf = to_standard_form(lp);
  const Index n = sf.A.cols();
  Tableau tab(sf, opts);

  std::vector<bool> allowed(static_cast<std::size_t>(n), true);
  const bool any_artificial = std::find(sf.artificial.begin(), sf.artificial.end(), true) !=
                              sf.artificial.end();
  if (any_artificial) {
    VectorXd phase1 = VectorXd::Zero(n);
    for (Index j = 0; j < n; ++j) phase1[j] = sf.artificial[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
    tab.optimize(phase1, allowed);
    const double infeas = tab.objective();
    const double scale = 1.0 + (sf.b.size() ? sf.b.lpNorm<Eigen::Infinity>() : 0.0);
    if (infeas > opts.tolerance * scale) {
      throw LpError(LpStatus::Infeasible,
                    fmt::format("no feasible point: phase-one residual {:.3e}", infeas));
    }
    tab.expel_artificials();
    for (Index j = 0; j < n; ++j) {
      if (sf.artificial[static_cast<std::size_t>(j)]) allowed[static_cast<std::size_t>(j)] = false;
    }
  }
  if (!tab.optimize(sf.c, allowed)) {
    throw LpError(LpStatus::Unbounded, "objective is unbounded below");
  }

  VectorXd xs = VectorXd::Zero(n);
  for (std::size_t r = 0; r < tab.basis().size(); ++r) {
    xs[tab.basis()[r]] = std::max(tab.beta()[static_cast<Index>(r)], 0.0);
  }
  LpSolution sol;
  sol.x.resize(static_cast<Index>(lp.num_variables()));
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    const VarMap& vm = sf.vars[j];
    double v = vm.offset;
    if (vm.col >= 0) v += vm.sign * xs[vm.col];
    if (vm.minus >= 0) v -= xs[vm.minus];
    sol.x[static_cast<Index>(j)] = std::clamp(v, lp.lower(j), lp.upper(j));
  }
  sol.row_duals.resize(static_cast<Index>(lp.num_rows()));
  for (std::size_t i = 0; i < lp.num_rows(); ++i) {
    sol.row_duals[static_cast<Index>(i)] = sf.row_sign[i] * tab.duals()[static_cast<Index>(i)];
  }
  sol.objective = lp.objective(sol.x);
  sol.iterations = tab.iterations();
  sol.used_bland = tab.used_bland();
  return sol;
}

Certificate check_certificate(const LinearProgram& lp, const LpSolution& sol) {
  Certificate cert;
  const auto& rows = lp.rows();
  const VectorXd act = lp.activities(sol.x);
  const std::size_t nv = lp.num_variables();
  double cmax = 0.0;
  for (std::size_t j = 0; j < nv; ++j) cmax = std::max(cmax, std::abs(lp.cost(j)));
  const double dual_scale = 1.0 + cmax;

  // Reduced costs d = c - A'y.
  VectorXd d(static_cast<Index>(nv));
  for (std::size_t j = 0; j < nv; ++j) d[static_cast<Index>(j)] = lp.cost(j);
  double dual_obj = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double y = sol.row_duals[static_cast<Index>(i)];
    const double resid = act[static_cast<Index>(i)] - rows[i].rhs;
    const double scale = 1.0 + std::abs(rows[i].rhs);
    double viol = 0.0;
    double wrong_sign = 0.0;
    switch (rows[i].sense) {
      case Sense::Le:
        viol = std::max(resid, 0.0);
        wrong_sign = std::max(y, 0.0);
        break;
      case Sense::Ge:
        viol = std::max(-resid, 0.0);
        wrong_sign = std::max(-y, 0.0);
        break;
      case Sense::Eq:
        viol = std::abs(resid);
        break;
    }
    cert.primal_violation = std::max(cert.primal_violation, viol / scale);
    cert.dual_violation = std::max(cert.dual_violation, wrong_sign / dual_scale);
    cert.complementarity =
        std::max(cert.complementarity, std::abs(y * resid) / (dual_scale * scale));
    for (const LpTerm& t : rows[i].terms) d[static_cast<Index>(t.var)] -= y * t.coef;
    dual_obj += y * rows[i].rhs;
  }
  for (std::size_t j = 0; j < nv; ++j) {
    const double x = sol.x[static_cast<Index>(j)];
    const double lo = lp.lower(j);
    const double hi = lp.upper(j);
    const double dj = d[static_cast<Index>(j)];
    const double bscale = 1.0 + std::max(std::isfinite(lo) ? std::abs(lo) : 0.0,
                                         std::isfinite(hi) ? std::abs(hi) : 0.0);
    const double viol = std::max({lo - x, x - hi, 0.0});
    cert.primal_violation = std::max(cert.primal_violation, viol / bscale);
    if (dj > 0.0) {
      if (!std::isfinite(lo)) {
        cert.dual_violation = std::max(cert.dual_violation, dj / dual_scale);
      } else {
        dual_obj += dj * lo;
        cert.complementarity =
            std::max(cert.complementarity, dj * (x - lo) / (dual_scale * bscale));
      }
    } else if (dj < 0.0) {
      if (!std::isfinite(hi)) {
        cert.dual_violation = std::max(cert.dual_violation, -dj / dual_scale);
      } else {
        dual_obj += dj * hi;
        cert.complementarity =
            std::max(cert.complementarity, -dj * (hi - x) / (dual_scale * bscale));
      }
    }
  }
  const double primal_obj = lp.objective(sol.x);
  cert.duality_gap = std::abs(primal_obj - dual_obj) / (1.0 + std::abs(primal_obj));
  return cert;
}

}  // namespace pfr
