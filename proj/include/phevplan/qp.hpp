#ifndef PHEVPLAN_QP_HPP
#define PHEVPLAN_QP_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "phevplan/common.hpp"
#include "phevplan/ipm.hpp"

// Sparse convex quadratic programming by operator splitting (ADMM over the
// constraint set l <= Ax <= u), with Ruiz equilibration, adaptive step size,
// infeasibility certificates and an active-set polish pass. Deterministic:
// fixed starting point and a fixed iteration schedule.

namespace phevplan {

struct QpProblem {
    int num_vars = 0;
    std::vector<Eigen::Triplet<double>> p_triplets;  // 1/2 x'Px + q'x + constant
    Eigen::VectorXd q;
    double objective_const = 0.0;
    std::vector<Eigen::Triplet<double>> a_triplets;  // l <= Ax <= u
    std::vector<double> lower;
    std::vector<double> upper;

    QpProblem() = default;
    explicit QpProblem(int n) : num_vars(n), q(Eigen::VectorXd::Zero(n)) {}

    int num_rows() const { return static_cast<int>(lower.size()); }

    int add_row(double lo, double up) {
        lower.push_back(lo);
        upper.push_back(up);
        return static_cast<int>(lower.size()) - 1;
    }
    void set_a(int row, int col, double v) { a_triplets.emplace_back(row, col, v); }
    void add_p(int i, int j, double v) { p_triplets.emplace_back(i, j, v); }

    /// Adds coeff2*(a'x + b)^2 + coeff1*(a'x + b) to the objective, where the
    /// affine form is given by sparse (index, value) pairs.
    void add_affine_quadratic(const std::vector<std::pair<int, double>>& affine, double b,
                              double coeff2, double coeff1) {
        for (const auto& [i, ai] : affine) {
            for (const auto& [j, aj] : affine) add_p(i, j, 2.0 * coeff2 * ai * aj);
            q(i) += 2.0 * coeff2 * b * ai + coeff1 * ai;
        }
        objective_const += coeff2 * b * b + coeff1 * b;
    }
};

enum class QpStatus { solved, max_iterations, primal_infeasible, dual_infeasible };

inline const char* qp_status_name(QpStatus s) {
    switch (s) {
        case QpStatus::solved: return "solved";
        case QpStatus::max_iterations: return "max_iterations";
        case QpStatus::primal_infeasible: return "primal_infeasible";
        case QpStatus::dual_infeasible: return "dual_infeasible";
    }
    return "?";
}

struct QpSettings {
    double feas_tol = 1e-6;      // row-norm scaled feasibility requirement
    double gap_tol = 1e-4;       // relative optimality certificate requirement
    double eps_abs = 1e-8;
    double eps_rel = 1e-8;
    double eps_infeas = 1e-6;
    int max_iterations = 20000;
    int check_interval = 25;
    int polish_interval = 500;  // try an active-set finish this often
    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6;
    bool adaptive_rho = true;
    bool polish = true;
    bool ipm_fallback = true;
};

struct QpResult {
    QpStatus status = QpStatus::max_iterations;
    Eigen::VectorXd x;
    Eigen::VectorXd y;  // row multipliers
    double objective = 0.0;
    double feas_residual = 0.0;  // max row violation scaled by row norms
    double dual_residual = 0.0;
    double gap_estimate = 0.0;   // relative optimality estimate at the KKT point
    int iterations = 0;
};

namespace qpdetail {

using SpMat = Eigen::SparseMatrix<double>;

struct Scaling {
    Eigen::VectorXd d;  // variable scaling
    Eigen::VectorXd e;  // row scaling
    double c = 1.0;     // cost scaling
};

inline Eigen::VectorXd col_inf_norms(const SpMat& m) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m.cols());
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it)
            out(it.col()) = std::max(out(it.col()), std::abs(it.value()));
    return out;
}

inline Eigen::VectorXd row_inf_norms(const SpMat& m) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m.rows());
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it)
            out(it.row()) = std::max(out(it.row()), std::abs(it.value()));
    return out;
}

/// Modified Ruiz equilibration of the stacked [P A'; A 0] system.
inline Scaling ruiz_equilibrate(SpMat& p, Eigen::VectorXd& q, SpMat& a, Eigen::VectorXd& lo,
                                Eigen::VectorXd& up) {
    const int n = static_cast<int>(p.rows());
    const int m = static_cast<int>(a.rows());
    Scaling s;
    s.d = Eigen::VectorXd::Ones(n);
    s.e = Eigen::VectorXd::Ones(m);

    auto guarded = [](double v) { return (v < 1e-8 || !std::isfinite(v)) ? 1.0 : v; };

    for (int pass = 0; pass < 10; ++pass) {
        Eigen::VectorXd cp = col_inf_norms(p);
        Eigen::VectorXd ca = col_inf_norms(a);
        Eigen::VectorXd delta(n);
        for (int j = 0; j < n; ++j) delta(j) = 1.0 / std::sqrt(guarded(std::max(cp(j), ca(j))));
        Eigen::VectorXd ra = row_inf_norms(a);
        Eigen::VectorXd eps(m);
        for (int i = 0; i < m; ++i) eps(i) = 1.0 / std::sqrt(guarded(ra(i)));

        p = delta.asDiagonal() * p * delta.asDiagonal();
        a = eps.asDiagonal() * a * delta.asDiagonal();
        q = delta.asDiagonal() * q;
        lo = eps.asDiagonal() * lo;
        up = eps.asDiagonal() * up;
        s.d = s.d.cwiseProduct(delta);
        s.e = s.e.cwiseProduct(eps);
    }

    // cost normalization
    Eigen::VectorXd cp = col_inf_norms(p);
    double mean_cp = cp.size() > 0 ? cp.mean() : 0.0;
    double denom = std::max({1.0, mean_cp, q.lpNorm<Eigen::Infinity>()});
    s.c = 1.0 / denom;
    p *= s.c;
    q *= s.c;
    return s;
}

inline double clamp_inf(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace qpdetail

class QpSolver {
  public:
    explicit QpSolver(const QpProblem& prob, QpSettings settings = {})
        : settings_(settings), n_(prob.num_vars), m_(prob.num_rows()) {
        if (n_ <= 0) throw std::invalid_argument("QpSolver: empty problem");
        p_orig_.resize(n_, n_);
        p_orig_.setFromTriplets(prob.p_triplets.begin(), prob.p_triplets.end());
        p_orig_ = (SpMat(p_orig_.transpose()) + p_orig_) * 0.5;  // symmetrize
        a_orig_.resize(m_, n_);
        a_orig_.setFromTriplets(prob.a_triplets.begin(), prob.a_triplets.end());
        q_orig_ = prob.q;
        const_ = prob.objective_const;
        lo_orig_ = Eigen::Map<const Eigen::VectorXd>(prob.lower.data(), m_);
        up_orig_ = Eigen::Map<const Eigen::VectorXd>(prob.upper.data(), m_);
        for (int i = 0; i < m_; ++i)
            if (lo_orig_(i) > up_orig_(i) + 1e-15)
                throw std::invalid_argument("QpSolver: row with lower > upper");

        a_row_norms_.resize(m_);
        for (int i = 0; i < m_; ++i) a_row_norms_(i) = 0.0;
        for (int k = 0; k < a_orig_.outerSize(); ++k)
            for (SpMat::InnerIterator it(a_orig_, k); it; ++it)
                a_row_norms_(it.row()) += it.value() * it.value();
        a_row_norms_ = a_row_norms_.cwiseSqrt();

        // rows without coefficients are infeasible outright unless they admit 0
        for (int i = 0; i < m_; ++i)
            if (a_row_norms_(i) == 0.0 && (lo_orig_(i) > 1e-15 || up_orig_(i) < -1e-15))
                trivially_infeasible_ = true;
    }

    QpResult solve() {
        if (trivially_infeasible_) {
            QpResult res;
            res.status = QpStatus::primal_infeasible;
            res.x = Eigen::VectorXd::Zero(n_);
            res.y = Eigen::VectorXd::Zero(m_);
            res.feas_residual = kInf;
            return res;
        }
        // scaled copies
        SpMat p = p_orig_, a = a_orig_;
        Eigen::VectorXd q = q_orig_, lo = lo_orig_, up = up_orig_;
        const auto sc = qpdetail::ruiz_equilibrate(p, q, a, lo, up);

        Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
        Eigen::VectorXd z(m_), y = Eigen::VectorXd::Zero(m_);
        for (int i = 0; i < m_; ++i) z(i) = qpdetail::clamp_inf(0.0, lo(i), up(i));

        double rho_bar = settings_.rho;
        Eigen::VectorXd rho_vec = make_rho_vec(rho_bar, lo, up);
        factorize(p, a, rho_vec);

        QpResult res;
        Eigen::VectorXd x_prev = x, y_prev = y;
        int it = 0;
        for (it = 1; it <= settings_.max_iterations; ++it) {
            // x-update through the reduced normal equations
            Eigen::VectorXd rhs = settings_.sigma * x - q + a.transpose() * (rho_vec.cwiseProduct(z) - y);
            Eigen::VectorXd x_tilde = llt_.solve(rhs);
            Eigen::VectorXd az_tilde = a * x_tilde;

            const double alpha = settings_.alpha;
            Eigen::VectorXd x_next = alpha * x_tilde + (1.0 - alpha) * x;
            Eigen::VectorXd z_nominal = alpha * az_tilde + (1.0 - alpha) * z + y.cwiseQuotient(rho_vec);
            Eigen::VectorXd z_next(m_);
            for (int i = 0; i < m_; ++i) z_next(i) = qpdetail::clamp_inf(z_nominal(i), lo(i), up(i));
            // z_nominal already carries y/rho, so this is y + rho*(relaxed z - z_next)
            Eigen::VectorXd y_next = rho_vec.cwiseProduct(z_nominal - z_next);

            x = x_next;
            z = z_next;
            y = y_next;

            if (it % settings_.check_interval == 0 || it == settings_.max_iterations) {
                // unscaled iterates
                Eigen::VectorXd xu = sc.d.cwiseProduct(x);
                Eigen::VectorXd yu = sc.e.cwiseProduct(y) / sc.c;
                Eigen::VectorXd zu = z.cwiseQuotient(sc.e);

                Metrics met = metrics(xu, yu, zu);
                if (met.prim_ok && met.dual_ok && met.feas_scaled <= settings_.feas_tol &&
                    met.gap_rel <= settings_.gap_tol) {
                    finish(res, xu, yu, met, it, QpStatus::solved);
                    maybe_polish(res);
                    return res;
                }

                // near-feasible iterates often carry the exact active set;
                // an equality solve on it can finish early
                if (settings_.polish && it % settings_.polish_interval == 0 && met.prim_res <= 1e-3 &&
                    met.dual_res <= 1e-3) {
                    if (polish_ladder(xu, yu, it, res)) return res;
                }

                // infeasibility certificates from the iterate deltas
                Eigen::VectorXd dy = sc.e.cwiseProduct(y - y_prev) / sc.c;
                Eigen::VectorXd dx = sc.d.cwiseProduct(x - x_prev);
                if (primal_infeasible(dy)) {
                    finish(res, xu, yu, met, it, QpStatus::primal_infeasible);
                    return res;
                }
                if (dual_infeasible(dx)) {
                    finish(res, xu, yu, met, it, QpStatus::dual_infeasible);
                    return res;
                }
                x_prev = x;
                y_prev = y;

                if (settings_.adaptive_rho && met.rho_ratio > 0.0) {
                    const double scale = std::sqrt(met.rho_ratio);
                    if (scale > 5.0 || scale < 0.2) {
                        rho_bar = qpdetail::clamp_inf(rho_bar * scale, 1e-6, 1e6);
                        rho_vec = make_rho_vec(rho_bar, lo, up);
                        factorize(p, a, rho_vec);
                    }
                }
            }
        }

        Eigen::VectorXd xu = sc.d.cwiseProduct(x);
        Eigen::VectorXd yu = sc.e.cwiseProduct(y) / sc.c;
        Eigen::VectorXd zu = z.cwiseQuotient(sc.e);
        Metrics met = metrics(xu, yu, zu);
        finish(res, xu, yu, met, settings_.max_iterations, QpStatus::max_iterations);
        if (settings_.polish && polish_ladder(xu, yu, settings_.max_iterations, res)) return res;

        // degenerate optimal faces can stall the splitting iteration; an
        // interior-point pass finishes those to full accuracy
        if (settings_.ipm_fallback) {
            if (auto pt = ipm::solve(p_orig_, q_orig_, a_orig_, lo_orig_, up_orig_)) {
                Metrics pm = metrics(pt->x, pt->y, clamp_rows(a_orig_ * pt->x));
                if (pm.soft_ok) {
                    finish(res, pt->x, pt->y, pm, settings_.max_iterations, QpStatus::solved);
                    return res;
                }
            }
        }
        if (res.status == QpStatus::max_iterations && res.feas_residual <= settings_.feas_tol &&
            res.gap_estimate <= settings_.gap_tol)
            res.status = QpStatus::solved;
        return res;
    }

  private:
    using SpMat = qpdetail::SpMat;

    struct Metrics {
        double prim_res = 0.0;
        double dual_res = 0.0;
        double feas_scaled = 0.0;
        double gap_rel = 0.0;
        bool prim_ok = false;
        bool dual_ok = false;
        bool soft_ok = false;  // contract-level accuracy for finishing passes
        double rho_ratio = -1.0;
    };

    Eigen::VectorXd make_rho_vec(double rho_bar, const Eigen::VectorXd& lo, const Eigen::VectorXd& up) const {
        Eigen::VectorXd r(m_);
        for (int i = 0; i < m_; ++i) {
            const bool eq = std::isfinite(lo(i)) && std::isfinite(up(i)) && (up(i) - lo(i) < 1e-14);
            r(i) = eq ? rho_bar * 1e3 : rho_bar;
        }
        return r;
    }

    void factorize(const SpMat& p, const SpMat& a, const Eigen::VectorXd& rho_vec) {
        SpMat ar = rho_vec.asDiagonal() * a;
        SpMat ata = SpMat(a.transpose()) * ar;
        SpMat eye(n_, n_);
        eye.setIdentity();
        SpMat k = p + ata + SpMat(eye * settings_.sigma);
        llt_.compute(k);
        if (llt_.info() != Eigen::Success) throw std::runtime_error("QpSolver: factorization failed");
    }

    Metrics metrics(const Eigen::VectorXd& xu, const Eigen::VectorXd& yu, const Eigen::VectorXd& zu) const {
        Metrics met;
        Eigen::VectorXd ax = a_orig_ * xu;
        Eigen::VectorXd px = p_orig_ * xu;
        Eigen::VectorXd aty = a_orig_.transpose() * yu;

        met.prim_res = (ax - zu).lpNorm<Eigen::Infinity>();
        met.dual_res = (px + q_orig_ + aty).lpNorm<Eigen::Infinity>();
        const double eps_prim = settings_.eps_abs +
                                settings_.eps_rel * std::max(ax.lpNorm<Eigen::Infinity>(), zu.lpNorm<Eigen::Infinity>());
        const double eps_dual = settings_.eps_abs +
                                settings_.eps_rel * std::max({px.lpNorm<Eigen::Infinity>(),
                                                              q_orig_.lpNorm<Eigen::Infinity>(),
                                                              aty.lpNorm<Eigen::Infinity>()});
        met.prim_ok = met.prim_res <= eps_prim;
        met.dual_ok = met.dual_res <= eps_dual;

        met.feas_scaled = feas_residual(xu);
        met.gap_rel = gap_relative(xu, yu, ax, px);

        const double soft = 1e-6;
        const double eps_prim_soft = soft + soft * std::max(ax.lpNorm<Eigen::Infinity>(), zu.lpNorm<Eigen::Infinity>());
        const double eps_dual_soft = soft + soft * std::max({px.lpNorm<Eigen::Infinity>(),
                                                             q_orig_.lpNorm<Eigen::Infinity>(),
                                                             aty.lpNorm<Eigen::Infinity>()});
        met.soft_ok = met.prim_res <= eps_prim_soft && met.dual_res <= eps_dual_soft &&
                      met.feas_scaled <= settings_.feas_tol && met.gap_rel <= settings_.gap_tol;

        const double pr_rel = met.prim_res / std::max({ax.lpNorm<Eigen::Infinity>(), zu.lpNorm<Eigen::Infinity>(), 1e-10});
        const double du_rel = met.dual_res / std::max({px.lpNorm<Eigen::Infinity>(), q_orig_.lpNorm<Eigen::Infinity>(),
                                                       aty.lpNorm<Eigen::Infinity>(), 1e-10});
        met.rho_ratio = pr_rel / std::max(du_rel, 1e-12);
        return met;
    }

    double feas_residual(const Eigen::VectorXd& xu) const {
        Eigen::VectorXd ax = a_orig_ * xu;
        double worst = 0.0;
        for (int i = 0; i < m_; ++i) {
            double viol = 0.0;
            if (ax(i) < lo_orig_(i)) viol = lo_orig_(i) - ax(i);
            if (ax(i) > up_orig_(i)) viol = std::max(viol, ax(i) - up_orig_(i));
            worst = std::max(worst, viol / std::max(1.0, a_row_norms_(i)));
        }
        return worst;
    }

    /// Relative optimality estimate at a near-KKT point: complementary
    /// slackness mismatch plus the dual residual weighted by |x|.
    double gap_relative(const Eigen::VectorXd& xu, const Eigen::VectorXd& yu, const Eigen::VectorXd& ax,
                        const Eigen::VectorXd& px) const {
        double slack = 0.0;
        for (int i = 0; i < m_; ++i) {
            const double yi = yu(i);
            if (std::abs(yi) < 1e-14) continue;
            const double bound = yi > 0.0 ? up_orig_(i) : lo_orig_(i);
            if (!std::isfinite(bound)) return kInf;  // multiplier on a free side
            slack += std::abs(yi) * std::abs(bound - ax(i));
        }
        const double dual_term = (px + q_orig_ + a_orig_.transpose() * yu).lpNorm<Eigen::Infinity>() *
                                 std::max(1.0, xu.lpNorm<1>());
        const double obj = 0.5 * xu.dot(px) + q_orig_.dot(xu) + const_;
        return (slack + dual_term) / std::max(1.0, std::abs(obj));
    }

    bool primal_infeasible(const Eigen::VectorXd& dy) const {
        const double norm = dy.lpNorm<Eigen::Infinity>();
        if (norm < 1e-12) return false;
        Eigen::VectorXd atdy = a_orig_.transpose() * dy;
        if (atdy.lpNorm<Eigen::Infinity>() > settings_.eps_infeas * norm) return false;
        double support = 0.0;
        for (int i = 0; i < m_; ++i) {
            const double v = dy(i);
            if (v > 0.0) {
                if (!std::isfinite(up_orig_(i))) return false;
                support += up_orig_(i) * v;
            } else if (v < 0.0) {
                if (!std::isfinite(lo_orig_(i))) return false;
                support += lo_orig_(i) * v;
            }
        }
        return support <= -settings_.eps_infeas * norm;
    }

    bool dual_infeasible(const Eigen::VectorXd& dx) const {
        const double norm = dx.lpNorm<Eigen::Infinity>();
        if (norm < 1e-12) return false;
        if ((p_orig_ * dx).lpNorm<Eigen::Infinity>() > settings_.eps_infeas * norm) return false;
        if (q_orig_.dot(dx) > -settings_.eps_infeas * norm) return false;
        Eigen::VectorXd adx = a_orig_ * dx;
        for (int i = 0; i < m_; ++i) {
            const bool lo_fin = std::isfinite(lo_orig_(i));
            const bool up_fin = std::isfinite(up_orig_(i));
            const double v = adx(i);
            if (lo_fin && up_fin) {
                if (std::abs(v) > settings_.eps_infeas * norm) return false;
            } else if (up_fin && v > settings_.eps_infeas * norm) {
                return false;
            } else if (lo_fin && v < -settings_.eps_infeas * norm) {
                return false;
            }
        }
        return true;
    }

    void finish(QpResult& res, const Eigen::VectorXd& xu, const Eigen::VectorXd& yu, const Metrics& met,
                int iters, QpStatus status) const {
        res.status = status;
        res.x = xu;
        res.y = yu;
        res.objective = 0.5 * xu.dot(p_orig_ * xu) + q_orig_.dot(xu) + const_;
        res.feas_residual = met.feas_scaled;
        res.dual_residual = met.dual_res;
        res.gap_estimate = met.gap_rel;
        res.iterations = iters;
    }

    enum class Side : std::uint8_t { off, lower, upper };

    /// Equality solve on the rows marked active; returns the candidate
    /// point and its multipliers (zero on inactive rows).
    std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> kkt_solve(
        const std::vector<Side>& side) const {
        std::vector<int> act;
        std::vector<double> rhs_vals;
        for (int i = 0; i < m_; ++i) {
            if (side[static_cast<std::size_t>(i)] == Side::off) continue;
            act.push_back(i);
            rhs_vals.push_back(side[static_cast<std::size_t>(i)] == Side::lower ? lo_orig_(i) : up_orig_(i));
        }
        const int ma = static_cast<int>(act.size());

        const double delta = 1e-9;
        SpMat kkt(n_ + ma, n_ + ma);
        std::vector<Eigen::Triplet<double>> trips;
        for (int k = 0; k < p_orig_.outerSize(); ++k)
            for (SpMat::InnerIterator it(p_orig_, k); it; ++it)
                trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        for (int i = 0; i < n_; ++i) trips.emplace_back(i, i, delta);
        const auto& arow = a_row_major_cache();
        for (int r = 0; r < ma; ++r) {
            const int row = act[static_cast<std::size_t>(r)];
            for (SpMatR::InnerIterator it(arow, row); it; ++it) {
                trips.emplace_back(n_ + r, static_cast<int>(it.col()), it.value());
                trips.emplace_back(static_cast<int>(it.col()), n_ + r, it.value());
            }
            trips.emplace_back(n_ + r, n_ + r, -delta);
        }
        kkt.setFromTriplets(trips.begin(), trips.end());

        Eigen::VectorXd rhs(n_ + ma);
        rhs.head(n_) = -q_orig_;
        for (int r = 0; r < ma; ++r) rhs(n_ + r) = rhs_vals[static_cast<std::size_t>(r)];

        Eigen::SparseLU<SpMat> lu;
        lu.analyzePattern(kkt);
        lu.factorize(kkt);
        if (lu.info() != Eigen::Success) return std::nullopt;
        Eigen::VectorXd sol = lu.solve(rhs);
        for (int refine = 0; refine < 3; ++refine) sol += lu.solve(rhs - kkt * sol);
        if (!sol.allFinite()) return std::nullopt;

        Eigen::VectorXd x_new = sol.head(n_);
        Eigen::VectorXd y_new = Eigen::VectorXd::Zero(m_);
        for (int r = 0; r < ma; ++r) y_new(act[static_cast<std::size_t>(r)]) = sol(n_ + r);
        return std::make_pair(std::move(x_new), std::move(y_new));
    }

    /// Crossover-style finisher: seed the active set from the iterate, then
    /// pivot (add violated rows, drop wrong-signed multipliers) for a few
    /// rounds. Accepts only a candidate meeting the full criteria, so a
    /// failed finish simply leaves the iterate untouched.
    bool polish_ladder(const Eigen::VectorXd& xu, const Eigen::VectorXd& yu, int iters,
                       QpResult& out) const {
        std::vector<Side> side(static_cast<std::size_t>(m_), Side::off);
        Eigen::VectorXd ax = a_orig_ * xu;
        const double y_tol = 1e-4 * std::max(1e-8, yu.lpNorm<Eigen::Infinity>());
        for (int i = 0; i < m_; ++i) {
            const bool lo_fin = std::isfinite(lo_orig_(i));
            const bool up_fin = std::isfinite(up_orig_(i));
            if (lo_fin && up_fin && up_orig_(i) - lo_orig_(i) < 1e-14) {
                side[static_cast<std::size_t>(i)] = Side::lower;
            } else if (lo_fin && (yu(i) < -y_tol || ax(i) - lo_orig_(i) < 1e-6)) {
                side[static_cast<std::size_t>(i)] = Side::lower;
            } else if (up_fin && (yu(i) > y_tol || up_orig_(i) - ax(i) < 1e-6)) {
                side[static_cast<std::size_t>(i)] = Side::upper;
            }
        }

        for (int round = 0; round < 60; ++round) {
            auto cand = kkt_solve(side);
            if (!cand) return false;
            Metrics pm = metrics(cand->first, cand->second, clamp_rows(a_orig_ * cand->first));
            if (pm.soft_ok) {
                finish(out, cand->first, cand->second, pm, iters, QpStatus::solved);
                return true;
            }

            // pivot: activate violated rows, release wrong-signed actives
            Eigen::VectorXd axc = a_orig_ * cand->first;
            bool changed = false;
            for (int i = 0; i < m_; ++i) {
                const auto is = static_cast<std::size_t>(i);
                const bool eq = std::isfinite(lo_orig_(i)) && std::isfinite(up_orig_(i)) &&
                                up_orig_(i) - lo_orig_(i) < 1e-14;
                if (eq) continue;
                if (side[is] == Side::off) {
                    if (std::isfinite(lo_orig_(i)) && axc(i) < lo_orig_(i) - 1e-9) {
                        side[is] = Side::lower;
                        changed = true;
                    } else if (std::isfinite(up_orig_(i)) && axc(i) > up_orig_(i) + 1e-9) {
                        side[is] = Side::upper;
                        changed = true;
                    }
                } else if (side[is] == Side::lower && cand->second(i) > 1e-9) {
                    side[is] = Side::off;
                    changed = true;
                } else if (side[is] == Side::upper && cand->second(i) < -1e-9) {
                    side[is] = Side::off;
                    changed = true;
                }
            }
            if (!changed) return false;  // stationary but out of tolerance
        }
        return false;
    }

    void maybe_polish(QpResult& res) const {
        if (!settings_.polish || res.status != QpStatus::solved) return;
        QpResult better = res;
        if (polish_ladder(res.x, res.y, res.iterations, better) &&
            better.feas_residual <= res.feas_residual + 1e-12 &&
            better.gap_estimate <= std::max(res.gap_estimate, 1e-12)) {
            res = better;
        }
    }

    Eigen::VectorXd clamp_rows(Eigen::VectorXd v) const {
        for (int i = 0; i < m_; ++i) v(i) = qpdetail::clamp_inf(v(i), lo_orig_(i), up_orig_(i));
        return v;
    }

    using SpMatR = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    const SpMatR& a_row_major_cache() const {
        if (a_row_major_.rows() == 0 && m_ > 0) a_row_major_ = SpMatR(a_orig_);
        return a_row_major_;
    }

    QpSettings settings_;
    int n_ = 0;
    int m_ = 0;
    SpMat p_orig_;
    SpMat a_orig_;
    mutable SpMatR a_row_major_;
    Eigen::VectorXd q_orig_;
    double const_ = 0.0;
    Eigen::VectorXd lo_orig_, up_orig_, a_row_norms_;
    bool trivially_infeasible_ = false;
    Eigen::SimplicialLDLT<SpMat> llt_;
};

}  // namespace phevplan

#endif  // PHEVPLAN_QP_HPP
