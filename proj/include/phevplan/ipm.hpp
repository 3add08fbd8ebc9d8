#ifndef PHEVPLAN_IPM_HPP
#define PHEVPLAN_IPM_HPP

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "phevplan/common.hpp"

// Primal-dual interior-point method (Mehrotra predictor-corrector) for
//   minimize 1/2 x'Px + q'x  subject to  l <= Ax <= u,
// used to finish problems whose optimal face leaves first-order methods
// crawling. Returns a high-accuracy primal-dual pair or nothing.

namespace phevplan::ipm {

using SpMat = Eigen::SparseMatrix<double>;

struct Point {
    Eigen::VectorXd x;
    Eigen::VectorXd y;  // row multipliers, z_u - z_l
};

struct Options {
    int max_iterations = 60;
    double tol = 1e-10;
    double divergence_bail = 1e4;  // stop once residuals blow past the best by this factor
};

inline std::optional<Point> solve(const SpMat& p, const Eigen::VectorXd& q, const SpMat& a,
                                  const Eigen::VectorXd& lo, const Eigen::VectorXd& up,
                                  Options opt = {}) {
    const int n = static_cast<int>(p.rows());
    const int m = static_cast<int>(a.rows());

    enum class RowKind : unsigned char { eq, lower_only, upper_only, boxed };
    std::vector<RowKind> kind(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const bool lf = std::isfinite(lo(i)), uf = std::isfinite(up(i));
        if (lf && uf && up(i) - lo(i) < 1e-14) kind[static_cast<std::size_t>(i)] = RowKind::eq;
        else if (lf && uf) kind[static_cast<std::size_t>(i)] = RowKind::boxed;
        else if (lf) kind[static_cast<std::size_t>(i)] = RowKind::lower_only;
        else if (uf) kind[static_cast<std::size_t>(i)] = RowKind::upper_only;
        else return std::nullopt;  // free rows should not be generated
    }

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd s(m), zl = Eigen::VectorXd::Zero(m), zu = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) {
        const auto is = static_cast<std::size_t>(i);
        switch (kind[is]) {
            case RowKind::eq: s(i) = lo(i); break;
            case RowKind::boxed: {
                const double margin = std::min(1.0, 0.25 * (up(i) - lo(i)));
                s(i) = std::min(std::max(0.0, lo(i) + margin), up(i) - margin);
                zl(i) = 1.0;
                zu(i) = 1.0;
                break;
            }
            case RowKind::lower_only:
                s(i) = std::max(0.0, lo(i)) + 1.0;
                zl(i) = 1.0;
                break;
            case RowKind::upper_only:
                s(i) = std::min(0.0, up(i)) - 1.0;
                zu(i) = 1.0;
                break;
        }
    }
    Eigen::VectorXd y = zu - zl;

    const double delta = 1e-10;
    Eigen::SparseLU<SpMat> lu;
    bool analyzed = false;

    std::optional<Point> best;
    double best_score = kInf;

    auto comp_count = [&] {
        int c = 0;
        for (int i = 0; i < m; ++i) {
            const auto is = static_cast<std::size_t>(i);
            if (kind[is] == RowKind::boxed) c += 2;
            else if (kind[is] != RowKind::eq) c += 1;
        }
        return std::max(c, 1);
    };
    const int n_comp = comp_count();

    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        Eigen::VectorXd dl(m), du(m);  // slack distances to the bounds
        for (int i = 0; i < m; ++i) {
            dl(i) = std::isfinite(lo(i)) ? s(i) - lo(i) : kInf;
            du(i) = std::isfinite(up(i)) ? up(i) - s(i) : kInf;
        }

        Eigen::VectorXd r_d = p * x + q + a.transpose() * y;
        Eigen::VectorXd r_p = a * x - s;
        double mu = 0.0;
        for (int i = 0; i < m; ++i) {
            if (kind[static_cast<std::size_t>(i)] == RowKind::eq) continue;
            if (std::isfinite(lo(i))) mu += dl(i) * zl(i);
            if (std::isfinite(up(i))) mu += du(i) * zu(i);
        }
        mu /= n_comp;

        const double scale = std::max({1.0, q.lpNorm<Eigen::Infinity>(), x.lpNorm<Eigen::Infinity>()});
        const double score = std::max({r_p.lpNorm<Eigen::Infinity>(), r_d.lpNorm<Eigen::Infinity>(), mu});
#ifdef IPM_DEBUG
        std::fprintf(stderr, "ipm iter=%d rp=%.3e rd=%.3e mu=%.3e\n", iter,
                     r_p.lpNorm<Eigen::Infinity>(), r_d.lpNorm<Eigen::Infinity>(), mu);
#endif
        if (score < best_score) {
            best_score = score;
            best = Point{x, y};
        }
        if (r_p.lpNorm<Eigen::Infinity>() <= opt.tol * scale &&
            r_d.lpNorm<Eigen::Infinity>() <= opt.tol * scale && mu <= opt.tol * scale)
            return Point{x, y};
        if (score > opt.divergence_bail * std::max(best_score, 1e-12)) return best;

        // condensed KKT: [P+dI  A'; A  -(1/theta)-dI]
        Eigen::VectorXd theta_inv(m), g(m);
        for (int i = 0; i < m; ++i) {
            const auto is = static_cast<std::size_t>(i);
            if (kind[is] == RowKind::eq) {
                theta_inv(i) = 0.0;
                g(i) = 0.0;
                continue;
            }
            double th = 0.0;
            if (std::isfinite(lo(i))) th += zl(i) / std::max(dl(i), 1e-14);
            if (std::isfinite(up(i))) th += zu(i) / std::max(du(i), 1e-14);
            th = std::min(std::max(th, 1e-12), 1e14);
            theta_inv(i) = 1.0 / th;
            g(i) = zl(i) - zu(i);  // affine complementarity contribution
        }

        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(p.nonZeros() + 2 * a.nonZeros() + n + m));
        for (int k = 0; k < p.outerSize(); ++k)
            for (SpMat::InnerIterator it(p, k); it; ++it)
                trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        for (int k = 0; k < a.outerSize(); ++k)
            for (SpMat::InnerIterator it(a, k); it; ++it) {
                trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
                trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()), it.value());
            }
        for (int i = 0; i < m; ++i)
            if (theta_inv(i) != 0.0) trips.emplace_back(n + i, n + i, -theta_inv(i));
        SpMat kkt_true(n + m, n + m);
        kkt_true.setFromTriplets(trips.begin(), trips.end());
        // regularized copy for the factorization; refinement below targets
        // the true system so the shift does not distort the step
        for (int i = 0; i < n; ++i) trips.emplace_back(i, i, delta);
        for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -delta);
        SpMat kkt(n + m, n + m);
        kkt.setFromTriplets(trips.begin(), trips.end());
        if (!analyzed) {
            lu.analyzePattern(kkt);
            analyzed = true;
        }
        lu.factorize(kkt);
        if (lu.info() != Eigen::Success) return std::nullopt;

        auto solve_dir = [&](const Eigen::VectorXd& comp_l, const Eigen::VectorXd& comp_u) {
            // g_full combines the complementarity targets into the s-relation
            Eigen::VectorXd g_full = g;
            for (int i = 0; i < m; ++i) {
                const auto is = static_cast<std::size_t>(i);
                if (kind[is] == RowKind::eq) continue;
                if (std::isfinite(up(i))) g_full(i) += comp_u(i) / std::max(du(i), 1e-14);
                if (std::isfinite(lo(i))) g_full(i) -= comp_l(i) / std::max(dl(i), 1e-14);
            }
            Eigen::VectorXd rhs(n + m);
            rhs.head(n) = -r_d;
            for (int i = 0; i < m; ++i) rhs(n + i) = -r_p(i) - theta_inv(i) * g_full(i);
            Eigen::VectorXd sol = lu.solve(rhs);
            for (int refine = 0; refine < 3; ++refine) sol += lu.solve(rhs - kkt_true * sol);

            struct Dir {
                Eigen::VectorXd dx, dy, ds, dzl, dzu;
            } d;
            d.dx = sol.head(n);
            d.dy = sol.tail(m);
            d.ds = a * d.dx + r_p;
            for (int i = 0; i < m; ++i)
                if (kind[static_cast<std::size_t>(i)] == RowKind::eq) d.ds(i) = 0.0;
            d.dzl.resize(m);
            d.dzu.resize(m);
            for (int i = 0; i < m; ++i) {
                const auto is = static_cast<std::size_t>(i);
                if (kind[is] == RowKind::eq) {
                    d.dzl(i) = d.dzu(i) = 0.0;
                    continue;
                }
                d.dzl(i) = std::isfinite(lo(i))
                               ? (comp_l(i) - zl(i) * d.ds(i)) / std::max(dl(i), 1e-14) - zl(i)
                               : 0.0;
                d.dzu(i) = std::isfinite(up(i))
                               ? (comp_u(i) + zu(i) * d.ds(i)) / std::max(du(i), 1e-14) - zu(i)
                               : 0.0;
            }
            return d;
        };

        auto step_limits = [&](const auto& d) {
            double ap = 1.0, ad = 1.0;
            for (int i = 0; i < m; ++i) {
                const auto is = static_cast<std::size_t>(i);
                if (kind[is] == RowKind::eq) continue;
                if (std::isfinite(lo(i))) {
                    if (d.ds(i) < 0.0) ap = std::min(ap, -dl(i) / d.ds(i));
                    if (d.dzl(i) < 0.0) ad = std::min(ad, -zl(i) / d.dzl(i));
                }
                if (std::isfinite(up(i))) {
                    if (d.ds(i) > 0.0) ap = std::min(ap, du(i) / d.ds(i));
                    if (d.dzu(i) < 0.0) ad = std::min(ad, -zu(i) / d.dzu(i));
                }
            }
            return std::make_pair(ap, ad);
        };

        const Eigen::VectorXd zero_comp = Eigen::VectorXd::Zero(m);
        auto aff = solve_dir(zero_comp, zero_comp);
        auto [ap_aff, ad_aff] = step_limits(aff);

        // Mehrotra centering parameter
        double mu_aff = 0.0;
        for (int i = 0; i < m; ++i) {
            const auto is = static_cast<std::size_t>(i);
            if (kind[is] == RowKind::eq) continue;
            if (std::isfinite(lo(i)))
                mu_aff += (dl(i) + ap_aff * aff.ds(i)) * (zl(i) + ad_aff * aff.dzl(i));
            if (std::isfinite(up(i)))
                mu_aff += (du(i) - ap_aff * aff.ds(i)) * (zu(i) + ad_aff * aff.dzu(i));
        }
        mu_aff = std::max(mu_aff / n_comp, 0.0);
        const double sigma = std::pow(std::min(mu_aff / std::max(mu, 1e-300), 1.0), 3.0);

        Eigen::VectorXd comp_l(m), comp_u(m);
        for (int i = 0; i < m; ++i) {
            comp_l(i) = sigma * mu - aff.ds(i) * aff.dzl(i);
            comp_u(i) = sigma * mu + aff.ds(i) * aff.dzu(i);
        }
        auto dir = solve_dir(comp_l, comp_u);
        auto [ap, ad] = step_limits(dir);
        const double tau = 0.995;
        const double sp = std::min(1.0, tau * ap);
        const double sd = std::min(1.0, tau * ad);

        x += sp * dir.dx;
        s += sp * dir.ds;
        for (int i = 0; i < m; ++i) {
            if (kind[static_cast<std::size_t>(i)] == RowKind::eq) continue;
            if (std::isfinite(lo(i))) zl(i) = std::max(zl(i) + sd * dir.dzl(i), 1e-16);
            if (std::isfinite(up(i))) zu(i) = std::max(zu(i) + sd * dir.dzu(i), 1e-16);
        }
        // equality-row multipliers move with the full dual step
        for (int i = 0; i < m; ++i) {
            if (kind[static_cast<std::size_t>(i)] == RowKind::eq) y(i) += sd * dir.dy(i);
        }
        for (int i = 0; i < m; ++i) {
            if (kind[static_cast<std::size_t>(i)] != RowKind::eq) y(i) = zu(i) - zl(i);
        }
    }
    return best;
}

}  // namespace phevplan::ipm

#endif  // PHEVPLAN_IPM_HPP
