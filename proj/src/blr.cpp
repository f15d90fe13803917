#include "ablr/blr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "ablr/errors.hpp"

namespace ablr {

namespace {

void check_hyperparams(const BlrHyperparams& hp) {
    if (!(hp.alpha > 0.0) || !std::isfinite(hp.alpha) || !(hp.beta > 0.0) || !std::isfinite(hp.beta))
        throw ValidationError("alpha and beta must be strictly positive and finite");
}

// Lower Cholesky factor of K, with diagonal jitter escalating from
// 1e-10*tr(K)/M by factors of 10 up to 1e-4*tr(K)/M.
Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& k) {
    const Eigen::Index m = k.rows();
    const double scale = k.trace() / static_cast<double>(m);
    double jitter = 0.0;
    for (;;) {
        Eigen::MatrixXd trial = k;
        if (jitter > 0.0) trial.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(trial);
        if (llt.info() == Eigen::Success) return llt.matrixL();
        if (jitter == 0.0) {
            jitter = 1e-10 * scale;
        } else {
            jitter *= 10.0;
            if (jitter > 1e-4 * scale)
                throw CholeskyFailure("Cholesky failed after jitter escalation (degenerate basis)");
        }
    }
}

struct FitCore {
    Eigen::MatrixXd chol;     // L
    Eigen::VectorXd m;
    Eigen::VectorXd phi_t_y;
};

FitCore fit_core(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, const BlrHyperparams& hp) {
    if (phi.rows() != y.size())
        throw DimensionMismatch("Phi has " + std::to_string(phi.rows()) + " rows but y has " +
                                std::to_string(y.size()));
    if (!phi.allFinite() || !y.allFinite()) throw ValidationError("Phi and y must be finite");
    const Eigen::Index m_dim = phi.cols();
    Eigen::MatrixXd k = hp.beta * (phi.transpose() * phi);
    k.diagonal().array() += hp.alpha;
    FitCore core;
    core.chol = robust_cholesky(k);
    core.phi_t_y = phi.transpose() * y;
    Eigen::VectorXd tmp = core.chol.triangularView<Eigen::Lower>().solve(hp.beta * core.phi_t_y);
    core.m = core.chol.transpose().triangularView<Eigen::Upper>().solve(tmp);
    if (m_dim == 0) core.m.resize(0);
    return core;
}

double log_det_from_chol(const Eigen::MatrixXd& chol) {
    return 2.0 * chol.diagonal().array().log().sum();
}

}  // namespace

BlrPosterior fit(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, const BlrHyperparams& hp) {
    check_hyperparams(hp);
    FitCore core = fit_core(phi, y, hp);
    BlrPosterior post;
    post.m = std::move(core.m);
    post.k_chol = std::move(core.chol);
    post.phi_t_y = std::move(core.phi_t_y);
    post.hp = hp;
    post.q = phi.rows();
    return post;
}

BlrPrediction predict(const BlrPosterior& post, const Eigen::VectorXd& phi_star) {
    if (phi_star.size() != post.basis_dim())
        throw DimensionMismatch("phi* has size " + std::to_string(phi_star.size()) +
                                ", posterior basis dim is " + std::to_string(post.basis_dim()));
    BlrPrediction pred;
    pred.mu = post.m.dot(phi_star);
    const Eigen::VectorXd half = post.k_chol.triangularView<Eigen::Lower>().solve(phi_star);
    pred.sigma2 = half.squaredNorm();
    if (post.include_noise) pred.sigma2 += 1.0 / post.hp.beta;
    return pred;
}

double log_marginal_likelihood(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                               const BlrHyperparams& hp) {
    check_hyperparams(hp);
    const FitCore core = fit_core(phi, y, hp);
    const double m_dim = static_cast<double>(phi.cols());
    const double q = static_cast<double>(phi.rows());
    const double residual = (y - phi * core.m).squaredNorm();
    return 0.5 * m_dim * std::log(hp.alpha) + 0.5 * q * std::log(hp.beta) -
           0.5 * q * std::log(2.0 * M_PI) - 0.5 * hp.beta * residual -
           0.5 * hp.alpha * core.m.squaredNorm() - 0.5 * log_det_from_chol(core.chol);
}

Eigen::Vector2d log_marginal_likelihood_grad(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                                             const BlrHyperparams& hp) {
    check_hyperparams(hp);
    const FitCore core = fit_core(phi, y, hp);
    const Eigen::Index m_dim = phi.cols();
    const double q = static_cast<double>(phi.rows());

    // tr(K^{-1}) = ||L^{-1}||_F^2
    const Eigen::MatrixXd l_inv = core.chol.triangularView<Eigen::Lower>().solve(
        Eigen::MatrixXd::Identity(m_dim, m_dim));
    const double trace_k_inv = l_inv.squaredNorm();

    const double residual = (y - phi * core.m).squaredNorm();
    const double m_sq = core.m.squaredNorm();

    // d/d(log a) = M/2 - (a/2)m^T m - (a/2)tr(K^{-1})
    // d/d(log b) = Q/2 - (b/2)||y-Phi m||^2 - (M - a tr(K^{-1}))/2,
    // using tr(K^{-1} Phi^T Phi) = (M - a tr(K^{-1}))/b. The dependence of m
    // on (a,b) contributes nothing: m minimizes the penalized quadratic.
    Eigen::Vector2d g;
    g(0) = 0.5 * static_cast<double>(m_dim) - 0.5 * hp.alpha * m_sq - 0.5 * hp.alpha * trace_k_inv;
    g(1) = 0.5 * q - 0.5 * hp.beta * residual -
           0.5 * (static_cast<double>(m_dim) - hp.alpha * trace_k_inv);
    return g;
}

namespace {

constexpr double kLogBoxLo = -10.0;
constexpr double kLogBoxHi = 10.0;

Eigen::Vector2d clamp_box(Eigen::Vector2d x) {
    x(0) = std::clamp(x(0), kLogBoxLo, kLogBoxHi);
    x(1) = std::clamp(x(1), kLogBoxLo, kLogBoxHi);
    return x;
}

BlrHyperparams from_log(const Eigen::Vector2d& x) {
    return BlrHyperparams{std::exp(x(0)), std::exp(x(1))};
}

// 21x21 log-grid over the box, init included as a candidate.
BlrHyperparams grid_search(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                           const Eigen::Vector2d& init) {
    Eigen::Vector2d best = init;
    double best_val = -std::numeric_limits<double>::infinity();
    try {
        best_val = log_marginal_likelihood(phi, y, from_log(init));
    } catch (const Error&) {
    }
    for (int i = 0; i <= 20; ++i) {
        for (int j = 0; j <= 20; ++j) {
            Eigen::Vector2d x(kLogBoxLo + i, kLogBoxLo + j);
            try {
                const double val = log_marginal_likelihood(phi, y, from_log(x));
                if (std::isfinite(val) && val > best_val) {
                    best_val = val;
                    best = x;
                }
            } catch (const Error&) {
            }
        }
    }
    if (!std::isfinite(best_val))
        throw CholeskyFailure("log-marginal likelihood not computable anywhere on the grid");
    return from_log(best);
}

}  // namespace

BlrHyperparams optimize_hyperparams(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                                    const BlrHyperparams& init) {
    check_hyperparams(init);
    if (phi.rows() < 1) throw ValidationError("optimize_hyperparams requires at least one observation");

    Eigen::Vector2d x = clamp_box(Eigen::Vector2d(std::log(init.alpha), std::log(init.beta)));
    try {
        double f = log_marginal_likelihood(phi, y, from_log(x));
        if (!std::isfinite(f)) return grid_search(phi, y, x);
        Eigen::Vector2d g = log_marginal_likelihood_grad(phi, y, from_log(x));
        double step = 0.5;
        for (int iter = 0; iter < 500; ++iter) {
            if (!g.allFinite()) return grid_search(phi, y, x);
            const Eigen::Vector2d cand = clamp_box(x + step * g);
            if ((cand - x).norm() < 1e-10) break;
            double fc = -std::numeric_limits<double>::infinity();
            try {
                fc = log_marginal_likelihood(phi, y, from_log(cand));
            } catch (const CholeskyFailure&) {
            }
            if (std::isfinite(fc) && fc > f) {
                x = cand;
                f = fc;
                g = log_marginal_likelihood_grad(phi, y, from_log(x));
                step = std::min(step * 1.5, 5.0);
            } else {
                step *= 0.5;
                if (step < 1e-9) break;
            }
        }
    } catch (const CholeskyFailure&) {
        return grid_search(phi, y, x);
    }
    return from_log(x);
}

BlrPosterior append_observation(const BlrPosterior& post, const Eigen::VectorXd& phi, double y) {
    if (phi.size() != post.basis_dim())
        throw DimensionMismatch("phi has size " + std::to_string(phi.size()) +
                                ", posterior basis dim is " + std::to_string(post.basis_dim()));
    if (!phi.allFinite() || !std::isfinite(y)) throw ValidationError("observation must be finite");

    BlrPosterior out = post;
    const Eigen::Index m_dim = post.basis_dim();

    // Rank-1 update of L with v = sqrt(beta)*phi (LINPACK-style).
    Eigen::VectorXd work = std::sqrt(post.hp.beta) * phi;
    for (Eigen::Index k = 0; k < m_dim; ++k) {
        const double lkk = out.k_chol(k, k);
        const double r = std::hypot(lkk, work(k));
        if (!(r > 0.0) || !std::isfinite(r)) throw CholeskyFailure("rank-1 update produced a bad pivot");
        const double c = r / lkk;
        const double s = work(k) / lkk;
        out.k_chol(k, k) = r;
        for (Eigen::Index i = k + 1; i < m_dim; ++i) {
            out.k_chol(i, k) = (out.k_chol(i, k) + s * work(i)) / c;
            work(i) = c * work(i) - s * out.k_chol(i, k);
        }
    }

    out.phi_t_y = post.phi_t_y + phi * y;
    const Eigen::VectorXd tmp =
        out.k_chol.triangularView<Eigen::Lower>().solve(post.hp.beta * out.phi_t_y);
    out.m = out.k_chol.transpose().triangularView<Eigen::Upper>().solve(tmp);
    out.q = post.q + 1;
    return out;
}

}  // namespace ablr
