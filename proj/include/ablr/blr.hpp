#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace ablr {

// alpha: prior precision on the regression weights; beta: observation noise
// precision. K = beta*Phi^T*Phi + alpha*I, m = beta*K^{-1}*Phi^T*y.
struct BlrHyperparams {
    double alpha = 1.0;
    double beta = 1.0;
};

struct BlrPrediction {
    double mu = 0.0;
    double sigma2 = 0.0;
};

// Fitted head. Immutable; append_observation returns a new posterior.
struct BlrPosterior {
    Eigen::VectorXd m;        // posterior mean weights
    Eigen::MatrixXd k_chol;   // lower-triangular L with L*L^T = K
    Eigen::VectorXd phi_t_y;  // Phi^T y, kept so observations can be appended
    BlrHyperparams hp;
    std::int64_t q = 0;       // number of fitted observations
    bool include_noise = false;

    Eigen::Index basis_dim() const { return m.size(); }
};

// Closed-form posterior. Q=0 (zero-row Phi) yields the prior: m=0, K=alpha*I.
// Throws CholeskyFailure after jitter escalation.
BlrPosterior fit(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, const BlrHyperparams& hp);

// mu = m^T phi*, sigma2 = phi*^T K^{-1} phi* (epistemic only); the posterior's
// include_noise flag adds 1/beta.
BlrPrediction predict(const BlrPosterior& post, const Eigen::VectorXd& phi_star);

double log_marginal_likelihood(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                               const BlrHyperparams& hp);

// d LML / d (log alpha, log beta), analytic.
Eigen::Vector2d log_marginal_likelihood_grad(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                                             const BlrHyperparams& hp);

// Maximizes the log-marginal likelihood over (log alpha, log beta) in the box
// [-10,10]^2 by projected gradient ascent with backtracking; only improving
// steps are accepted, so the returned LML is >= the LML at init. Falls back
// to a 21x21 log-grid search if the ascent hits a numerical failure.
BlrHyperparams optimize_hyperparams(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                                    const BlrHyperparams& init);

// Posterior after one more observation (rank-1 Cholesky update); equals a
// full refit on the augmented design matrix.
BlrPosterior append_observation(const BlrPosterior& post, const Eigen::VectorXd& phi, double y);

}  // namespace ablr
