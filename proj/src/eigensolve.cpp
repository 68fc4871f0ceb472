#include "sap/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "sap/errors.hpp"

namespace sap::exact {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void apply_block(const TriHamiltonian& H, const MatrixXd& X, MatrixXd& Y) {
    Y.resize(X.rows(), X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) H.apply(X.col(c).data(), Y.col(c).data());
}

MatrixXd thin_q(MatrixXd X) {
    Eigen::HouseholderQR<MatrixXd> qr(std::move(X));
    MatrixXd q = MatrixXd::Identity(qr.matrixQR().rows(), qr.matrixQR().cols());
    q.applyOnTheLeft(qr.householderQ());
    return q;
}

// crude extremal Ritz values from a short Lanczos probe
std::pair<double, double> lanczos_probe(const TriHamiltonian& H, std::mt19937& rng, int steps) {
    const auto m = static_cast<Eigen::Index>(H.size());
    std::normal_distribution<double> nd;
    VectorXd v(m), w(m), v_prev = VectorXd::Zero(m);
    for (Eigen::Index r = 0; r < m; ++r) v[r] = nd(rng);
    v.normalize();
    std::vector<double> a, b;
    double beta = 0.0;
    for (int s = 0; s < steps; ++s) {
        H.apply(v.data(), w.data());
        const double alpha = v.dot(w);
        a.push_back(alpha);
        w -= alpha * v;
        if (s > 0) w -= beta * v_prev;
        beta = w.norm();
        b.push_back(beta);
        if (beta < 1e-12) break;
        v_prev = v;
        v = w / beta;
    }
    const auto k = static_cast<Eigen::Index>(a.size());
    MatrixXd T = MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        T(i, i) = a[static_cast<std::size_t>(i)];
        if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = b[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(T, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

// scaled Chebyshev filter damping [a, b], amplifying below a
void chebyshev_filter(const TriHamiltonian& H, MatrixXd& X, int degree, double a, double b,
                      double lambda0) {
    const double e = (b - a) / 2.0, c = (b + a) / 2.0;
    const double sigma1 = e / (c - lambda0);
    double sigma = sigma1;
    MatrixXd Y, Ynew;
    apply_block(H, X, Y);
    Y = (Y - c * X) * (sigma1 / e);
    for (int deg = 2; deg <= degree; ++deg) {
        const double sigma_new = 1.0 / (2.0 / sigma1 - sigma);
        apply_block(H, Y, Ynew);
        Ynew = (Ynew - c * Y) * (2.0 * sigma_new / e) - (sigma * sigma_new) * X;
        X.swap(Y);
        Y.swap(Ynew);
        sigma = sigma_new;
    }
    X.swap(Y);
}

}  // namespace

EigenResult lowest_eigenpairs(const TriHamiltonian& H, const EigenOptions& opt,
                              const std::vector<std::vector<double>>* warm) {
    if (opt.k < 1 || opt.block < opt.k) throw config_error("eigensolver block smaller than k");
    const auto m = static_cast<Eigen::Index>(H.size());
    const int s = std::min<int>(opt.block, static_cast<int>(m));
    if (s < opt.k) throw config_error("grid too small for requested eigenpair count");

    std::mt19937 rng(opt.seed);
    std::normal_distribution<double> nd;

    MatrixXd X(m, s);
    int filled = 0;
    if (warm) {
        for (const auto& v : *warm) {
            if (filled >= s || static_cast<Eigen::Index>(v.size()) != m) break;
            for (Eigen::Index r = 0; r < m; ++r) X(r, filled) = v[static_cast<std::size_t>(r)];
            ++filled;
        }
    }
    for (int c = filled; c < s; ++c)
        for (Eigen::Index r = 0; r < m; ++r) X(r, c) = nd(rng);
    X = thin_q(std::move(X));

    const double b = H.upper_bound() + 1e-8;
    auto [probe_lo, probe_hi] = lanczos_probe(H, rng, 40);
    (void)probe_hi;
    double lambda0 = probe_lo - 1.0;  // below the true ground state, for filter scaling

    EigenResult out;
    MatrixXd HX;
    VectorXd theta;
    double filter_lo = 0.0;
    bool have_interval = false;

    for (int cycle = 1; cycle <= opt.max_cycles; ++cycle) {
        if (have_interval) {
            chebyshev_filter(H, X, opt.cheb_degree, filter_lo, b, lambda0);
            X = thin_q(std::move(X));
        }
        apply_block(H, X, HX);
        MatrixXd S = X.transpose() * HX;
        S = 0.5 * (S + S.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
        theta = es.eigenvalues();
        X = (X * es.eigenvectors()).eval();
        HX = (HX * es.eigenvectors()).eval();

        double worst = 0.0;
        for (int c = 0; c < opt.k; ++c)
            worst = std::max(worst, (HX.col(c) - theta[c] * X.col(c)).norm());
        out.cycles = cycle;
        out.max_residual = worst;
        if (worst < opt.tol) break;

        filter_lo = theta[s - 1];
        lambda0 = std::min(lambda0, theta[0] - 0.1);
        if (!(filter_lo < b)) filter_lo = 0.5 * (lambda0 + b);
        have_interval = true;
    }

    if (out.max_residual >= opt.tol) {
        std::ostringstream os;
        os << "eigensolver stalled at residual " << out.max_residual << " after "
           << out.cycles << " cycles";
        throw numerical_error(os.str());
    }

    out.values.assign(theta.data(), theta.data() + opt.k);
    out.vectors.resize(static_cast<std::size_t>(opt.k));
    for (int c = 0; c < opt.k; ++c) {
        auto& v = out.vectors[static_cast<std::size_t>(c)];
        v.assign(X.col(c).data(), X.col(c).data() + m);
    }
    return out;
}

}  // namespace sap::exact
