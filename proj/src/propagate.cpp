#include "sap/propagate.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "sap/errors.hpp"

namespace sap::exact {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

CrankNicolson::CrankNicolson(const Grid2D& grid, double g, double dt, double tol, int max_iter)
    : grid_(grid), g_(g), dt_(dt), tol_(tol), max_iter_(max_iter) {
    grid_.validate();
    if (!(dt > 0.0)) throw config_error("time step must be positive");
    const std::size_t m = grid_.tri_size();
    phi_.resize(m);
    phi2_.resize(m);
    r_.resize(m);
    z_.resize(m);
    p_.resize(m);
    q_.resize(m);
    x_.resize(m);
    pinv_.resize(m);
}

void CrankNicolson::reset_history() { have_prev_ = have_prev2_ = false; }

int CrankNicolson::step(const std::vector<double>& v_mid, std::vector<cplx>& psi) {
    const std::size_t m = psi.size();
    TriHamiltonian H(grid_, v_mid, g_);
    const double alpha = 0.5 * dt_;
    const cplx ia(0.0, alpha);

    // A x = psi with A = 1 + i alpha H; apply fused as x + i alpha (H x)
    const auto apply_A = [&](const std::vector<cplx>& in, std::vector<cplx>& out) {
        H.apply(in.data(), out.data());
        for (std::size_t r = 0; r < m; ++r) out[r] = in[r] + ia * out[r];
    };

    // warm start from extrapolated previous solutions
    if (have_prev2_) {
        for (std::size_t r = 0; r < m; ++r) x_[r] = 2.0 * phi_[r] - phi2_[r];
    } else if (have_prev_) {
        x_ = phi_;
    } else {
        x_ = psi;
    }

    double b2 = 0.0;
    for (std::size_t r = 0; r < m; ++r) b2 += std::norm(psi[r]);
    const double btol2 = tol_ * tol_ * b2;

    apply_A(x_, q_);
    double r2 = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        r_[r] = psi[r] - q_[r];
        r2 += std::norm(r_[r]);
    }

    // Jacobi preconditioner 1/(1 + i alpha diag H), tabulated once per step
    {
        const int n = grid_.n;
        std::size_t r = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) pinv_[r++] = 1.0 / (1.0 + ia * H.diag(i, j));
    }

    int it = 0;
    if (r2 > btol2) {
        cplx rho(0.0);
        for (std::size_t r = 0; r < m; ++r) {
            z_[r] = pinv_[r] * r_[r];
            p_[r] = z_[r];
            rho += r_[r] * z_[r];
        }
        for (it = 1; it <= max_iter_; ++it) {
            H.apply(p_.data(), q_.data());
            cplx mu(0.0);
            for (std::size_t r = 0; r < m; ++r) {
                const cplx qq = p_[r] + ia * q_[r];
                q_[r] = qq;
                mu += p_[r] * qq;
            }
            if (std::abs(mu) < 1e-290) throw numerical_error("conjugate-orthogonal CG breakdown");
            const cplx a = rho / mu;
            r2 = 0.0;
            cplx rho_next(0.0);
            for (std::size_t r = 0; r < m; ++r) {
                x_[r] += a * p_[r];
                const cplx rr = r_[r] - a * q_[r];
                r_[r] = rr;
                r2 += std::norm(rr);
                const cplx zz = pinv_[r] * rr;
                z_[r] = zz;
                rho_next += rr * zz;
            }
            if (r2 <= btol2) break;
            const cplx beta = rho_next / rho;
            rho = rho_next;
            for (std::size_t r = 0; r < m; ++r) p_[r] = z_[r] + beta * p_[r];
        }
        if (r2 > btol2) {
            std::ostringstream os;
            os << "implicit solve stalled at relative residual "
               << std::sqrt(r2 / b2) << " after " << max_iter_ << " iterations";
            throw numerical_error(os.str());
        }
    }

    phi2_.swap(phi_);
    phi_ = x_;
    have_prev2_ = have_prev_;
    have_prev_ = true;

    for (std::size_t r = 0; r < m; ++r) psi[r] = 2.0 * x_[r] - psi[r];
    return it;
}

SplitStep::SplitStep(const Grid2D& grid, double g, double dt) : grid_(grid), g_(g), dt_(dt) {
    grid_.validate();
    if (!(dt > 0.0)) throw config_error("time step must be positive");
    const double h = grid_.h();
    const double dt_alias = 2.0 * h * h / std::numbers::pi;
    if (g != 0.0 && dt > 0.9 * dt_alias) {
        std::ostringstream os;
        os << "split-step dt=" << dt << " aliases the contact term at h=" << h
           << " (limit " << 0.9 * dt_alias << "); reduce dt or use the implicit scheme";
        throw numerical_error(os.str());
    }

    const int n = grid_.n;
    kin_phase_.resize(grid_.full_size());
    // periodic wavenumbers over the n-point box of length (x_max - x_min) + h
    const double L = (grid_.x_max - grid_.x_min) + h;
    std::vector<double> k2(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int f = i <= n / 2 ? i : i - n;
        const double k = 2.0 * std::numbers::pi * f / L;
        k2[static_cast<std::size_t>(i)] = k * k;
    }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            kin_phase_[grid_.full_index(a, b)] =
                -0.5 * dt * (k2[static_cast<std::size_t>(a)] + k2[static_cast<std::size_t>(b)]);

    buf_ = fftw_alloc_complex(grid_.full_size());
    // FFTW's planner mutates global state; executing plans is thread-safe
    const std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
}

SplitStep::~SplitStep() {
    const std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
}

void SplitStep::step(const std::vector<double>& v_mid, std::vector<cplx>& psi) {
    const int n = grid_.n;
    const std::size_t m = grid_.full_size();
    const double gh = g_ / grid_.h();
    const double half = 0.5 * dt_;
    const double inv_m = 1.0 / static_cast<double>(m);

    auto* b = reinterpret_cast<cplx*>(buf_);
    for (int a = 0; a < n; ++a) {
        for (int c = 0; c < n; ++c) {
            const double v = v_mid[static_cast<std::size_t>(a)] + v_mid[static_cast<std::size_t>(c)] +
                             (a == c ? gh : 0.0);
            b[grid_.full_index(a, c)] = psi[grid_.full_index(a, c)] * std::polar(1.0, -half * v);
        }
    }
    fftw_execute(fwd_);
    for (std::size_t r = 0; r < m; ++r) b[r] *= std::polar(inv_m, kin_phase_[r]);
    fftw_execute(bwd_);
    for (int a = 0; a < n; ++a) {
        for (int c = 0; c < n; ++c) {
            const double v = v_mid[static_cast<std::size_t>(a)] + v_mid[static_cast<std::size_t>(c)] +
                             (a == c ? gh : 0.0);
            psi[grid_.full_index(a, c)] = b[grid_.full_index(a, c)] * std::polar(1.0, -half * v);
        }
    }
}

}  // namespace sap::exact
