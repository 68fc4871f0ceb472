#include "sap/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace sap::traj {

namespace {

// raised-cosine approach-and-retreat: d_max at the window edges, d_min at the
// window center, zero slope at all three
double pulse(double t, double t0, double tau, const TrajectoryParams& p) {
    if (t <= t0 || t >= t0 + tau) return p.d_max;
    const double s = std::sin(M_PI * (t - t0) / tau);
    return p.d_max - (p.d_max - p.d_min) * s * s;
}

}  // namespace

double separation_right(double t, const TrajectoryParams& p) {
    return pulse(t, 0.0, p.T - p.delay, p);
}

double separation_left(double t, const TrajectoryParams& p) {
    return pulse(t, p.delay, p.T - p.delay, p);
}

TrapLayout positions_at(double t, const TrajectoryParams& p) {
    p.validate();
    if (t < 0.0 || t > p.T) throw config_error("positions_at: t outside [0, T]");
    return TrapLayout{-separation_left(t, p), 0.0, separation_right(t, p)};
}

double potential(double x, const TrapLayout& layout) {
    const double a = x - layout.d_L;
    const double b = x - layout.d_M;
    const double c = x - layout.d_R;
    return 0.5 * std::min({a * a, b * b, c * c});
}

}  // namespace sap::traj
