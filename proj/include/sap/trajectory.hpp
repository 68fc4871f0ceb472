#pragma once

#include <string>

#include "sap/errors.hpp"

namespace sap::traj {

// Positions of the three well minima; d_L < d_M < d_R always.
struct TrapLayout {
    double d_L;
    double d_M;
    double d_R;
};

// Counterintuitive SAP schedule: the right trap approaches the (fixed) middle
// trap first, the left trap follows after `delay`. Each approach-and-retreat is
// a raised-cosine pulse in separation with zero slope at start, closest
// approach and end.
struct TrajectoryParams {
    double T = 4000.0;
    double d_max = 9.0;
    double d_min = 3.0;
    double delay = 400.0;   // default T/10
    std::string ramp = "raised-cosine";

    static TrajectoryParams with_total_time(double T_total) {
        TrajectoryParams p;
        p.T = T_total;
        p.delay = T_total / 10.0;
        return p;
    }

    void validate() const {
        if (!(d_min > 0.0 && d_min < d_max)) throw config_error("trajectory: need 0 < d_min < d_max");
        if (!(T > 0.0)) throw config_error("trajectory: need T > 0");
        if (!(delay > 0.0 && delay < T / 2.0)) throw config_error("trajectory: need 0 < delay < T/2");
        if (ramp != "raised-cosine") throw config_error("trajectory: unknown ramp '" + ramp + "'");
    }
};

// separation of the right trap from the middle at time t
double separation_right(double t, const TrajectoryParams& p);
// separation of the left trap from the middle at time t
double separation_left(double t, const TrajectoryParams& p);

// layout at time t; throws on t outside [0, T]
TrapLayout positions_at(double t, const TrajectoryParams& p);

// piecewise harmonic triple well: min_j (x - d_j)^2 / 2
double potential(double x, const TrapLayout& layout);

}  // namespace sap::traj
