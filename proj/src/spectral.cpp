#include "sap/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <utility>

#include "sap/errors.hpp"
#include "sap/spline.hpp"

namespace sap::spectral {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

EigenSlice slice_from_result(double s, const exact::EigenResult& r) {
    EigenSlice out;
    out.s = s;
    const int k = static_cast<int>(r.values.size());
    const auto dim = static_cast<Eigen::Index>(r.vectors.front().size());
    out.values = Eigen::Map<const VectorXd>(r.values.data(), k);
    out.vectors.resize(dim, k);
    for (int c = 0; c < k; ++c)
        out.vectors.col(c) = Eigen::Map<const VectorXd>(r.vectors[static_cast<std::size_t>(c)].data(), dim);
    return out;
}

std::vector<std::vector<double>> warm_block(const EigenSlice& slice) {
    std::vector<std::vector<double>> block(static_cast<std::size_t>(slice.vectors.cols()));
    for (Eigen::Index c = 0; c < slice.vectors.cols(); ++c) {
        block[static_cast<std::size_t>(c)].assign(slice.vectors.col(c).data(),
                                                  slice.vectors.col(c).data() + slice.vectors.rows());
    }
    return block;
}

// non-uniform central difference of track i at interior slice m, dotted on track j
double coupling_at_slice(const SpectralFlow& f, int i, int j, int m) {
    const double hl = f.s[static_cast<std::size_t>(m)] - f.s[static_cast<std::size_t>(m - 1)];
    const double hr = f.s[static_cast<std::size_t>(m + 1)] - f.s[static_cast<std::size_t>(m)];
    const double wl = -hr / (hl * (hl + hr));
    const double wc = (hr - hl) / (hl * hr);
    const double wr = hl / (hr * (hl + hr));
    VectorXd dv = wl * f.vectors[static_cast<std::size_t>(m - 1)].col(i) +
                  wc * f.vectors[static_cast<std::size_t>(m)].col(i) +
                  wr * f.vectors[static_cast<std::size_t>(m + 1)].col(i);
    return f.vectors[static_cast<std::size_t>(m)].col(j).dot(dv);
}

int clamp_interior(int m, int count) { return std::max(1, std::min(m, count - 2)); }

}  // namespace

SliceFn exact_slice_fn(Grid2D grid, traj::TrajectoryParams traj, double g,
                       exact::EigenOptions opt) {
    grid.validate();
    traj.validate();
    return [grid, traj, g, opt](double s, const EigenSlice* warm) {
        const auto layout = traj::positions_at(s * traj.T, traj);
        const exact::TriHamiltonian H(grid, exact::potential_on_axis(grid.axis(), layout), g);
        if (warm != nullptr) {
            const auto block = warm_block(*warm);
            return slice_from_result(s, exact::lowest_eigenpairs(H, opt, &block));
        }
        return slice_from_result(s, exact::lowest_eigenpairs(H, opt));
    };
}

SliceFn hubbard_slice_fn(hubbard::HubbardModel model, traj::TrajectoryParams traj) {
    traj.validate();
    return [model, traj](double s, const EigenSlice*) {
        const MatrixXd H = model.matrix(model.rates_at(s * traj.T, traj));
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
        EigenSlice out;
        out.s = s;
        out.values = es.eigenvalues();
        out.vectors = es.eigenvectors();
        return out;
    };
}

SliceFn landau_zener_slice_fn(double slope, double delta) {
    if (!(slope > 0.0) || !(delta > 0.0))
        throw config_error("two-level model needs positive slope and coupling");
    return [slope, delta](double s, const EigenSlice*) {
        const double x = slope * (s - 0.5);
        Eigen::Matrix2d H;
        H << x, delta, delta, -x;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(H);
        EigenSlice out;
        out.s = s;
        out.values = es.eigenvalues();
        out.vectors = es.eigenvectors();
        return out;
    };
}

std::vector<EigenSlice> solve_slices(const SliceFn& fn, int count) {
    if (count < 2) throw config_error("need at least 2 slices");
    std::vector<EigenSlice> slices;
    slices.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(count - 1);
        const EigenSlice* warm = slices.empty() ? nullptr : &slices.back();
        slices.push_back(fn(s, warm));
    }
    return slices;
}

void insert_slice(std::vector<EigenSlice>& slices, const SliceFn& fn, double s) {
    auto pos = std::lower_bound(slices.begin(), slices.end(), s,
                                [](const EigenSlice& sl, double v) { return sl.s < v; });
    // slices closer than this are one slice; finite differences across a
    // smaller step would only amplify eigensolver noise
    constexpr double kMinSpacing = 1e-7;
    if (pos != slices.end() && std::abs(pos->s - s) < kMinSpacing) return;
    if (pos != slices.begin() && std::abs(std::prev(pos)->s - s) < kMinSpacing) return;
    const EigenSlice* warm = nullptr;
    if (pos != slices.begin() && pos != slices.end())
        warm = (s - std::prev(pos)->s <= pos->s - s) ? &*std::prev(pos) : &*pos;
    else if (pos != slices.begin())
        warm = &*std::prev(pos);
    else if (!slices.empty())
        warm = &slices.front();
    slices.insert(pos, fn(s, warm));
}

int SpectralFlow::nearest_slice(double s_query) const {
    const auto it = std::lower_bound(s.begin(), s.end(), s_query);
    if (it == s.begin()) return 0;
    if (it == s.end()) return static_cast<int>(s.size()) - 1;
    const auto hi = static_cast<int>(it - s.begin());
    return (s_query - s[static_cast<std::size_t>(hi - 1)] <= s[static_cast<std::size_t>(hi)] - s_query)
               ? hi - 1
               : hi;
}

SpectralFlow track_bands(const std::vector<EigenSlice>& slices,
                         const std::vector<double>& band_anchors, double band_tol) {
    if (slices.size() < 2) throw config_error("spectral flow needs at least 2 slices");
    const int k = static_cast<int>(slices.front().values.size());
    const Eigen::Index dim = slices.front().vectors.rows();
    for (const auto& sl : slices) {
        if (static_cast<int>(sl.values.size()) != k || sl.vectors.cols() != k ||
            sl.vectors.rows() != dim)
            throw config_error("inconsistent slice dimensions");
    }

    SpectralFlow flow;
    const int M = static_cast<int>(slices.size());
    flow.s.resize(static_cast<std::size_t>(M));
    flow.energies.resize(k, M);
    flow.vectors.resize(static_cast<std::size_t>(M));

    flow.s[0] = slices[0].s;
    flow.vectors[0] = slices[0].vectors;
    flow.energies.col(0) = slices[0].values;

    for (int m = 1; m < M; ++m) {
        const auto& sl = slices[static_cast<std::size_t>(m)];
        if (!(sl.s > flow.s[static_cast<std::size_t>(m - 1)]))
            throw config_error("slice times must increase");
        flow.s[static_cast<std::size_t>(m)] = sl.s;
        const MatrixXd O = flow.vectors[static_cast<std::size_t>(m - 1)].transpose() * sl.vectors;

        struct Cand {
            double o;
            int track, eig;
        };
        std::vector<Cand> cands;
        cands.reserve(static_cast<std::size_t>(k) * static_cast<std::size_t>(k));
        for (int t = 0; t < k; ++t)
            for (int e = 0; e < k; ++e) cands.push_back({std::abs(O(t, e)), t, e});
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.o > b.o; });

        std::vector<char> track_used(static_cast<std::size_t>(k), 0),
            eig_used(static_cast<std::size_t>(k), 0);
        MatrixXd cols(dim, k);
        int assigned = 0;
        for (const auto& c : cands) {
            if (assigned == k) break;
            if (track_used[static_cast<std::size_t>(c.track)] || eig_used[static_cast<std::size_t>(c.eig)])
                continue;
            track_used[static_cast<std::size_t>(c.track)] = 1;
            eig_used[static_cast<std::size_t>(c.eig)] = 1;
            ++assigned;
            const double sign = O(c.track, c.eig) < 0.0 ? -1.0 : 1.0;
            cols.col(c.track) = sign * sl.vectors.col(c.eig);
            flow.energies(c.track, m) = sl.values[c.eig];
            if (c.o <= 0.5) ++flow.ambiguous_events;
        }
        flow.vectors[static_cast<std::size_t>(m)] = std::move(cols);
    }

    flow.band_of.assign(static_cast<std::size_t>(k), -1);
    if (!band_anchors.empty()) {
        for (int t = 0; t < k; ++t) {
            int best = -1;
            double best_d = band_tol;
            for (std::size_t a = 0; a < band_anchors.size(); ++a) {
                const double d = std::abs(flow.energies(t, 0) - band_anchors[a]);
                if (d <= best_d) {
                    best_d = d;
                    best = static_cast<int>(a);
                }
            }
            flow.band_of[static_cast<std::size_t>(t)] = best;
        }
    }
    return flow;
}

double band_gap(const SpectralFlow& flow, int band_a, int band_b, int slice) {
    double lo_a = 1e300, hi_a = -1e300, lo_b = 1e300, hi_b = -1e300;
    for (int t = 0; t < flow.track_count(); ++t) {
        const double e = flow.energies(t, slice);
        if (flow.band_of[static_cast<std::size_t>(t)] == band_a) {
            lo_a = std::min(lo_a, e);
            hi_a = std::max(hi_a, e);
        } else if (flow.band_of[static_cast<std::size_t>(t)] == band_b) {
            lo_b = std::min(lo_b, e);
            hi_b = std::max(hi_b, e);
        }
    }
    if (hi_a < lo_a || hi_b < lo_b) throw config_error("band without member tracks");
    return std::max(lo_b - hi_a, lo_a - hi_b);
}

FollowedState follow_state(const std::vector<EigenSlice>& slices, const Eigen::VectorXd& anchor,
                           double deg_tol) {
    if (slices.empty()) throw config_error("no slices to follow");
    if (anchor.size() != slices.front().vectors.rows())
        throw config_error("anchor dimension does not match the slices");

    FollowedState out;
    const int M = static_cast<int>(slices.size());
    out.s.resize(static_cast<std::size_t>(M));
    out.energy.resize(static_cast<std::size_t>(M));
    out.states.resize(anchor.size(), M);

    VectorXd prev = anchor.normalized();
    for (int m = 0; m < M; ++m) {
        const auto& sl = slices[static_cast<std::size_t>(m)];
        out.s[static_cast<std::size_t>(m)] = sl.s;
        const int k = static_cast<int>(sl.values.size());
        const VectorXd coeff = sl.vectors.transpose() * prev;

        int best_lo = 0, best_hi = 1;
        double best_w2 = -1.0;
        for (int lo = 0; lo < k;) {
            int hi = lo + 1;
            while (hi < k && sl.values[hi] - sl.values[hi - 1] < deg_tol) ++hi;
            double w2 = 0.0;
            for (int i = lo; i < hi; ++i) w2 += coeff[i] * coeff[i];
            if (w2 > best_w2) {
                best_w2 = w2;
                best_lo = lo;
                best_hi = hi;
            }
            lo = hi;
        }

        VectorXd proj = VectorXd::Zero(anchor.size());
        double e_num = 0.0;
        for (int i = best_lo; i < best_hi; ++i) {
            proj += coeff[i] * sl.vectors.col(i);
            e_num += coeff[i] * coeff[i] * sl.values[i];
        }
        const double w = std::sqrt(best_w2);
        if (!(w > 0.0)) throw numerical_error("followed state lost all weight");
        out.states.col(m) = proj / w;
        out.energy[static_cast<std::size_t>(m)] = e_num / best_w2;
        out.min_overlap = std::min(out.min_overlap, w);
        prev = out.states.col(m);
    }
    return out;
}

int identify_track(const SpectralFlow& flow, const FollowedState& fs) {
    int best_track = -1;
    double best = -1.0;
    for (int m = 0; m < flow.slice_count(); ++m) {
        for (int t = 0; t < flow.track_count(); ++t) {
            const double o =
                std::abs(flow.vectors[static_cast<std::size_t>(m)].col(t).dot(fs.states.col(m)));
            if (o > best) {
                best = o;
                best_track = t;
            }
        }
    }
    return best_track;
}

std::vector<CrossingEvent> detect_crossings(const SpectralFlow& flow, int track,
                                            double gap_threshold) {
    const int M = flow.slice_count();
    const int K = flow.track_count();
    if (track < 0 || track >= K) throw config_error("crossing scan: no such track");
    std::vector<CrossingEvent> events;

    for (int j = 0; j < K; ++j) {
        if (j == track) continue;
        std::vector<double> e(static_cast<std::size_t>(M)), d(static_cast<std::size_t>(M));
        for (int m = 0; m < M; ++m) {
            e[static_cast<std::size_t>(m)] = flow.energies(track, m) - flow.energies(j, m);
            d[static_cast<std::size_t>(m)] = std::abs(e[static_cast<std::size_t>(m)]);
        }

        struct Cand {
            int m;
            double s_c, gap;
        };
        std::vector<Cand> cands;

        // resolved avoided crossings: strict local minima of the gap below the
        // threshold that reopen on both flanks (a rippling degenerate stretch
        // does not)
        for (int m = 1; m + 1 < M; ++m) {
            const double dm = d[static_cast<std::size_t>(m)];
            if (!(dm < gap_threshold)) continue;
            if (!(dm < d[static_cast<std::size_t>(m - 1)] && dm < d[static_cast<std::size_t>(m + 1)]))
                continue;
            const double floor = std::max(4.0 * dm, 0.01 * gap_threshold);
            bool left_ok = false, right_ok = false;
            for (int a = m - 1; a >= 0; --a) {
                if (d[static_cast<std::size_t>(a)] >= floor) {
                    left_ok = true;
                    break;
                }
                if (d[static_cast<std::size_t>(a)] < dm) break;  // deeper minimum first
            }
            for (int b = m + 1; b < M; ++b) {
                if (d[static_cast<std::size_t>(b)] >= floor) {
                    right_ok = true;
                    break;
                }
                if (d[static_cast<std::size_t>(b)] < dm) break;
            }
            if (!left_ok || !right_ok) continue;

            // parabola through the three slices around the minimum
            const double x0 = flow.s[static_cast<std::size_t>(m - 1)],
                         x1 = flow.s[static_cast<std::size_t>(m)],
                         x2 = flow.s[static_cast<std::size_t>(m + 1)];
            const double y0 = d[static_cast<std::size_t>(m - 1)], y1 = dm,
                         y2 = d[static_cast<std::size_t>(m + 1)];
            const double den = (x0 - x1) * (x0 - x2) * (x1 - x2);
            const double A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den;
            double s_c = x1, gap = y1;
            if (A > 0.0) {
                const double B =
                    (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den;
                const double sv = -B / (2.0 * A);
                if (sv > x0 && sv < x2) {
                    s_c = sv;
                    gap = std::max(0.0, A * sv * sv + B * sv + (y1 - A * x1 * x1 - B * x1));
                }
            }
            cands.push_back({m, s_c, gap});
        }

        // unresolved crossings: the tracked difference changes sign between
        // slices, i.e. the continuation ran diabatically through a gap narrower
        // than the local spacing. Prominence on both sides guards against sign
        // ripple inside a near-degenerate band.
        for (int m = 0; m + 1 < M; ++m) {
            const double em = e[static_cast<std::size_t>(m)], en = e[static_cast<std::size_t>(m + 1)];
            if (!(em * en < 0.0)) continue;
            double left_max = 0.0, right_max = 0.0;
            for (int q = m; q >= 0; --q) {
                if (e[static_cast<std::size_t>(q)] * em <= 0.0) break;
                left_max = std::max(left_max, d[static_cast<std::size_t>(q)]);
            }
            for (int q = m + 1; q < M; ++q) {
                if (e[static_cast<std::size_t>(q)] * en <= 0.0) break;
                right_max = std::max(right_max, d[static_cast<std::size_t>(q)]);
            }
            if (left_max < 0.01 * gap_threshold || right_max < 0.01 * gap_threshold) continue;
            const double sm = flow.s[static_cast<std::size_t>(m)],
                         sn = flow.s[static_cast<std::size_t>(m + 1)];
            const double s_c = sm + (sn - sm) * (em / (em - en));
            cands.push_back({m, s_c, std::min(d[static_cast<std::size_t>(m)],
                                              d[static_cast<std::size_t>(m + 1)])});
        }

        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            return a.s_c < b.s_c || (a.s_c == b.s_c && a.gap < b.gap);
        });

        for (std::size_t ci = 0; ci < cands.size(); ++ci) {
            const auto& c = cands[ci];
            // a dip and a sign flip from the same unresolved crossing: keep the
            // narrower estimate
            if (!events.empty()) {
                auto& last = events.back();
                const int mn = clamp_interior(c.m, M);
                const double local_h = flow.s[static_cast<std::size_t>(mn + 1)] -
                                       flow.s[static_cast<std::size_t>(mn - 1)];
                if (last.track_j == j && std::abs(last.s_c - c.s_c) < local_h) {
                    if (c.gap < last.gap) {
                        last.s_c = c.s_c;
                        last.gap = c.gap;
                    }
                    continue;
                }
            }

            CrossingEvent ev;
            ev.track_i = track;
            ev.track_j = j;
            ev.s_c = c.s_c;
            ev.gap = c.gap;

            // Window from the coupling at slice resolution: walk outward until
            // |c| decays to 1e-3 of the peak or c changes sign. A zero bounds
            // the lobe belonging to this crossing; a close pair of crossings is
            // bridged by an opposite-signed coupling plateau that never decays,
            // and that plateau belongs to neither window.
            const int mi = clamp_interior(c.m, M);
            double peak = 0.0;
            for (int q = std::max(1, mi - 2); q <= std::min(M - 2, mi + 2); ++q)
                peak = std::max(peak, std::abs(coupling_at_slice(flow, track, j, q)));
            if (peak == 0.0) continue;  // flat segment, nothing to analyze
            const auto zero_between = [&](int m0, int m1) {
                const double c0 = coupling_at_slice(flow, track, j, m0);
                const double c1 = coupling_at_slice(flow, track, j, m1);
                const double s0 = flow.s[static_cast<std::size_t>(m0)];
                const double s1 = flow.s[static_cast<std::size_t>(m1)];
                return s0 + (s1 - s0) * c0 / (c0 - c1);
            };
            int a = mi, b = mi;
            ev.s_a = -1.0;
            ev.s_b = -1.0;
            while (a > 1) {
                const double c0 = coupling_at_slice(flow, track, j, a);
                if (std::abs(c0) < 1e-3 * peak) break;
                if (c0 * coupling_at_slice(flow, track, j, a - 1) < 0.0) {
                    ev.s_a = zero_between(a, a - 1);
                    break;
                }
                --a;
            }
            while (b < M - 2) {
                const double c0 = coupling_at_slice(flow, track, j, b);
                if (std::abs(c0) < 1e-3 * peak) break;
                if (c0 * coupling_at_slice(flow, track, j, b + 1) < 0.0) {
                    ev.s_b = zero_between(b, b + 1);
                    break;
                }
                ++b;
            }
            if (ev.s_a < 0.0) ev.s_a = flow.s[static_cast<std::size_t>(a)];
            if (ev.s_b < 0.0) ev.s_b = flow.s[static_cast<std::size_t>(b)];
            events.push_back(ev);
        }
    }
    std::sort(events.begin(), events.end(),
              [](const CrossingEvent& a, const CrossingEvent& b) { return a.s_c < b.s_c; });

    // A pair of crossings of the same partner can sit closer than their decay
    // widths (the gap between them never reopens far), merging the walked
    // windows. Hand over at the inter-event coupling minimum so each window
    // covers one crossing.
    for (std::size_t e = 0; e + 1 < events.size(); ++e) {
        auto& lhs = events[e];
        auto& rhs = events[e + 1];
        if (lhs.track_i != rhs.track_i || lhs.track_j != rhs.track_j) continue;
        if (lhs.s_b <= rhs.s_a) continue;
        const int ma = clamp_interior(flow.nearest_slice(lhs.s_c), M);
        const int mb = clamp_interior(flow.nearest_slice(rhs.s_c), M);
        int best = ma;
        double c_best = std::numeric_limits<double>::infinity();
        for (int m = ma; m <= mb; ++m) {
            const double cm = std::abs(coupling_at_slice(flow, lhs.track_i, lhs.track_j, m));
            if (cm < c_best) {
                c_best = cm;
                best = m;
            }
        }
        const double s_split = flow.s[static_cast<std::size_t>(best)];
        if (s_split > lhs.s_c && s_split < rhs.s_c) {
            lhs.s_b = s_split;
            rhs.s_a = s_split;
        }
    }
    return events;
}

double nonadiabatic_coupling(const SpectralFlow& flow, int i, int j, double s) {
    const int m = clamp_interior(flow.nearest_slice(s), flow.slice_count());
    const double gap = std::abs(flow.energies(i, m) - flow.energies(j, m));
    if (gap < 1e-12) {
        std::ostringstream os;
        os << "tracks " << i << " and " << j << " degenerate at s=" << flow.s[static_cast<std::size_t>(m)]
           << " (gap " << gap << ")";
        throw numerical_error(os.str());
    }
    return coupling_at_slice(flow, i, j, m);
}

TransitionEstimate transition_probability(const SpectralFlow& flow, int i, int j, double s_a,
                                          double s_b, double T) {
    if (!(s_b > s_a)) throw config_error("transition window must have positive width");
    if (!(T > 0.0)) throw config_error("transition estimate needs T > 0");
    const int M = flow.slice_count();

    int ma = M, mb = -1;
    for (int m = 1; m + 1 < M; ++m) {
        if (flow.s[static_cast<std::size_t>(m)] >= s_a && flow.s[static_cast<std::size_t>(m)] <= s_b) {
            ma = std::min(ma, m);
            mb = std::max(mb, m);
        }
    }
    if (mb - ma < 4) throw numerical_error("window too narrow: fewer than 5 interior slices");

    std::vector<double> xs, cs, des;
    xs.reserve(static_cast<std::size_t>(mb - ma + 1));
    double peak = 0.0;
    for (int m = ma; m <= mb; ++m) {
        xs.push_back(flow.s[static_cast<std::size_t>(m)]);
        cs.push_back(coupling_at_slice(flow, i, j, m));
        des.push_back(flow.energies(j, m) - flow.energies(i, m));
        peak = std::max(peak, std::abs(cs.back()));
    }
    if (peak == 0.0) throw numerical_error("no coupling inside the transition window");
    // Isolated crossings decay to ~1e-3 of peak at the walked window edges; a
    // window clamped at the handover to a close neighbouring crossing ends at
    // the inter-event coupling minimum, which can sit at a few percent of peak.
    if (std::abs(cs.front()) >= 5e-2 * peak || std::abs(cs.back()) >= 5e-2 * peak) {
        std::ostringstream os;
        os << "window too narrow: endpoint couplings " << std::abs(cs.front()) << ", "
           << std::abs(cs.back()) << " vs peak " << peak << " (need < 5e-2 x peak)";
        throw numerical_error(os.str());
    }

    const CubicSpline c_sp(xs, cs), de_sp(xs, des);
    const double lo = xs.front(), hi = xs.back();

    double max_de = 0.0;
    for (const double de : des) max_de = std::max(max_de, std::abs(de));

    const auto evaluate = [&](long N) {
        const double h = (hi - lo) / static_cast<double>(N);
        double phase = 0.0;
        std::complex<double> num(0.0, 0.0);
        double den = 0.0;
        double c_prev = c_sp(lo), de_prev = de_sp(lo);
        std::complex<double> f_prev = c_prev;  // phase(lo) = 0
        for (long q = 1; q <= N; ++q) {
            const double x = (q == N) ? hi : lo + static_cast<double>(q) * h;
            const double c = c_sp(x), de = de_sp(x);
            phase += T * 0.5 * (de_prev + de) * h;
            const std::complex<double> f = c * std::polar(1.0, phase);
            num += 0.5 * h * (f_prev + f);
            den += 0.5 * h * (c_prev + c);
            c_prev = c;
            de_prev = de;
            f_prev = f;
        }
        return std::pair<std::complex<double>, double>(num, den);
    };

    // start from a grid resolving both the coupling shape and the phase rate
    long N = std::max<long>(2000, 8L * (mb - ma));
    N = std::max<long>(N, std::lround(T * max_de * (hi - lo) / 0.1));
    N = std::min<long>(N, 1L << 22);

    auto [num_c, den_r] = evaluate(N);
    for (int round = 0; round < 8; ++round) {
        if (2 * N > (1L << 23)) break;
        const auto [num2, den2] = evaluate(2 * N);
        const double p1 = std::norm(num_c) / (den_r * den_r);
        const double p2 = std::norm(num2) / (den2 * den2);
        num_c = num2;
        den_r = den2;
        N *= 2;
        if (std::abs(p2 - p1) < 1e-4) break;
    }

    TransitionEstimate est;
    est.s_a = lo;
    est.s_b = hi;
    est.T = T;
    est.numerator = std::norm(num_c);
    est.denominator = den_r * den_r;
    if (!(est.denominator > 0.0)) throw numerical_error("vanishing sudden-limit normalization");
    double p = est.numerator / est.denominator;
    est.clamped = p > 1.0 + 1e-6;
    est.p = std::min(p, 1.0);
    return est;
}

namespace {

// match an event in a refreshed list by partner track and proximity
const CrossingEvent* find_event(const std::vector<CrossingEvent>& events, const CrossingEvent& like) {
    const CrossingEvent* best = nullptr;
    double best_d = 1e300;
    for (const auto& ev : events) {
        if (ev.track_j != like.track_j) continue;
        const double d = std::abs(ev.s_c - like.s_c);
        if (d < best_d) {
            best_d = d;
            best = &ev;
        }
    }
    return (best != nullptr && best_d < 0.1) ? best : nullptr;
}

}  // namespace

CrossingAnalysis analyze_crossings(const SliceFn& fn, const Eigen::VectorXd& anchor,
                                   const AnalysisOptions& opt,
                                   const std::vector<double>& band_anchors) {
    CrossingAnalysis a;
    a.slices = solve_slices(fn, opt.base_slices);
    a.flow = track_bands(a.slices, band_anchors);
    a.dark = follow_state(a.slices, anchor, opt.deg_tol);
    a.dark_track = identify_track(a.flow, a.dark);
    a.events = detect_crossings(a.flow, a.dark_track, opt.gap_threshold);
    if (a.events.empty()) return a;

    std::vector<double> p_prev(a.events.size(), -1.0);
    for (int round = 0; round < opt.max_refine_rounds; ++round) {
        if (static_cast<int>(a.slices.size()) > opt.max_slices) break;
        a.refine_rounds = round + 1;

        // refine each event: dense slices through the dip, a coarser halo around it
        for (const auto& ev : a.events) {
            // gap slope estimated from the window edge
            const int me = a.flow.nearest_slice(ev.s_b);
            const double de_edge =
                std::abs(a.flow.energies(ev.track_i, me) - a.flow.energies(ev.track_j, me));
            const double slope = std::max((de_edge - ev.gap) / std::max(ev.s_b - ev.s_c, 1e-9), 1e-9);
            const double w = std::max(ev.gap / slope, (ev.s_b - ev.s_a) / 256.0);
            // linear sampling through the dip, then a geometric fan out to the
            // ~1e-3 coupling-decay radius so the tails keep a bounded relative step
            for (int q = -8; q <= 8; ++q)
                insert_slice(a.slices, fn, std::clamp(ev.s_c + 0.25 * w * q, 0.0, 1.0));
            for (int q = 4; q <= 20; ++q) {
                const double u = w * std::pow(2.0, 0.25 * q);
                insert_slice(a.slices, fn, std::clamp(ev.s_c - u, 0.0, 1.0));
                insert_slice(a.slices, fn, std::clamp(ev.s_c + u, 0.0, 1.0));
            }
        }

        a.flow = SpectralFlow{};  // release before rebuilding: these are large
        a.flow = track_bands(a.slices, band_anchors);
        a.dark = follow_state(a.slices, anchor, opt.deg_tol);
        a.dark_track = identify_track(a.flow, a.dark);
        auto refreshed = detect_crossings(a.flow, a.dark_track, opt.gap_threshold);

        bool stable = refreshed.size() == a.events.size();
        std::vector<double> p_now(refreshed.size(), -1.0);
        if (stable) {
            for (std::size_t e = 0; e < refreshed.size(); ++e) {
                const CrossingEvent* match = find_event(refreshed, a.events[e]);
                if (match == nullptr) {
                    stable = false;
                    break;
                }
                // an event whose window is still under-resolved cannot be
                // estimated yet; keep refining
                try {
                    const auto est = transition_probability(a.flow, match->track_i,
                                                            match->track_j, match->s_a,
                                                            match->s_b, opt.T_ref);
                    p_now[e] = est.p;
                } catch (const numerical_error&) {
                    stable = false;
                    continue;
                }
                if (p_prev[e] < 0.0 || std::abs(p_now[e] - p_prev[e]) > opt.p_tol) stable = false;
            }
        }
        a.events = std::move(refreshed);
        p_prev.assign(p_now.begin(), p_now.end());
        p_prev.resize(a.events.size(), -1.0);
        if (stable) break;
    }
    return a;
}

std::vector<TransitionEstimate> estimate_over_durations(const CrossingAnalysis& analysis,
                                                        int event_index,
                                                        const std::vector<double>& durations) {
    if (event_index < 0 || event_index >= static_cast<int>(analysis.events.size()))
        throw config_error("no such crossing event");
    const auto& ev = analysis.events[static_cast<std::size_t>(event_index)];
    std::vector<TransitionEstimate> out;
    out.reserve(durations.size());
    for (const double T : durations)
        out.push_back(
            transition_probability(analysis.flow, ev.track_i, ev.track_j, ev.s_a, ev.s_b, T));
    return out;
}

}  // namespace sap::spectral
