#pragma once

// Interaction energy L(A,B) = int_A int_B |x-y|^{-(n+s)} and the localized
// functional J_s(E, Omega) on voxel sets.
//
// A pair of cells (i, j) interacts through w(i - j) = int_{Q_i} int_{Q_j} k,
// which by translation invariance only depends on the integer offset. For
// adjacent cells the tent-shaped autocorrelation of two unit cells is
// integrated semi-analytically (the singular corner uses homogeneity),
// moderately far offsets use tensor Gauss rules and far offsets sample the
// kernel at cell centres.
//
// The exterior of the box is split into a ghost band, which is treated
// exactly like box cells, and the rest of space, which is integrated along
// rays from Gauss points of every cell in Omega. Along a ray the exterior
// rule is piecewise constant with explicit breakpoints, and
// int t^{n-1} t^{-n-s} dt = t^{-s}/s, so the far field of the analytic rules
// is integrated out to infinity without truncation.

#include <bit>
#include <map>
#include <optional>

#include "fracmin/geometry.hpp"
#include "fracmin/quadrature.hpp"

namespace fracmin {

struct KernelSpec {
    enum class Regularization { near_exact, exclude_self, subcell_average };

    int n = 2;
    double s = 0.5;
    Regularization regularization = Regularization::near_exact;
    int k = 4;  // subdivisions for subcell_average

    void validate() const {
        if (n < 2 || n > 3) throw Error("kernel: dimension must be 2 or 3");
        if (!(s > 0.0 && s < 1.0)) throw Error("kernel: s must lie in (0,1)");
        if (regularization == Regularization::subcell_average && k < 2)
            throw Error("kernel: subcell-average needs k >= 2");
    }
    double operator()(double r) const { return std::pow(r, -(n + s)); }

    std::string name() const {
        switch (regularization) {
            case Regularization::near_exact: return "near-exact";
            case Regularization::exclude_self: return "exclude-self-cell";
            case Regularization::subcell_average: return "subcell-average";
        }
        return "?";
    }
};

struct EnergyBreakdown {
    double inside_inside = 0;  // L(E n Omega, cE n Omega)
    double inside_out = 0;     // L(E n Omega, cE \ Omega)
    double out_inside = 0;     // L(E \ Omega, cE n Omega)
    double total = 0;
    double truncation_radius = 0;
    double tail_bound = 0;  // bound on what truncation dropped (0: nothing dropped)
};

namespace detail {

/// c_m = int_{[0,1]^n} t^m |t|^{-n-s} dt for a 0/1 multi-index m != 0. The
/// cube minus its lower half-size copy is regular; homogeneity of degree
/// |m| - s sums the remaining self-similar copies.
inline double corner_moment(int n, double s, unsigned mask) {
    int deg = 0;
    for (int a = 0; a < n; ++a) deg += (mask >> a) & 1u;
    if (deg == 0) throw Error("corner_moment: divergent monomial");
    const auto& r = quad::gl(12);
    double shell = 0;
    const int parts = 4;  // per-axis subdivision of the shell boxes
    for (unsigned box = 1; box < (1u << n); ++box) {
        std::array<double, 3> lo{0, 0, 0};
        for (int a = 0; a < n; ++a) lo[a] = ((box >> a) & 1u) ? 0.5 : 0.0;
        const double hw = 0.25 / parts;  // half width of a sub-interval
        const int m = int(r.x.size());
        std::array<int, 3> lim{parts * m, n > 1 ? parts * m : 1, n > 2 ? parts * m : 1};
        for (int i0 = 0; i0 < lim[0]; ++i0)
            for (int i1 = 0; i1 < lim[1]; ++i1)
                for (int i2 = 0; i2 < lim[2]; ++i2) {
                    const std::array<int, 3> ii{i0, i1, i2};
                    double t2 = 0, mono = 1, wt = 1;
                    for (int a = 0; a < n; ++a) {
                        const int p = ii[a] / m, q = ii[a] % m;
                        const double c = lo[a] + (2 * p + 1) * hw;
                        const double t = c + hw * r.x[q];
                        t2 += t * t;
                        if ((mask >> a) & 1u) mono *= t;
                        wt *= hw * r.w[q];
                    }
                    shell += wt * mono * std::pow(t2, -0.5 * (n + s));
                }
    }
    return shell / (1.0 - std::pow(2.0, -(deg - s)));
}

/// Tent integral int prod_a T_a(z_a) |z|^{-n-s} dz for |d|_inf >= 1 in units
/// of h = 1, where T_a is the autocorrelation of two unit intervals at offset
/// d_a. Pieces meeting the origin are evaluated with corner moments.
inline double tent_weight(int n, double s, const std::array<long, 3>& d,
                          const std::vector<double>& cm) {
    double total = 0;
    long dmax = 0;
    for (int a = 0; a < n; ++a) dmax = std::max(dmax, std::abs(d[a]));
    const int m = dmax <= 3 ? 10 : 5;
    const auto& r = quad::gl(m);
    for (unsigned piece = 0; piece < (1u << n); ++piece) {
        // bit a clear: interval [d-1, d] with tent z-(d-1); set: [d, d+1] with (d+1)-z
        bool singular = true;
        std::array<double, 3> lo{0, 0, 0};
        for (int a = 0; a < n; ++a) {
            const double da = double(std::abs(d[a]));
            lo[a] = ((piece >> a) & 1u) ? da : da - 1.0;
            if (!(lo[a] == 0.0 || lo[a] + 1.0 == 0.0)) singular = false;
        }
        if (singular) {
            // Reflect onto [0,1]^n: the tent is 1 - t on axes with d_a = 0 and
            // t on axes with |d_a| = 1. Expand the product into monomials.
            unsigned ones = 0, zeros = 0;
            for (int a = 0; a < n; ++a) (d[a] == 0 ? zeros : ones) |= 1u << a;
            double v = 0;
            for (unsigned sub = zeros;; sub = (sub - 1) & zeros) {
                const int sign = (std::popcount(sub) % 2) ? -1 : 1;
                v += sign * cm[ones | sub];
                if (sub == 0) break;
            }
            total += v;
            continue;
        }
        std::array<int, 3> lim{m, n > 1 ? m : 1, n > 2 ? m : 1};
        for (int i0 = 0; i0 < lim[0]; ++i0)
            for (int i1 = 0; i1 < lim[1]; ++i1)
                for (int i2 = 0; i2 < lim[2]; ++i2) {
                    const std::array<int, 3> ii{i0, i1, i2};
                    double z2 = 0, tent = 1, wt = 1;
                    for (int a = 0; a < n; ++a) {
                        const double z = lo[a] + 0.5 + 0.5 * r.x[ii[a]];
                        z2 += z * z;
                        const double da = double(std::abs(d[a]));
                        tent *= ((piece >> a) & 1u) ? (da + 1.0 - z) : (z - (da - 1.0));
                        wt *= 0.5 * r.w[ii[a]];
                    }
                    total += wt * tent * std::pow(z2, -0.5 * (n + s));
                }
    }
    return total;
}

}  // namespace detail

/// Cell-pair weights w(d) for non-negative offsets d (the kernel is even in
/// every coordinate), in physical units.
class PairWeights {
public:
    PairWeights() = default;
    PairWeights(const KernelSpec& k, double h, std::array<long, 3> extent) : n_(k.n), ext_(extent) {
        k.validate();
        for (int a = k.n; a < 3; ++a) ext_[a] = 1;
        const double scale = std::pow(h, k.n - k.s);
        std::vector<double> cm(1u << k.n, 0.0);
        if (k.regularization == KernelSpec::Regularization::near_exact)
            for (unsigned mask = 1; mask < cm.size(); ++mask) cm[mask] = detail::corner_moment(k.n, k.s, mask);
        const long exact_range = k.n == 2 ? 24 : 10;
        w_.assign(std::size_t(ext_[0] * ext_[1] * ext_[2]), 0.0);
        for (long a = 0; a < ext_[0]; ++a)
            for (long b = 0; b < ext_[1]; ++b)
                for (long c = 0; c < ext_[2]; ++c) {
                    const std::array<long, 3> d{a, b, c};
                    if (a == 0 && b == 0 && c == 0) continue;
                    const long dmax = std::max({a, b, c});
                    const double r = std::sqrt(double(a * a + b * b + c * c));
                    double v = k(r);
                    switch (k.regularization) {
                        case KernelSpec::Regularization::near_exact:
                            if (dmax < exact_range) v = detail::tent_weight(k.n, k.s, d, cm);
                            break;
                        case KernelSpec::Regularization::exclude_self: break;
                        case KernelSpec::Regularization::subcell_average:
                            if (r < 2.0) v = subcell(k, d);
                            break;
                    }
                    w_[flat(d)] = v * scale;
                }
    }

    double operator()(long a, long b, long c) const {
        return w_[flat({std::abs(a), std::abs(b), std::abs(c)})];
    }
    const double* row(long a, long b) const { return &w_[flat({a, b, 0})]; }
    const std::array<long, 3>& extent() const { return ext_; }

private:
    std::size_t flat(const std::array<long, 3>& d) const {
        return std::size_t((d[0] * ext_[1] + d[1]) * ext_[2] + d[2]);
    }
    static double subcell(const KernelSpec& k, const std::array<long, 3>& d) {
        const int kk = k.k;
        double acc = 0;
        std::array<int, 3> lim{2 * kk - 1, k.n > 1 ? 2 * kk - 1 : 1, k.n > 2 ? 2 * kk - 1 : 1};
        for (int i0 = 0; i0 < lim[0]; ++i0)
            for (int i1 = 0; i1 < lim[1]; ++i1)
                for (int i2 = 0; i2 < lim[2]; ++i2) {
                    const std::array<int, 3> ii{i0, i1, i2};
                    double r2 = 0, wt = 1;
                    for (int a = 0; a < k.n; ++a) {
                        const int q = ii[a] - (kk - 1);
                        const double z = double(d[a]) + double(q) / kk;
                        r2 += z * z;
                        wt *= double(kk - std::abs(q)) / double(kk * kk);
                    }
                    acc += wt * k(std::sqrt(r2));
                }
        return acc;
    }

    int n_ = 2;
    std::array<long, 3> ext_{1, 1, 1};
    std::vector<double> w_;
};

namespace detail {

/// Quadrature directions on S^{n-1} with equal weights summing to |S^{n-1}|.
inline std::vector<Point> sphere_directions(int n, int count) {
    std::vector<Point> dirs;
    dirs.reserve(count);
    if (n == 2) {
        for (int i = 0; i < count; ++i) {
            const double t = 2.0 * std::numbers::pi * (i + 0.5) / count;
            dirs.push_back({std::cos(t), std::sin(t), 0.0});
        }
    } else {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < count; ++i) {
            const double z = 1.0 - (2.0 * i + 1.0) / count;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
        }
    }
    return dirs;
}

inline double tail_integral(double a, double b, double s) {
    // int_a^b t^{-1-s} dt, b may be infinite
    return (std::pow(a, -s) - (std::isinf(b) ? 0.0 : std::pow(b, -s))) / s;
}

}  // namespace detail

/// Precomputed geometry of J_s on one grid with fixed exterior data. Cells
/// outside Omega (box cells and the ghost band) are frozen at construction;
/// evaluate() and field() read the in-Omega occupancy from their argument.
class EnergyModel {
public:
    static constexpr long kBand = 8;

    EnergyModel(const VoxelSet& E, const Region& omega, KernelSpec kernel, double far_cutoff,
                int directions = 0)
        : grid_(E.grid), kernel_(kernel), cutoff_(far_cutoff), exterior_(E) {
        E.validate();
        kernel_.validate();
        if (kernel_.n != grid_.n) throw Error("energy: kernel dimension does not match the grid");
        if (!region_inside_box(omega, grid_)) throw Error("energy: Omega must lie inside the grid box");
        if (!(far_cutoff >= grid_.diameter())) throw Error("energy: far_cutoff must be at least the grid diameter");
        n_ = grid_.n;
        omega_ = region_mask(grid_, omega);
        for (std::size_t k = 0; k < grid_.size(); ++k)
            if (omega_[k]) omega_cells_.push_back(k);
        if (omega_cells_.empty()) throw Error("energy: Omega contains no cell centre");
        for (int a = 0; a < 3; ++a) pdims_[a] = a < n_ ? grid_.dims[a] + 2 * kBand : 1;
        weights_ = PairWeights(kernel_, grid_.h, pdims_);
        ghost_.assign(std::size_t(pdims_[0] * pdims_[1] * pdims_[2]), 0);
        for (long i = 0; i < pdims_[0]; ++i)
            for (long j = 0; j < pdims_[1]; ++j)
                for (long l = 0; l < pdims_[2]; ++l) {
                    const Index b = to_box({i, j, l});
                    ghost_[pflat({i, j, l})] = E.at(b) ? 1 : 0;
                }
        dirs_ = detail::sphere_directions(n_, directions > 0 ? directions : (n_ == 2 ? 2048 : 1024));
        xplus_.assign(grid_.size(), 0.0);
        xminus_.assign(grid_.size(), 0.0);
        ready_.assign(grid_.size(), 0);
    }

    const Grid& grid() const { return grid_; }
    const KernelSpec& kernel() const { return kernel_; }
    bool in_omega(std::size_t k) const { return omega_[k] != 0; }
    const std::vector<std::size_t>& omega_cells() const { return omega_cells_; }
    double omega_volume() const { return double(omega_cells_.size()) * std::pow(grid_.h, n_); }
    double weight(const Index& d) const { return weights_(d[0], d[1], d[2]); }

    /// Interaction of cell k with the part of E (plus) or of its complement
    /// (minus) lying beyond the ghost band.
    std::pair<double, double> exterior_field(std::size_t k) {
        ensure({k});
        return {xplus_[k], xminus_[k]};
    }

    /// Bound on the interaction dropped by truncating at far_cutoff; zero for
    /// analytic exterior rules, whose tails are integrated exactly.
    double tail_bound() const {
        if (exterior_.exterior.kind != ExteriorRule::Kind::periodic) return 0.0;
        return omega_volume() * unit_sphere_area(n_) * std::pow(cutoff_, -kernel_.s) / kernel_.s;
    }

    EnergyBreakdown evaluate(const VoxelSet& E) {
        check(E);
        ensure(omega_cells_);
        const auto chi = padded(E);
        struct Part {
            double ii = 0, io = 0, oi = 0;
        };
        auto parts = parallel_map<Part>(omega_cells_.size(), [&](std::size_t t) {
            const std::size_t k = omega_cells_[t];
            const auto s = class_sums(chi, k);  // [cE,out] [cE,in] [E,out] [E,in]
            Part p;
            if (E.at(k)) {
                p.ii = s[1];
                p.io = s[0] + xminus_[k];
            } else {
                p.oi = s[2] + xplus_[k];
            }
            return p;
        });
        CompensatedSum ii, io, oi;
        for (const auto& p : parts) ii += p.ii, io += p.io, oi += p.oi;
        EnergyBreakdown b;
        b.inside_inside = ii.value();
        b.inside_out = io.value();
        b.out_inside = oi.value();
        b.total = b.inside_inside + b.inside_out + b.out_inside;
        b.truncation_radius = cutoff_;
        b.tail_bound = tail_bound();
        return b;
    }

    /// A(k) = sum_j chi_j w(k - j) + X+(k) - X-(k) for every cell of Omega,
    /// with chi = +1 on E and -1 on its complement. Flipping k changes J_s by
    /// chi_k A(k). Entries outside Omega are zero.
    std::vector<double> field(const VoxelSet& E) {
        check(E);
        ensure(omega_cells_);
        const auto chi = padded(E);
        auto vals = parallel_map<double>(omega_cells_.size(), [&](std::size_t t) {
            const std::size_t k = omega_cells_[t];
            const auto s = class_sums(chi, k);
            return (s[2] + s[3]) - (s[0] + s[1]) + xplus_[k] - xminus_[k];
        });
        std::vector<double> A(grid_.size(), 0.0);
        for (std::size_t t = 0; t < omega_cells_.size(); ++t) A[omega_cells_[t]] = vals[t];
        return A;
    }

    double flip_delta(const VoxelSet& E, std::size_t k) {
        check(E);
        if (!in_omega(k)) throw Error("exterior data is frozen");
        ensure({k});
        const auto chi = padded(E);
        const auto s = class_sums(chi, k);
        const double A = (s[2] + s[3]) - (s[0] + s[1]) + xplus_[k] - xminus_[k];
        return E.at(k) ? A : -A;
    }

private:
    Index to_box(const Index& p) const {
        Index b{0, 0, 0};
        for (int a = 0; a < n_; ++a) b[a] = p[a] - kBand;
        return b;
    }
    std::size_t pflat(const Index& p) const {
        return std::size_t((p[0] * pdims_[1] + p[1]) * pdims_[2] + p[2]);
    }
    void check(const VoxelSet& E) const {
        if (!E.grid.same_as(grid_)) throw Error("energy: set lives on a different grid");
    }

    /// Padded labels: bit 1 = in E, bit 0 = in Omega.
    std::vector<std::uint8_t> padded(const VoxelSet& E) const {
        auto out = ghost_;
        for (auto& v : out) v = std::uint8_t(v << 1);
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            Index p = grid_.unflat(k);
            for (int a = 0; a < n_; ++a) p[a] += kBand;
            const bool inE = omega_[k] ? E.at(k) : exterior_.at(k);
            out[pflat(p)] = std::uint8_t((inE ? 2 : 0) | (omega_[k] ? 1 : 0));
        }
        return out;
    }

    /// Weighted sums of w(k - j) over padded cells j != k, split by label.
    std::array<double, 4> class_sums(const std::vector<std::uint8_t>& chi, std::size_t k) const {
        Index c = grid_.unflat(k);
        for (int a = 0; a < n_; ++a) c[a] += kBand;
        std::array<double, 4> s{0, 0, 0, 0};
        std::size_t j = 0;
        for (long i0 = 0; i0 < pdims_[0]; ++i0)
            for (long i1 = 0; i1 < pdims_[1]; ++i1) {
                const double* w = weights_.row(std::abs(i0 - c[0]), std::abs(i1 - c[1]));
                for (long i2 = 0; i2 < pdims_[2]; ++i2, ++j) s[chi[j]] += w[std::abs(i2 - c[2])];
            }
        return s;  // the self term has weight zero
    }

    void ensure(const std::vector<std::size_t>& cells) {
        std::vector<std::size_t> todo;
        for (auto k : cells)
            if (!ready_[k]) todo.push_back(k);
        if (todo.empty()) return;
        auto vals = parallel_map<std::pair<double, double>>(todo.size(), [&](std::size_t t) {
            return rays(todo[t]);
        });
        for (std::size_t t = 0; t < todo.size(); ++t) {
            xplus_[todo[t]] = vals[t].first;
            xminus_[todo[t]] = vals[t].second;
            ready_[todo[t]] = 1;
        }
    }

    /// Ray integrals from the 2^n Gauss points of cell k over the region
    /// beyond the ghost band.
    std::pair<double, double> rays(std::size_t k) const {
        const Point c = grid_.center(k);
        const double h = grid_.h, s = kernel_.s;
        Point lo = grid_.lower(), hi = grid_.upper();
        for (int a = 0; a < n_; ++a) lo[a] -= kBand * h, hi[a] += kBand * h;
        const double off = h / (2.0 * std::sqrt(3.0));
        const double wpt = std::pow(h, n_) / double(1u << n_);
        const double wdir = unit_sphere_area(n_) / double(dirs_.size());
        CompensatedSum plus, minus;
        std::vector<std::pair<double, double>> pieces;
        for (unsigned g = 0; g < (1u << n_); ++g) {
            Point x = c;
            for (int a = 0; a < n_; ++a) x[a] += ((g >> a) & 1u) ? off : -off;
            double p = 0, m = 0;
            for (const auto& u : dirs_) {
                double tb = std::numeric_limits<double>::infinity();
                for (int a = 0; a < n_; ++a) {
                    if (u[a] > 0) tb = std::min(tb, (hi[a] - x[a]) / u[a]);
                    if (u[a] < 0) tb = std::min(tb, (lo[a] - x[a]) / u[a]);
                }
                pieces.clear();
                ray_pieces(x, u, tb, pieces);
                for (const auto& [a, b] : pieces) {
                    const double v = detail::tail_integral(a, std::abs(b), s);
                    (b > 0 ? p : m) += v;
                }
            }
            plus += wpt * wdir * p;
            minus += wpt * wdir * m;
        }
        return {plus.value(), minus.value()};
    }

    /// Splits the ray x + t u, t >= tb, into intervals; each is reported as
    /// (a, +b) when it lies in E and (a, -b) otherwise, with b possibly infinite.
    void ray_pieces(const Point& x, const Point& u, double tb,
                    std::vector<std::pair<double, double>>& out) const {
        const ExteriorRule& rule = exterior_.exterior;
        using K = ExteriorRule::Kind;
        const double inf = std::numeric_limits<double>::infinity();
        if (rule.kind == K::periodic) {
            const double step = 0.5 * grid_.h;
            double t = tb;
            while (t < cutoff_) {
                const double t1 = std::min(cutoff_, t + step);
                const Point y = x + (0.5 * (t + t1)) * u;
                const bool in = exterior_.contains(y);
                if (!out.empty() && (out.back().second > 0) == in && std::abs(out.back().second) == t)
                    out.back().second = in ? t1 : -t1;
                else
                    out.push_back({t, in ? t1 : -t1});
                t = t1;
            }
            return;
        }
        std::vector<double> cuts{tb};
        auto add = [&](double t) {
            if (std::isfinite(t) && t > tb) cuts.push_back(t);
        };
        if (rule.kind == K::halfspace || rule.kind == K::complement_halfspace) {
            const double un = dot(u, rule.nu);
            if (un != 0.0) add((rule.offset - dot(x, rule.nu)) / un);
        } else if (rule.kind == K::cone || rule.kind == K::complement_cone) {
            const int l = n_ - 1;
            const double a2 = rule.slope * rule.slope;
            double uu = 0, xu = 0, xx = 0;
            for (int a = 0; a < l; ++a) uu += u[a] * u[a], xu += x[a] * u[a], xx += x[a] * x[a];
            const double A = a2 * uu - u[l] * u[l];
            const double B = 2.0 * (a2 * xu - x[l] * u[l]);
            const double C = a2 * xx - x[l] * x[l];
            if (std::abs(A) > 1e-14) {
                const double disc = B * B - 4 * A * C;
                if (disc >= 0) {
                    const double sq = std::sqrt(disc);
                    add((-B - sq) / (2 * A));
                    add((-B + sq) / (2 * A));
                }
            } else if (B != 0.0) {
                add(-C / B);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t i = 0; i < cuts.size(); ++i) {
            const double a = cuts[i];
            const double b = i + 1 < cuts.size() ? cuts[i + 1] : inf;
            if (!(b > a)) continue;
            const double mid = std::isinf(b) ? 2.0 * a + 1.0 : 0.5 * (a + b);
            const bool in = rule.contains(x + mid * u, n_);
            out.push_back({a, in ? b : -b});
        }
    }

    Grid grid_;
    KernelSpec kernel_;
    double cutoff_;
    VoxelSet exterior_;  // snapshot supplying frozen data outside Omega
    int n_ = 2;
    std::vector<std::uint8_t> omega_;
    std::vector<std::size_t> omega_cells_;
    std::array<long, 3> pdims_{1, 1, 1};
    PairWeights weights_;
    std::vector<std::uint8_t> ghost_;
    std::vector<Point> dirs_;
    std::vector<double> xplus_, xminus_;
    std::vector<std::uint8_t> ready_;
};

/// L(A, B) over the box cells of two disjoint sets on one grid. Unordered
/// pairs are visited in a fixed order, so the result is symmetric bit for bit.
inline double interaction(const VoxelSet& A, const VoxelSet& B, const KernelSpec& kernel) {
    A.validate();
    B.validate();
    kernel.validate();
    if (!A.grid.same_as(B.grid)) throw Error("interaction: sets live on different grids");
    if (kernel.n != A.grid.n) throw Error("interaction: kernel dimension does not match the grid");
    const Grid& g = A.grid;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (A.at(k) && B.at(k)) throw Error("non-disjoint sets");
    std::vector<std::size_t> cells;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (A.at(k) || B.at(k)) cells.push_back(k);
    if (cells.empty()) return 0.0;
    const PairWeights w(kernel, g.h, g.dims);
    return ordered_sum(cells.size(), [&](std::size_t t) {
        const std::size_t p = cells[t];
        const bool pa = A.at(p);
        const Index ip = g.unflat(p);
        double acc = 0;
        for (std::size_t u = t + 1; u < cells.size(); ++u) {
            const std::size_t q = cells[u];
            if (pa == A.at(q)) continue;
            const Index iq = g.unflat(q);
            acc += w(ip[0] - iq[0], ip[1] - iq[1], ip[2] - iq[2]);
        }
        return acc;
    });
}

inline EnergyBreakdown js_energy(const VoxelSet& E, const Region& omega, const KernelSpec& kernel,
                                 double far_cutoff) {
    EnergyModel model(E, omega, kernel, far_cutoff);
    return model.evaluate(E);
}

/// J_s(E with `cell` flipped, Omega) - J_s(E, Omega).
inline double flip_delta(const VoxelSet& E, const Index& cell, const Region& omega,
                         const KernelSpec& kernel, double far_cutoff = 0.0) {
    if (!E.grid.in_range(cell)) throw Error("flip_delta: cell outside the grid");
    const double cutoff = far_cutoff > 0 ? far_cutoff : 4.0 * E.grid.diameter();
    EnergyModel model(E, omega, kernel, cutoff);
    return model.flip_delta(E, E.grid.flat(cell));
}

}  // namespace fracmin
