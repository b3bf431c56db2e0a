#include "mdkk/snap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mdkk/error.hpp"
#include "mdkk/pair.hpp"
#include "mdkk/parallel.hpp"

namespace mdkk
{

namespace
{

double factorial(int n)
{
    static const std::vector<double> table = [] {
        std::vector<double> t(171, 1.0);
        for (std::size_t i = 1; i < t.size(); ++i) {
            t[i] = t[i - 1] * static_cast<double>(i);
        }
        return t;
    }();
    if (n < 0 || n >= static_cast<int>(table.size())) {
        throw Error("factorial argument out of range: " + std::to_string(n));
    }
    return table[static_cast<std::size_t>(n)];
}

double deltacg(int j1, int j2, int j)
{
    const double sfaccg = factorial((j1 + j2 + j) / 2 + 1);
    return std::sqrt(factorial((j1 + j2 - j) / 2) * factorial((j1 - j2 + j) / 2) * factorial((-j1 + j2 + j) / 2) /
                     sfaccg);
}

} // namespace

SnapBasis::SnapBasis(double jmax)
{
    const double twice = 2.0 * jmax;
    twojmax_ = static_cast<int>(std::lround(twice));
    if (!(jmax >= 0.0) || std::abs(twice - twojmax_) > 1e-12) {
        throw ConfigError("snap: jmax must be a non-negative multiple of 1/2");
    }
    const int t = twojmax_;
    const auto n = static_cast<std::size_t>(t + 1);

    u_block_.resize(n);
    for (int j = 0; j <= t; ++j) {
        u_block_[static_cast<std::size_t>(j)] = u_size_;
        u_size_ += static_cast<std::size_t>((j + 1) * (j + 1));
    }

    cg_block_.assign(n * n * n, 0);
    for (int j1 = 0; j1 <= t; ++j1) {
        for (int j2 = 0; j2 <= t; ++j2) {
            for (int j = std::abs(j1 - j2); j <= std::min(t, j1 + j2); j += 2) {
                cg_block_[cube(j1, j2, j)] = cg_.size();
                for (int m1 = 0; m1 <= j1; ++m1) {
                    const int aa2 = 2 * m1 - j1;
                    for (int m2 = 0; m2 <= j2; ++m2) {
                        const int bb2 = 2 * m2 - j2;
                        const int m = (aa2 + bb2 + j) / 2;
                        if (m < 0 || m > j) {
                            cg_.push_back(0.0);
                            continue;
                        }
                        double sum = 0.0;
                        const int zmin = std::max({0, -(j - j2 + aa2) / 2, -(j - j1 - bb2) / 2});
                        const int zmax = std::min({(j1 + j2 - j) / 2, (j1 - aa2) / 2, (j2 + bb2) / 2});
                        for (int z = zmin; z <= zmax; ++z) {
                            const double sign = (z % 2) ? -1.0 : 1.0;
                            sum += sign / (factorial(z) * factorial((j1 + j2 - j) / 2 - z) *
                                           factorial((j1 - aa2) / 2 - z) * factorial((j2 + bb2) / 2 - z) *
                                           factorial((j - j2 + aa2) / 2 + z) * factorial((j - j1 - bb2) / 2 + z));
                        }
                        const int cc2 = 2 * m - j;
                        const double sfac =
                            std::sqrt(factorial((j1 + aa2) / 2) * factorial((j1 - aa2) / 2) * factorial((j2 + bb2) / 2) *
                                      factorial((j2 - bb2) / 2) * factorial((j + cc2) / 2) * factorial((j - cc2) / 2) *
                                      (j + 1));
                        cg_.push_back(sum * deltacg(j1, j2, j) * sfac);
                    }
                }
            }
        }
    }

    z_block_.assign(n * n * n, 0);
    for (int j1 = 0; j1 <= t; ++j1) {
        for (int j2 = 0; j2 <= j1; ++j2) {
            for (int j = j1 - j2; j <= std::min(t, j1 + j2); j += 2) {
                z_block_[cube(j1, j2, j)] = z_.size();
                for (int mb = 0; 2 * mb <= j; ++mb) {
                    for (int ma = 0; ma <= j; ++ma) {
                        ZEntry e{};
                        e.j1 = j1;
                        e.j2 = j2;
                        e.j = j;
                        e.ma1min = std::max(0, (2 * ma - j - j2 + j1) / 2);
                        e.ma2max = (2 * ma - j - (2 * e.ma1min - j1) + j2) / 2;
                        e.na = std::min(j1, (2 * ma - j + j2 + j1) / 2) - e.ma1min + 1;
                        e.mb1min = std::max(0, (2 * mb - j - j2 + j1) / 2);
                        e.mb2max = (2 * mb - j - (2 * e.mb1min - j1) + j2) / 2;
                        e.nb = std::min(j1, (2 * mb - j + j2 + j1) / 2) - e.mb1min + 1;
                        e.jju = static_cast<int>(flat(j, mb, ma));
                        z_.push_back(e);
                    }
                }
            }
        }
    }

    b_block_.assign(n * n * n, -1);
    for (int j1 = 0; j1 <= t; ++j1) {
        for (int j2 = 0; j2 <= j1; ++j2) {
            for (int j = j1 - j2; j <= std::min(t, j1 + j2); j += 2) {
                if (j >= j1) {
                    b_block_[cube(j1, j2, j)] = static_cast<int>(b_.size());
                    b_.push_back({j1, j2, j});
                }
            }
        }
    }

    rootpq_.assign(n * n, 0.0);
    for (int p = 1; p <= t; ++p) {
        for (int q = 1; q <= t; ++q) {
            rootpq_[static_cast<std::size_t>(p * (t + 1) + q)] = std::sqrt(static_cast<double>(p) / q);
        }
    }
}

double SnapBasis::cg(int j1, int j2, int j, int m1, int m2) const
{
    const int t = twojmax_;
    if (j1 < 0 || j2 < 0 || j < 0 || j1 > t || j2 > t || j > t) {
        return 0.0;
    }
    if (j < std::abs(j1 - j2) || j > j1 + j2 || (j1 + j2 + j) % 2 != 0) {
        return 0.0;
    }
    if (std::abs(m1) > j1 || std::abs(m2) > j2 || (m1 + j1) % 2 != 0 || (m2 + j2) % 2 != 0 || std::abs(m1 + m2) > j) {
        return 0.0;
    }
    const int ma1 = (m1 + j1) / 2;
    const int ma2 = (m2 + j2) / 2;
    return cg_block(j1, j2, j)[ma1 * (j2 + 1) + ma2];
}

double SnapBasis::beta_weight(int j1, int j2, int j, const std::vector<double>& beta) const
{
    double w = 0.0;
    if (j >= j1) {
        const double b = beta[static_cast<std::size_t>(b_index(j1, j2, j))];
        w = (j1 == j) ? ((j2 == j) ? 3.0 * b : 2.0 * b) : b;
    } else if (j >= j2) {
        const double b = beta[static_cast<std::size_t>(b_index(j, j2, j1))];
        w = (j2 == j) ? 2.0 * b : b;
    } else {
        w = beta[static_cast<std::size_t>(b_index(j2, j, j1))];
    }
    if (j1 > j) {
        w *= (j1 + 1) / (j + 1.0);
    }
    return w;
}

CayleyKlein cayley_klein(const Vec3& d, double rc, double rfac0)
{
    const double rsq = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    const double r = std::sqrt(rsq);
    if (!(r > 0.0)) {
        throw Error("snap: neighbor at zero separation");
    }
    CayleyKlein ck;
    ck.r = r;
    const double rscale0 = rfac0 * std::numbers::pi / rc;
    const double theta0 = r * rscale0;
    const double cs = std::cos(theta0);
    const double sn = std::sin(theta0);
    ck.z0 = r * cs / sn;
    ck.dz0dr = ck.z0 / r - (r * rscale0) * (rsq + ck.z0 * ck.z0) / rsq;
    const double r0inv = 1.0 / std::sqrt(rsq + ck.z0 * ck.z0);
    ck.a = {r0inv * ck.z0, -r0inv * d[2]};
    ck.b = {r0inv * d[1], -r0inv * d[0]};
    if (r < rc) {
        const double arg = std::numbers::pi * r / rc;
        ck.fc = 0.5 * (std::cos(arg) + 1.0);
        ck.dfc = -0.5 * std::numbers::pi / rc * std::sin(arg);
    }
    return ck;
}

namespace
{

// Unweighted u_j recursion into (re, im).
void u_array(const SnapBasis& basis, const CayleyKlein& ck, double* ur, double* ui)
{
    const double ar = ck.a.real(), ai = ck.a.imag();
    const double br = ck.b.real(), bi = ck.b.imag();
    ur[0] = 1.0;
    ui[0] = 0.0;
    for (int j = 1; j <= basis.twojmax(); ++j) {
        std::size_t jju = basis.u_block(j);
        std::size_t jjup = basis.u_block(j - 1);
        for (int mb = 0; 2 * mb <= j; ++mb) {
            ur[jju] = 0.0;
            ui[jju] = 0.0;
            for (int ma = 0; ma < j; ++ma) {
                double rootpq = basis.rootpq(j - ma, j - mb);
                ur[jju] += rootpq * (ar * ur[jjup] + ai * ui[jjup]);
                ui[jju] += rootpq * (ar * ui[jjup] - ai * ur[jjup]);
                rootpq = basis.rootpq(ma + 1, j - mb);
                ur[jju + 1] = -rootpq * (br * ur[jjup] + bi * ui[jjup]);
                ui[jju + 1] = -rootpq * (br * ui[jjup] - bi * ur[jjup]);
                ++jju;
                ++jjup;
            }
            ++jju;
        }
        // lower rows by inversion symmetry
        jju = basis.u_block(j);
        jjup = jju + static_cast<std::size_t>((j + 1) * (j + 1)) - 1;
        int mbpar = 1;
        for (int mb = 0; 2 * mb <= j; ++mb) {
            int mapar = mbpar;
            for (int ma = 0; ma <= j; ++ma) {
                if (mapar == 1) {
                    ur[jjup] = ur[jju];
                    ui[jjup] = -ui[jju];
                } else {
                    ur[jjup] = -ur[jju];
                    ui[jjup] = ui[jju];
                }
                mapar = -mapar;
                ++jju;
                --jjup;
            }
            mbpar = -mbpar;
        }
    }
}

// Derivatives of fc * u_j with respect to the neighbor displacement, laid out
// [jju * 3 + k]. u must hold the unweighted u_j of the same neighbor.
void du_array(const SnapBasis& basis, const CayleyKlein& ck, const Vec3& d, const double* ur, const double* ui,
              double* dur, double* dui)
{
    const double r = ck.r;
    const double rinv = 1.0 / r;
    const Vec3 unit{d[0] * rinv, d[1] * rinv, d[2] * rinv};
    const double z0 = ck.z0;
    const double r0inv = 1.0 / std::sqrt(r * r + z0 * z0);
    const double ar = ck.a.real(), ai = ck.a.imag();
    const double br = ck.b.real(), bi = ck.b.imag();
    const double dr0invdr = -r0inv * r0inv * r0inv * (r + z0 * ck.dz0dr);

    double dar[3], dai[3], dbr[3], dbi[3];
    for (int k = 0; k < 3; ++k) {
        const double dr0inv = dr0invdr * unit[k];
        const double dz0 = ck.dz0dr * unit[k];
        dar[k] = dz0 * r0inv + z0 * dr0inv;
        dai[k] = -d[2] * dr0inv;
        dbr[k] = d[1] * dr0inv;
        dbi[k] = -d[0] * dr0inv;
    }
    dai[2] += -r0inv;
    dbr[1] += r0inv;
    dbi[0] += -r0inv;

    dur[0] = dur[1] = dur[2] = 0.0;
    dui[0] = dui[1] = dui[2] = 0.0;
    for (int j = 1; j <= basis.twojmax(); ++j) {
        std::size_t jju = basis.u_block(j);
        std::size_t jjup = basis.u_block(j - 1);
        for (int mb = 0; 2 * mb <= j; ++mb) {
            for (int k = 0; k < 3; ++k) {
                dur[jju * 3 + k] = 0.0;
                dui[jju * 3 + k] = 0.0;
            }
            for (int ma = 0; ma < j; ++ma) {
                double rootpq = basis.rootpq(j - ma, j - mb);
                for (int k = 0; k < 3; ++k) {
                    dur[jju * 3 + k] += rootpq * (dar[k] * ur[jjup] + dai[k] * ui[jjup] + ar * dur[jjup * 3 + k] +
                                                  ai * dui[jjup * 3 + k]);
                    dui[jju * 3 + k] += rootpq * (dar[k] * ui[jjup] - dai[k] * ur[jjup] + ar * dui[jjup * 3 + k] -
                                                  ai * dur[jjup * 3 + k]);
                }
                rootpq = basis.rootpq(ma + 1, j - mb);
                for (int k = 0; k < 3; ++k) {
                    dur[(jju + 1) * 3 + k] = -rootpq * (dbr[k] * ur[jjup] + dbi[k] * ui[jjup] +
                                                        br * dur[jjup * 3 + k] + bi * dui[jjup * 3 + k]);
                    dui[(jju + 1) * 3 + k] = -rootpq * (dbr[k] * ui[jjup] - dbi[k] * ur[jjup] +
                                                        br * dui[jjup * 3 + k] - bi * dur[jjup * 3 + k]);
                }
                ++jju;
                ++jjup;
            }
            ++jju;
        }
        jju = basis.u_block(j);
        jjup = jju + static_cast<std::size_t>((j + 1) * (j + 1)) - 1;
        int mbpar = 1;
        for (int mb = 0; 2 * mb <= j; ++mb) {
            int mapar = mbpar;
            for (int ma = 0; ma <= j; ++ma) {
                for (int k = 0; k < 3; ++k) {
                    if (mapar == 1) {
                        dur[jjup * 3 + k] = dur[jju * 3 + k];
                        dui[jjup * 3 + k] = -dui[jju * 3 + k];
                    } else {
                        dur[jjup * 3 + k] = -dur[jju * 3 + k];
                        dui[jjup * 3 + k] = dui[jju * 3 + k];
                    }
                }
                mapar = -mapar;
                ++jju;
                --jjup;
            }
            mbpar = -mbpar;
        }
    }

    // chain rule through the switching function
    for (std::size_t jju = 0; jju < basis.u_size(); ++jju) {
        for (int k = 0; k < 3; ++k) {
            dur[jju * 3 + k] = ck.dfc * ur[jju] * unit[k] + ck.fc * dur[jju * 3 + k];
            dui[jju * 3 + k] = ck.dfc * ui[jju] * unit[k] + ck.fc * dui[jju * 3 + k];
        }
    }
}

// Weight of each flat element in the half-matrix contraction.
std::vector<double> half_weights(const SnapBasis& basis)
{
    std::vector<double> w(basis.u_size(), 0.0);
    for (int j = 0; j <= basis.twojmax(); ++j) {
        for (int mb = 0; 2 * mb <= j; ++mb) {
            for (int ma = 0; ma <= j; ++ma) {
                double v = 1.0;
                if (2 * mb == j) {
                    v = ma < mb ? 1.0 : (ma == mb ? 0.5 : 0.0);
                }
                w[basis.flat(j, mb, ma)] = v;
            }
        }
    }
    return w;
}

struct View
{
    double* p;
    std::size_t s0, s1;
    double& operator()(std::size_t a, std::size_t q) const { return p[a * s0 + q * s1]; }
};

View view(DualArray<double>& arr, Space space)
{
    return {arr.data(space), arr.stride(space, 0), arr.stride(space, 1)};
}

View view(const DualArray<double>& arr, Space space)
{
    return {const_cast<double*>(arr.data(space)), arr.stride(space, 0), arr.stride(space, 1)};
}

void atomic_add(double& target, double v)
{
    std::atomic_ref<double>(target).fetch_add(v, std::memory_order_relaxed);
}

// One Z element of atom a.
void z_element(const SnapBasis& basis, const SnapBasis::ZEntry& e, const View& ur, const View& ui, std::size_t a,
               double& zr, double& zi)
{
    const double* cgblock = basis.cg_block(e.j1, e.j2, e.j);
    zr = 0.0;
    zi = 0.0;
    std::size_t jju1 = basis.u_block(e.j1) + static_cast<std::size_t>((e.j1 + 1) * e.mb1min);
    std::size_t jju2 = basis.u_block(e.j2) + static_cast<std::size_t>((e.j2 + 1) * e.mb2max);
    int icgb = e.mb1min * (e.j2 + 1) + e.mb2max;
    for (int ib = 0; ib < e.nb; ++ib) {
        double sr = 0.0;
        double si = 0.0;
        int ma1 = e.ma1min;
        int ma2 = e.ma2max;
        int icga = e.ma1min * (e.j2 + 1) + e.ma2max;
        for (int ia = 0; ia < e.na; ++ia) {
            const double u1r = ur(a, jju1 + static_cast<std::size_t>(ma1));
            const double u1i = ui(a, jju1 + static_cast<std::size_t>(ma1));
            const double u2r = ur(a, jju2 + static_cast<std::size_t>(ma2));
            const double u2i = ui(a, jju2 + static_cast<std::size_t>(ma2));
            sr += cgblock[icga] * (u1r * u2r - u1i * u2i);
            si += cgblock[icga] * (u1r * u2i + u1i * u2r);
            ++ma1;
            --ma2;
            icga += e.j2;
        }
        zr += cgblock[icgb] * sr;
        zi += cgblock[icgb] * si;
        jju1 += static_cast<std::size_t>(e.j1 + 1);
        jju2 -= static_cast<std::size_t>(e.j2 + 1);
        icgb += e.j2;
    }
}

} // namespace

std::vector<std::complex<double>> wigner_u(const SnapBasis& basis, const Vec3& d, double rc, double rfac0)
{
    const CayleyKlein ck = cayley_klein(d, rc, rfac0);
    std::vector<double> ur(basis.u_size()), ui(basis.u_size());
    u_array(basis, ck, ur.data(), ui.data());
    std::vector<std::complex<double>> out(basis.u_size());
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] = {ur[n], ui[n]};
    }
    return out;
}

SnapCoefficients parse_snap_coefficients(const std::string& text)
{
    std::istringstream lines(text);
    std::string line;
    std::vector<std::string> tokens;
    while (std::getline(lines, line)) {
        line = line.substr(0, line.find('#'));
        std::istringstream words(line);
        std::string w;
        while (words >> w) {
            tokens.push_back(w);
        }
    }
    if (tokens.empty()) {
        throw ConfigError("snap coefficients: missing jmax");
    }
    auto number = [](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size()) {
            throw ConfigError("snap coefficients: malformed number '" + s + "'");
        }
        return v;
    };
    SnapCoefficients c;
    c.jmax = number(tokens[0]);
    const SnapBasis basis(c.jmax);
    for (std::size_t n = 1; n < tokens.size(); ++n) {
        c.beta.push_back(number(tokens[n]));
    }
    if (c.beta.size() != basis.n_b()) {
        throw ConfigError("snap coefficients: jmax " + tokens[0] + " needs " + std::to_string(basis.n_b()) +
                          " values, found " + std::to_string(c.beta.size()));
    }
    return c;
}

SnapCoefficients read_snap_coefficients(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open snap coefficient file '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_snap_coefficients(buf.str());
}

Snap::Snap(const SnapParams& params, const SnapKnobs& knobs) : params_(params), knobs_(knobs), basis_(params.jmax)
{
    if (!(params_.rcut > 0.0)) {
        throw ConfigError("snap: cutoff must be positive");
    }
    if (!(params_.rfac0 > 0.0) || !(params_.rfac0 < 1.0)) {
        throw ConfigError("snap: rfac0 must lie in (0, 1)");
    }
    if (params_.beta.empty()) {
        params_.beta.assign(basis_.n_b(), 0.0);
    }
    if (params_.beta.size() != basis_.n_b()) {
        throw ConfigError("snap: " + std::to_string(params_.beta.size()) + " beta values for " +
                          std::to_string(basis_.n_b()) + " bispectrum components");
    }
}

std::vector<std::vector<Snap::Pair>> Snap::gather_pairs(const AtomStore& atoms, const NeighborList& full) const
{
    if (full.style() != ListStyle::Full) {
        throw ConfigError("snap: needs a full neighbor list");
    }
    if (full.settings.list_cutoff() < params_.rcut) {
        throw ConfigError("snap: neighbor list cutoff is shorter than the snap cutoff");
    }
    const double rcsq = params_.rcut * params_.rcut;
    std::vector<std::vector<Pair>> pairs(atoms.n_local);
    parallel_for_dynamic(atoms.n_local, worker_count(), 64, [&](std::size_t, std::size_t i) {
        const Vec3 xi = atoms.position(i);
        auto& row = pairs[i];
        for (auto k : full.row(i)) {
            const Vec3 xk = atoms.position(static_cast<std::size_t>(k));
            const Vec3 d{xk[0] - xi[0], xk[1] - xi[1], xk[2] - xi[2]};
            const double rsq = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if (rsq == 0.0) {
                throw Error("snap: neighbor at zero separation");
            }
            if (rsq < rcsq) {
                row.push_back({d, k});
            }
        }
        // fixed summation order independent of storage order
        std::sort(row.begin(), row.end(), [](const Pair& a, const Pair& b) {
            return a.d != b.d ? a.d < b.d : a.k < b.k;
        });
    });
    return pairs;
}

void Snap::compute_ui(const AtomStore& atoms, const NeighborList& full)
{
    const auto pairs = gather_pairs(atoms, full);
    n_atoms_ = atoms.n_local;
    if (n_atoms_ == 0) {
        return;
    }
    const std::size_t nu = basis_.u_size();
    if (u_re_.size() != n_atoms_ * nu) {
        u_re_ = DualArray<double>({n_atoms_, nu});
        u_im_ = DualArray<double>({n_atoms_, nu});
        y_re_ = DualArray<double>({n_atoms_, nu});
        y_im_ = DualArray<double>({n_atoms_, nu});
    }
    const Space space = knobs_.layout;
    for (auto* arr : {&u_re_, &u_im_}) {
        arr->clear_sync_state();
        arr->fill(space, 0.0);
        arr->modify(space);
    }
    const View ur = view(u_re_, space);
    const View ui = view(u_im_, space);

    // work items: (atom, batch of neighbors)
    std::vector<std::size_t> first(n_atoms_ + 1, 0);
    for (std::size_t i = 0; i < n_atoms_; ++i) {
        const std::size_t c = pairs[i].size();
        const std::size_t items = knobs_.batch_u == 0 ? 1 : std::max<std::size_t>(1, (c + knobs_.batch_u - 1) / knobs_.batch_u);
        first[i + 1] = first[i] + items;
    }
    const std::size_t workers = worker_count();
    std::vector<std::vector<double>> scratch(workers, std::vector<double>(4 * nu));
    parallel_for_dynamic(first[n_atoms_], workers, 16, [&](std::size_t w, std::size_t item) {
        const auto it = std::upper_bound(first.begin(), first.end(), item);
        const auto i = static_cast<std::size_t>(it - first.begin()) - 1;
        const bool split = first[i + 1] - first[i] > 1;
        const std::size_t c = pairs[i].size();
        const std::size_t begin = knobs_.batch_u == 0 ? 0 : (item - first[i]) * knobs_.batch_u;
        const std::size_t end = knobs_.batch_u == 0 ? c : std::min(c, begin + knobs_.batch_u);
        double* u_r = scratch[w].data();
        double* u_i = u_r + nu;
        double* s_r = u_i + nu;
        double* s_i = s_r + nu;
        std::fill(s_r, s_r + 2 * nu, 0.0);
        for (std::size_t n = begin; n < end; ++n) {
            const CayleyKlein ck = cayley_klein(pairs[i][n].d, params_.rcut, params_.rfac0);
            u_array(basis_, ck, u_r, u_i);
            for (std::size_t q = 0; q < nu; ++q) {
                s_r[q] += ck.fc * u_r[q];
                s_i[q] += ck.fc * u_i[q];
            }
        }
        for (std::size_t q = 0; q < nu; ++q) {
            if (split) {
                atomic_add(ur(i, q), s_r[q]);
                atomic_add(ui(i, q), s_i[q]);
            } else {
                ur(i, q) = s_r[q];
                ui(i, q) = s_i[q];
            }
        }
    });
}

void Snap::compute_yi()
{
    if (params_.beta.size() != basis_.n_b()) {
        throw ConfigError("snap: beta has the wrong number of components");
    }
    if (n_atoms_ == 0) {
        return;
    }
    const Space space = knobs_.layout;
    u_re_.sync(space);
    u_im_.sync(space);
    for (auto* arr : {&y_re_, &y_im_}) {
        arr->clear_sync_state();
        arr->fill(space, 0.0);
        arr->modify(space);
    }
    const View ur = view(u_re_, space);
    const View ui = view(u_im_, space);
    const View yr = view(y_re_, space);
    const View yi = view(y_im_, space);

    const auto& zl = basis_.z_list();
    std::vector<double> weight(zl.size());
    for (std::size_t n = 0; n < zl.size(); ++n) {
        weight[n] = basis_.beta_weight(zl[n].j1, zl[n].j2, zl[n].j, params_.beta);
    }
    const std::size_t tile = std::max<std::size_t>(knobs_.tile_v, 1);
    const std::size_t n_tiles = (n_atoms_ + tile - 1) / tile;
    const std::size_t zchunk = knobs_.batch_y == 0 ? zl.size() : knobs_.batch_y;
    const std::size_t n_chunks = std::max<std::size_t>(1, (zl.size() + zchunk - 1) / zchunk);
    const bool split = n_chunks > 1;

    parallel_for_dynamic(n_tiles * n_chunks, worker_count(), 4, [&](std::size_t, std::size_t item) {
        const std::size_t t = item / n_chunks;
        const std::size_t c = item % n_chunks;
        const std::size_t a0 = t * tile;
        const std::size_t a1 = std::min(n_atoms_, a0 + tile);
        const std::size_t z0 = c * zchunk;
        const std::size_t z1 = std::min(zl.size(), z0 + zchunk);
        for (std::size_t jjz = z0; jjz < z1; ++jjz) {
            const double w = weight[jjz];
            if (w == 0.0) {
                continue;
            }
            const auto jju = static_cast<std::size_t>(zl[jjz].jju);
            for (std::size_t a = a0; a < a1; ++a) {
                double zr = 0.0;
                double zi = 0.0;
                z_element(basis_, zl[jjz], ur, ui, a, zr, zi);
                if (split) {
                    atomic_add(yr(a, jju), w * zr);
                    atomic_add(yi(a, jju), w * zi);
                } else {
                    yr(a, jju) += w * zr;
                    yi(a, jju) += w * zi;
                }
            }
        }
    });
}

std::vector<double> Snap::compute_bi() const
{
    const std::size_t nb = basis_.n_b();
    std::vector<double> out(n_atoms_ * nb, 0.0);
    if (n_atoms_ == 0) {
        return out;
    }
    const Space space = knobs_.layout;
    if (u_re_.need_sync(space)) {
        throw Error("snap: U is not current in the requested layout");
    }
    const View ur = view(u_re_, space);
    const View ui = view(u_im_, space);
    const auto& zl = basis_.z_list();
    const auto w = half_weights(basis_);
    parallel_for_dynamic(n_atoms_, worker_count(), 8, [&](std::size_t, std::size_t a) {
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& t = basis_.b_list()[b];
            const std::size_t z0 = basis_.z_block(t.j1, t.j2, t.j);
            const std::size_t count = static_cast<std::size_t>((t.j / 2 + 1) * (t.j + 1));
            double sum = 0.0;
            for (std::size_t jjz = z0; jjz < z0 + count; ++jjz) {
                const auto jju = static_cast<std::size_t>(zl[jjz].jju);
                if (w[jju] == 0.0) {
                    continue;
                }
                double zr = 0.0;
                double zi = 0.0;
                z_element(basis_, zl[jjz], ur, ui, a, zr, zi);
                sum += w[jju] * (ur(a, jju) * zr + ui(a, jju) * zi);
            }
            out[a * nb + b] = 2.0 * sum;
        }
    });
    return out;
}

double Snap::energy_from_b() const
{
    const auto b = compute_bi();
    const std::size_t nb = basis_.n_b();
    double e = 0.0;
    for (std::size_t a = 0; a < n_atoms_; ++a) {
        for (std::size_t n = 0; n < nb; ++n) {
            e += params_.beta[n] * b[a * nb + n];
        }
    }
    return e;
}

double Snap::energy_from_adjoint() const
{
    if (n_atoms_ == 0) {
        return 0.0;
    }
    const auto w = half_weights(basis_);
    double e = 0.0;
    for (std::size_t a = 0; a < n_atoms_; ++a) {
        for (std::size_t q = 0; q < basis_.u_size(); ++q) {
            const auto uq = u(a, q);
            const auto yq = y(a, q);
            e += w[q] * (yq.real() * uq.real() + yq.imag() * uq.imag());
        }
    }
    return 2.0 * e / 3.0;
}

std::complex<double> Snap::u(std::size_t atom, std::size_t jju) const
{
    const Space space = u_re_.need_sync(knobs_.layout) ? other_space(knobs_.layout) : knobs_.layout;
    return {u_re_(space, atom, jju), u_im_(space, atom, jju)};
}

std::complex<double> Snap::y(std::size_t atom, std::size_t jju) const
{
    const Space space = y_re_.need_sync(knobs_.layout) ? other_space(knobs_.layout) : knobs_.layout;
    return {y_re_(space, atom, jju), y_im_(space, atom, jju)};
}

std::vector<double> Snap::compute_deidrj(const AtomStore& atoms, const NeighborList& full) const
{
    const auto pairs = gather_pairs(atoms, full);
    const std::size_t nu = basis_.u_size();
    ScatterAccumulator acc(3 * atoms.n_total(), knobs_.strategy);
    if (n_atoms_ == 0) {
        return acc.finalize();
    }
    if (n_atoms_ != atoms.n_local) {
        throw Error("snap: U/Y were computed for a different atom set");
    }
    const Space space = knobs_.layout;
    const View yr = view(y_re_, space);
    const View yi = view(y_im_, space);
    const auto w = half_weights(basis_);
    const std::size_t workers = acc.workers();

    if (knobs_.fused) {
        std::vector<std::vector<double>> scratch(workers, std::vector<double>(8 * nu));
        parallel_for_dynamic(n_atoms_, workers, 4, [&](std::size_t wk, std::size_t i) {
            double* u_r = scratch[wk].data();
            double* u_i = u_r + nu;
            double* du_r = u_i + nu;
            double* du_i = du_r + 3 * nu;
            for (const auto& p : pairs[i]) {
                const CayleyKlein ck = cayley_klein(p.d, params_.rcut, params_.rfac0);
                u_array(basis_, ck, u_r, u_i);
                du_array(basis_, ck, p.d, u_r, u_i, du_r, du_i);
                double dedr[3] = {0.0, 0.0, 0.0};
                for (std::size_t q = 0; q < nu; ++q) {
                    if (w[q] == 0.0) {
                        continue;
                    }
                    const double a = yr(i, q);
                    const double b = yi(i, q);
                    for (int k = 0; k < 3; ++k) {
                        dedr[k] += w[q] * (du_r[q * 3 + k] * a + du_i[q * 3 + k] * b);
                    }
                }
                for (double& v : dedr) {
                    v *= 2.0;
                }
                acc.add3(wk, i, {dedr[0], dedr[1], dedr[2]});
                acc.add3(wk, static_cast<std::size_t>(p.k), {-dedr[0], -dedr[1], -dedr[2]});
            }
        });
        return acc.finalize();
    }

    // split path: all derivative matrices first, then one contraction pass
    // per direction
    std::vector<std::size_t> offset(n_atoms_ + 1, 0);
    for (std::size_t i = 0; i < n_atoms_; ++i) {
        offset[i + 1] = offset[i] + pairs[i].size();
    }
    const std::size_t n_pairs = offset[n_atoms_];
    std::vector<double> dur(n_pairs * 3 * nu), dui(n_pairs * 3 * nu);
    std::vector<std::vector<double>> scratch(workers, std::vector<double>(2 * nu));
    parallel_for_dynamic(n_atoms_, workers, 4, [&](std::size_t wk, std::size_t i) {
        double* u_r = scratch[wk].data();
        double* u_i = u_r + nu;
        for (std::size_t n = 0; n < pairs[i].size(); ++n) {
            const auto& p = pairs[i][n];
            const CayleyKlein ck = cayley_klein(p.d, params_.rcut, params_.rfac0);
            u_array(basis_, ck, u_r, u_i);
            const std::size_t base = (offset[i] + n) * 3 * nu;
            du_array(basis_, ck, p.d, u_r, u_i, dur.data() + base, dui.data() + base);
        }
    });
    for (int k = 0; k < 3; ++k) {
        parallel_for_dynamic(n_atoms_, workers, 4, [&](std::size_t wk, std::size_t i) {
            for (std::size_t n = 0; n < pairs[i].size(); ++n) {
                const std::size_t base = (offset[i] + n) * 3 * nu;
                double dedr = 0.0;
                for (std::size_t q = 0; q < nu; ++q) {
                    if (w[q] == 0.0) {
                        continue;
                    }
                    dedr += w[q] * (dur[base + q * 3 + static_cast<std::size_t>(k)] * yr(i, q) +
                                    dui[base + q * 3 + static_cast<std::size_t>(k)] * yi(i, q));
                }
                dedr *= 2.0;
                acc.add(wk, 3 * i + static_cast<std::size_t>(k), dedr);
                acc.add(wk, 3 * static_cast<std::size_t>(pairs[i][n].k) + static_cast<std::size_t>(k), -dedr);
            }
        });
    }
    return acc.finalize();
}

SnapResult Snap::compute(const AtomStore& atoms, const NeighborList& full)
{
    compute_ui(atoms, full);
    compute_yi();
    SnapResult out;
    const auto b = compute_bi();
    const std::size_t nb = basis_.n_b();
    out.atom_energy.assign(n_atoms_, 0.0);
    for (std::size_t a = 0; a < n_atoms_; ++a) {
        double e = 0.0;
        for (std::size_t n = 0; n < nb; ++n) {
            e += params_.beta[n] * b[a * nb + n];
        }
        out.atom_energy[a] = e;
        out.energy += e;
    }
    out.forces = compute_deidrj(atoms, full);
    return out;
}

double compute_snap_system(Snap& snap, System& system, std::vector<NeighborList>& lists)
{
    system.zero_forces();
    double energy = 0.0;
    for (std::size_t r = 0; r < system.stores().size(); ++r) {
        AtomStore& atoms = system.stores()[r];
        atoms.positions.sync(Space::Host);
        const SnapResult res = snap.compute(atoms, lists[r]);
        accumulate_forces(atoms, res.forces);
        energy += res.energy;
    }
    system.reverse_comm();
    return energy;
}

} // namespace mdkk
