// SPDX-License-Identifier: Apache-2.0
//
// beamacq: OTFS ISAC beam-acquisition simulator for hybrid digital-analog arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "beamacq/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace beamacq {

namespace {

// Steering matrix over a sin-space grid: column g = a(s_g), N_a x G.
Eigen::MatrixXcd steering_grid(int n_antennas, const Eigen::VectorXd& sins) {
    Eigen::MatrixXcd a(n_antennas, sins.size());
    for (Eigen::Index g = 0; g < sins.size(); ++g)
        for (int i = 0; i < n_antennas; ++i)
            a(i, g) = std::polar(1.0, std::numbers::pi * i * sins(g));
    return a;
}

Eigen::VectorXcd conj_steering_sin(int n_antennas, double s) {
    Eigen::VectorXcd u(n_antennas);
    for (int i = 0; i < n_antennas; ++i)
        u(i) = std::polar(1.0 / std::sqrt(static_cast<double>(n_antennas)),
                          -std::numbers::pi * i * s);
    return u;
}

// Partial Loewdin orthogonalization U <- U (U^H U)^(-beta), columns renormalized.
void partial_orthogonalize(Eigen::MatrixXcd& u, double beta) {
    const Eigen::MatrixXcd gram = u.adjoint() * u;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
    const Eigen::VectorXd ev = es.eigenvalues();
    Eigen::VectorXd scaled(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) <= 0.0)
            throw std::runtime_error("build_codebook: degenerate codeword set");
        scaled(i) = std::pow(ev(i), -beta);
    }
    u = u * es.eigenvectors() * scaled.asDiagonal() * es.eigenvectors().adjoint();
    for (Eigen::Index c = 0; c < u.cols(); ++c) u.col(c).normalize();
}

}  // namespace

double Codebook::sin_lo() const { return std::sin(fov_lo_rad); }
double Codebook::sin_hi() const { return std::sin(fov_hi_rad); }

int Codebook::sector_of_sin(double s) const {
    const int q = static_cast<int>(std::floor((s - sin_lo()) / delta_sin));
    return std::clamp(q, 0, size() - 1);
}

double Codebook::sector_center_sin(int q) const {
    return sin_lo() + (q + 0.5) * delta_sin;
}

Codeword design_flattop(const ArrayConfig& array, double center_sin, double width_sin,
                        const FlattopOptions& opts) {
    const int na = array.n_antennas;
    const double bin = 2.0 / na;  // aperture resolution in sin units
    if (width_sin < bin * (1.0 - 1e-9))
        throw std::runtime_error("design_flattop: width below the aperture resolution 2/N_a");
    if (center_sin - width_sin / 2 < -1.0 || center_sin + width_sin / 2 > 1.0)
        throw std::domain_error("design_flattop: beam span outside [-1, 1] in sin space");

    if (width_sin < 1.75 * bin) {
        // Narrow regime: the flat-top mask is unconstraining and the steered
        // beam is the attainable shape.
        Codeword cw;
        cw.weights = conj_steering_sin(na, center_sin);
        cw.center_sin = center_sin;
        cw.width_sin = width_sin;
        return cw;
    }

    Eigen::VectorXd sins(opts.grid_points);
    for (int g = 0; g < opts.grid_points; ++g)
        sins(g) = -1.0 + 2.0 * g / opts.grid_points;
    const Eigen::MatrixXcd a = steering_grid(na, sins);

    const double level = std::sqrt(2.0 / width_sin);
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(opts.grid_points);
    Eigen::VectorXd wt(opts.grid_points);
    for (int g = 0; g < opts.grid_points; ++g) {
        const double d = std::abs(sins(g) - center_sin);
        if (d <= width_sin / 2) {
            mask(g) = level;
            wt(g) = 1.0;
        } else if (d >= width_sin / 2 + bin) {
            wt(g) = opts.stopband_weight;
        } else {
            wt(g) = 0.0;  // transition band is don't-care
        }
    }

    // Normal-equation factor for the weighted least-squares refit.
    const Eigen::MatrixXcd awa =
        (a * wt.asDiagonal()) * a.adjoint() +
        1e-9 * Eigen::MatrixXcd::Identity(na, na);
    const Eigen::LDLT<Eigen::MatrixXcd> solver(awa);

    // Start from the band-integrated conjugate steering sum.
    Eigen::VectorXcd u = Eigen::VectorXcd::Zero(na);
    for (int g = 0; g < opts.grid_points; ++g)
        if (mask(g) > 0.0) u += a.col(g).conjugate();
    u.normalize();

    double prev_obj = -1.0;
    for (int it = 0; it < opts.max_iterations; ++it) {
        Eigen::VectorXcd pattern = a.adjoint() * u;
        Eigen::VectorXcd target(opts.grid_points);
        for (int g = 0; g < opts.grid_points; ++g) {
            const double mag = std::abs(pattern(g));
            target(g) = (mag > 0.0) ? mask(g) * pattern(g) / mag
                                    : std::complex<double>(mask(g), 0.0);
        }
        u = solver.solve((a * wt.asDiagonal()) * target);
        u.normalize();

        pattern = a.adjoint() * u;
        double obj = 0.0;
        for (int g = 0; g < opts.grid_points; ++g) {
            const double e = std::abs(pattern(g)) - mask(g);
            obj += wt(g) * e * e;
        }
        if (prev_obj >= 0.0 && std::abs(prev_obj - obj) < opts.stall_tol * std::max(prev_obj, 1e-12))
            break;
        prev_obj = obj;
    }

    Codeword cw;
    cw.weights = u;
    cw.center_sin = center_sin;
    cw.width_sin = width_sin;
    return cw;
}

Codebook build_codebook(const ArrayConfig& array, double fov_lo_rad, double fov_hi_rad,
                        int q_count) {
    if (q_count <= 1) throw std::invalid_argument("build_codebook: need Q > 1");
    if (fov_hi_rad <= fov_lo_rad) throw std::invalid_argument("build_codebook: empty field of view");

    Codebook cb;
    cb.fov_lo_rad = fov_lo_rad;
    cb.fov_hi_rad = fov_hi_rad;
    const double slo = std::sin(fov_lo_rad);
    const double shi = std::sin(fov_hi_rad);
    cb.delta_sin = (shi - slo) / q_count;

    const double bin = 2.0 / array.n_antennas;
    const double width = std::max(cb.delta_sin - 0.5 * bin, bin);

    Eigen::MatrixXcd u(array.n_antennas, q_count);
    cb.codewords.resize(q_count);
    for (int q = 0; q < q_count; ++q) {
        const double center = slo + (q + 0.5) * cb.delta_sin;
        cb.codewords[q] = design_flattop(array, center, width);
        u.col(q) = cb.codewords[q].weights;
    }

    partial_orthogonalize(u, 0.3);
    for (int q = 0; q < q_count; ++q) cb.codewords[q].weights = u.col(q);
    return cb;
}

Codeword grid_shift(const Codeword& u, double delta_sin) {
    const double lo = u.center_sin + delta_sin - u.width_sin / 2;
    const double hi = u.center_sin + delta_sin + u.width_sin / 2;
    if (lo < -1.0 || hi > 1.0)
        throw std::domain_error("grid_shift: shifted span leaves [-1, 1] in sin space");

    Codeword out = u;
    for (Eigen::Index i = 0; i < u.weights.size(); ++i)
        out.weights(i) = u.weights(i) * std::polar(1.0, -std::numbers::pi * i * delta_sin);
    out.center_sin = u.center_sin + delta_sin;
    return out;
}

Codeword circ_shift(const Codeword& u, int k) {
    const auto na = u.weights.size();
    const auto kk = ((k % na) + na) % na;
    Codeword out = u;
    for (Eigen::Index i = 0; i < na; ++i)
        out.weights((i + kk) % na) = u.weights(i);
    return out;
}

std::vector<int> babel_select(const Codeword& u, int l_max) {
    const int na = static_cast<int>(u.weights.size());
    if (l_max < 2 || l_max > na)
        throw std::invalid_argument("babel_select: l_max must be in [2, N_a]");

    // |<Gamma(u,i), Gamma(u,j)>| depends only on (i - j) mod N_a.
    std::vector<double> coh(na, 0.0);
    for (int d = 1; d < na; ++d) {
        std::complex<double> acc = 0.0;
        for (int i = 0; i < na; ++i)
            acc += std::conj(u.weights(i)) * u.weights((i + d) % na);
        coh[d] = std::abs(acc);
    }

    // Enumerate difference structures: subsets containing 0. The objective of
    // a subset is translation invariant, so this covers every multiset of
    // pairwise differences once.
    std::vector<int> subset(l_max);
    subset[0] = 0;
    std::vector<int> best;
    double best_obj = std::numeric_limits<double>::infinity();
    constexpr double tie_tol = 1e-12;

    auto canonical = [&](const std::vector<int>& s) {
        std::vector<int> best_rep = s;
        std::sort(best_rep.begin(), best_rep.end());
        std::vector<int> cand(s.size());
        for (int t = 1; t < na; ++t) {
            for (std::size_t i = 0; i < s.size(); ++i) cand[i] = (s[i] + t) % na;
            std::sort(cand.begin(), cand.end());
            if (cand < best_rep) best_rep = cand;
        }
        return best_rep;
    };

    auto consider = [&](const std::vector<int>& s) {
        double obj = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t j = i + 1; j < s.size(); ++j)
                obj += 2.0 * coh[((s[j] - s[i]) % na + na) % na];
        if (obj < best_obj - tie_tol) {
            best_obj = obj;
            best = canonical(s);
        } else if (obj < best_obj + tie_tol) {
            auto rep = canonical(s);
            if (rep < best) best = rep;
        }
    };

    // Recursive choice of the remaining l_max - 1 members from {1..N_a-1}.
    auto recurse = [&](auto&& self, int depth, int start) -> void {
        if (depth == l_max) {
            consider(subset);
            return;
        }
        for (int v = start; v < na; ++v) {
            subset[depth] = v;
            self(self, depth + 1, v + 1);
        }
    };
    recurse(recurse, 1, 1);
    return best;
}

ShiftTable build_shift_table(const Codebook& cb, int l_max) {
    ShiftTable table;
    table.l_max = l_max;
    table.shifts.reserve(cb.codewords.size());
    for (const Codeword& cw : cb.codewords) {
        // Select l_max + 1 atoms including the unshifted reference, then use
        // the nonzero ones as the replacement sequence.
        std::vector<int> sel = babel_select(cw, l_max + 1);
        std::vector<int> usable;
        for (int s : sel)
            if (s != 0) usable.push_back(s);
        if (static_cast<int>(usable.size()) > l_max) usable.resize(l_max);
        table.shifts.push_back(std::move(usable));
    }
    return table;
}

Eigen::VectorXd beam_pattern(const Codeword& u, const std::vector<double>& angles_rad) {
    const int na = static_cast<int>(u.weights.size());
    Eigen::VectorXd pat(static_cast<Eigen::Index>(angles_rad.size()));
    for (std::size_t g = 0; g < angles_rad.size(); ++g) {
        const std::complex<double> v = u.weights.dot(steering_vector(angles_rad[g], na));
        pat(static_cast<Eigen::Index>(g)) = std::norm(v);
    }
    return pat;
}

WeightProfile weight_profile(const std::vector<Codeword>& beams,
                             const std::vector<double>& angles_rad) {
    if (angles_rad.empty()) throw std::invalid_argument("weight_profile: empty angular grid");
    if (beams.empty()) throw std::invalid_argument("weight_profile: no beams");

    WeightProfile wp;
    wp.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(angles_rad.size()));
    for (const Codeword& cw : beams)
        wp.values = wp.values.cwiseMax(beam_pattern(cw, angles_rad));
    const double peak = wp.values.maxCoeff();
    if (peak > 0.0) wp.values /= peak;
    return wp;
}

void save_codebook(const Codebook& cb, const ShiftTable* table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_codebook: cannot open " + path);
    out.precision(17);
    out << "# beamacq codebook v1\n";
    out << "fov_rad " << cb.fov_lo_rad << " " << cb.fov_hi_rad << "\n";
    out << "delta_sin " << cb.delta_sin << "\n";
    out << "codewords " << cb.codewords.size() << "\n";
    for (const Codeword& cw : cb.codewords) {
        out << "cw " << cw.center_sin << " " << cw.width_sin << " " << cw.weights.size();
        for (Eigen::Index i = 0; i < cw.weights.size(); ++i)
            out << " " << cw.weights(i).real() << " " << cw.weights(i).imag();
        out << "\n";
    }
    if (table) {
        out << "shift_table " << table->l_max << "\n";
        for (const auto& row : table->shifts) {
            out << "shifts " << row.size();
            for (int s : row) out << " " << s;
            out << "\n";
        }
    }
    if (!out) throw std::runtime_error("save_codebook: write failed for " + path);
}

Codebook load_codebook(const std::string& path, ShiftTable* table_out) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_codebook: cannot open " + path);

    Codebook cb;
    std::string line;
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "fov_rad") {
            ss >> cb.fov_lo_rad >> cb.fov_hi_rad;
        } else if (tag == "delta_sin") {
            ss >> cb.delta_sin;
        } else if (tag == "codewords") {
            ss >> expected;
        } else if (tag == "cw") {
            Codeword cw;
            Eigen::Index n = 0;
            ss >> cw.center_sin >> cw.width_sin >> n;
            cw.weights.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                double re = 0.0, im = 0.0;
                ss >> re >> im;
                cw.weights(i) = {re, im};
            }
            if (!ss) throw std::runtime_error("load_codebook: malformed codeword record");
            cb.codewords.push_back(std::move(cw));
        } else if (tag == "shift_table") {
            if (table_out) ss >> table_out->l_max;
        } else if (tag == "shifts") {
            if (!table_out) continue;
            std::size_t n = 0;
            ss >> n;
            std::vector<int> row(n);
            for (auto& v : row) ss >> v;
            table_out->shifts.push_back(std::move(row));
        } else {
            throw std::runtime_error("load_codebook: unknown record '" + tag + "'");
        }
    }
    if (cb.codewords.size() != expected)
        throw std::runtime_error("load_codebook: codeword count mismatch");
    return cb;
}

}  // namespace beamacq
