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

#include "beamacq/otfs.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace beamacq {

namespace {

Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> fft;
    return fft;
}

void fft_inplace(Eigen::VectorXcd& v, bool inverse) {
    auto& fft = fft_engine();
    Eigen::VectorXcd out(v.size());
    if (inverse)
        fft.inv(out, v);
    else
        fft.fwd(out, v);
    v.swap(out);
}

}  // namespace

OtfsFrame OtfsFrame::make(int n_doppler, int m_delay, double subcarrier_hz, int blocks) {
    if (n_doppler < 2 || m_delay < 2)
        throw std::invalid_argument("OtfsFrame: need N, M >= 2");
    if (subcarrier_hz <= 0.0)
        throw std::invalid_argument("OtfsFrame: subcarrier spacing must be positive");
    if (blocks < 1)
        throw std::invalid_argument("OtfsFrame: blocks must be >= 1");
    OtfsFrame f;
    f.n_doppler = n_doppler;
    f.m_delay = m_delay;
    f.subcarrier_hz = subcarrier_hz;
    f.symbol_s = 1.0 / subcarrier_hz;  // T * delta_f = 1
    f.blocks = blocks;
    return f;
}

Eigen::VectorXcd SymbolFrame::flattened() const {
    const auto n = symbols.rows();
    const auto m = symbols.cols();
    Eigen::VectorXcd v(n * m);
    for (Eigen::Index k = 0; k < n; ++k)
        v.segment(k * m, m) = symbols.row(k).transpose();
    return v;
}

SymbolFrame generate_symbols(const OtfsFrame& frame, Rng& rng) {
    const double amp = 1.0 / std::numbers::sqrt2;
    SymbolFrame sf;
    sf.symbols.resize(frame.n_doppler, frame.m_delay);
    for (int k = 0; k < frame.n_doppler; ++k)
        for (int l = 0; l < frame.m_delay; ++l) {
            const double re = rng.index(2) ? amp : -amp;
            const double im = rng.index(2) ? amp : -amp;
            sf.symbols(k, l) = {re, im};
        }
    return sf;
}

Eigen::MatrixXcd isfft(const Eigen::MatrixXcd& dd_grid) {
    const auto n = dd_grid.rows();
    const auto m = dd_grid.cols();
    // X[n,m] = 1/sqrt(NM) sum_{k,l} x[k,l] e^{j2pi(nk/N - ml/M)}
    Eigen::MatrixXcd out(n, m);
    auto& fft = fft_engine();
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::VectorXcd row = dd_grid.row(k).transpose();
        Eigen::VectorXcd f(m);
        fft.fwd(f, row);
        out.row(k) = f.transpose();
    }
    for (Eigen::Index c = 0; c < m; ++c) {
        Eigen::VectorXcd col = out.col(c);
        Eigen::VectorXcd f(n);
        fft.inv(f, col);
        out.col(c) = f;
    }
    return out * std::sqrt(static_cast<double>(n) / static_cast<double>(m));
}

Eigen::MatrixXcd sfft(const Eigen::MatrixXcd& tf_grid) {
    const auto n = tf_grid.rows();
    const auto m = tf_grid.cols();
    Eigen::MatrixXcd out(n, m);
    auto& fft = fft_engine();
    for (Eigen::Index c = 0; c < m; ++c) {
        Eigen::VectorXcd col = tf_grid.col(c);
        Eigen::VectorXcd f(n);
        fft.fwd(f, col);
        out.col(c) = f;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::VectorXcd row = out.row(k).transpose();
        Eigen::VectorXcd f(m);
        fft.inv(f, row);
        out.row(k) = f.transpose();
    }
    return out * std::sqrt(static_cast<double>(m) / static_cast<double>(n));
}

Eigen::VectorXcd otfs_modulate(const OtfsFrame& frame, const Eigen::MatrixXcd& dd_grid) {
    const int n = frame.n_doppler;
    const int m = frame.m_delay;
    if (dd_grid.rows() != n || dd_grid.cols() != m)
        throw std::invalid_argument("otfs_modulate: grid shape mismatch");

    // s[n*M + l] = (1/sqrt(N)) sum_k x[k,l] e^{j2pi nk/N}
    auto& fft = fft_engine();
    Eigen::MatrixXcd slots(n, m);
    const double scale = std::sqrt(static_cast<double>(n));
    for (int l = 0; l < m; ++l) {
        Eigen::VectorXcd col = dd_grid.col(l);
        Eigen::VectorXcd f(n);
        fft.inv(f, col);
        slots.col(l) = f * scale;
    }
    Eigen::VectorXcd s(n * m);
    for (int slot = 0; slot < n; ++slot)
        s.segment(slot * m, m) = slots.row(slot).transpose();
    return s;
}

Eigen::MatrixXcd otfs_demodulate(const OtfsFrame& frame, const Eigen::VectorXcd& samples) {
    const int n = frame.n_doppler;
    const int m = frame.m_delay;
    if (samples.size() != n * m)
        throw std::invalid_argument("otfs_demodulate: sample count mismatch");

    auto& fft = fft_engine();
    Eigen::MatrixXcd slots(n, m);
    for (int slot = 0; slot < n; ++slot)
        slots.row(slot) = samples.segment(slot * m, m).transpose();
    Eigen::MatrixXcd dd(n, m);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int l = 0; l < m; ++l) {
        Eigen::VectorXcd col = slots.col(l);
        Eigen::VectorXcd f(n);
        fft.fwd(f, col);
        dd.col(l) = f * scale;
    }
    return dd;
}

Eigen::VectorXcd apply_delay_doppler(const OtfsFrame& frame, const Eigen::VectorXcd& samples,
                                     double doppler_hz, double delay_s) {
    const int total = frame.samples();
    if (samples.size() != total)
        throw std::invalid_argument("apply_delay_doppler: sample count mismatch");
    if (std::abs(delay_s) >= frame.block_duration_s())
        throw std::domain_error("apply_delay_doppler: delay exceeds block duration");

    const double w = frame.bandwidth_hz();
    Eigen::VectorXcd v = samples;
    fft_inplace(v, false);
    for (int i = 0; i < total; ++i) {
        const int bin = (i <= total / 2) ? i : i - total;  // signed frequency
        const double f = bin * w / total;
        v(i) *= std::polar(1.0, -2.0 * std::numbers::pi * f * delay_s);
    }
    fft_inplace(v, true);
    for (int q = 0; q < total; ++q)
        v(q) *= std::polar(1.0, 2.0 * std::numbers::pi * doppler_hz * q / w);
    return v;
}

Eigen::VectorXcd crosstalk_apply(double doppler_hz, double delay_s, const OtfsFrame& frame,
                                 const Eigen::VectorXcd& x) {
    const int n = frame.n_doppler;
    const int m = frame.m_delay;
    if (x.size() != n * m)
        throw std::invalid_argument("crosstalk_apply: symbol vector length mismatch");

    Eigen::MatrixXcd grid(n, m);
    for (int k = 0; k < n; ++k)
        grid.row(k) = x.segment(k * m, m).transpose();
    const Eigen::VectorXcd s = otfs_modulate(frame, grid);
    const Eigen::VectorXcd r = apply_delay_doppler(frame, s, doppler_hz, delay_s);
    const Eigen::MatrixXcd y = otfs_demodulate(frame, r);
    Eigen::VectorXcd out(n * m);
    for (int k = 0; k < n; ++k)
        out.segment(k * m, m) = y.row(k).transpose();
    return out;
}

CrosstalkMatrix crosstalk_matrix(double doppler_hz, double delay_s, const OtfsFrame& frame) {
    const int total = frame.samples();
    CrosstalkMatrix psi;
    psi.doppler_hz = doppler_hz;
    psi.delay_s = delay_s;
    psi.entries.resize(total, total);
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(total);
    for (int c = 0; c < total; ++c) {
        e(c) = 1.0;
        psi.entries.col(c) = crosstalk_apply(doppler_hz, delay_s, frame, e);
        e(c) = 0.0;
    }
    return psi;
}

std::shared_ptr<const CrosstalkMatrix> CrosstalkCache::get(double doppler_hz, double delay_s) {
    const std::pair<double, double> key{doppler_hz, delay_s};
    {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) return it->second;
    }
    auto built = std::make_shared<const CrosstalkMatrix>(
        crosstalk_matrix(doppler_hz, delay_s, frame_));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.try_emplace(key, std::move(built));
    return it->second;
}

std::size_t CrosstalkCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

Eigen::VectorXcd beam_gains(const Eigen::MatrixXcd& u_matrix, const Eigen::VectorXcd& f,
                            double angle_rad) {
    if (u_matrix.rows() != f.size())
        throw std::invalid_argument("beam_gains: U and f row mismatch");
    const Eigen::VectorXcd a = steering_vector(angle_rad, static_cast<int>(f.size()));
    const std::complex<double> tx = a.dot(f);  // a^H f
    return (u_matrix.adjoint() * a) * tx;
}

Eigen::VectorXcd effective_channel_apply(const Eigen::MatrixXcd& u_matrix,
                                         const Eigen::VectorXcd& f, double angle_rad,
                                         const CrosstalkMatrix& psi, const Eigen::VectorXcd& x) {
    if (psi.entries.cols() != x.size())
        throw std::invalid_argument("effective_channel_apply: Psi/x shape mismatch");
    const Eigen::VectorXcd g = beam_gains(u_matrix, f, angle_rad);
    const Eigen::VectorXcd z = psi.entries * x;
    const auto nm = z.size();
    Eigen::VectorXcd out(g.size() * nm);
    for (Eigen::Index q = 0; q < g.size(); ++q)
        out.segment(q * nm, nm) = g(q) * z;
    return out;
}

BlockObservation synthesize_rx_block(std::span<const PathParams> paths,
                                     const Eigen::MatrixXcd& u_matrix, const Eigen::VectorXcd& f,
                                     const SymbolFrame& symbols, const OtfsFrame& frame,
                                     const NoiseModel& noise, Rng& rng,
                                     double tx_amplitude, int block_index) {
    const int nm = frame.samples();
    const auto n_rf = u_matrix.cols();
    const Eigen::VectorXcd x = symbols.flattened() * tx_amplitude;

    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n_rf * nm);
    for (const PathParams& p : paths) {
        const std::complex<double> h_eff =
            p.gain * std::polar(1.0, 2.0 * std::numbers::pi * p.delay_s * p.doppler_hz);
        const Eigen::VectorXcd z = crosstalk_apply(p.doppler_hz, p.delay_s, frame, x);
        const Eigen::VectorXcd g = beam_gains(u_matrix, f, p.angle_rad);
        for (Eigen::Index q = 0; q < n_rf; ++q)
            y.segment(q * nm, nm) += (h_eff * g(q)) * z;
    }
    if (noise.variance_w > 0.0) {
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y(i) += rng.cnormal(noise.variance_w);
    }

    BlockObservation obs;
    obs.samples = std::move(y);
    obs.block_index = block_index;
    obs.reduction = u_matrix;
    return obs;
}

}  // namespace beamacq
