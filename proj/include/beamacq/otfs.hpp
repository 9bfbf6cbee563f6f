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

#ifndef BEAMACQ_OTFS_HPP
#define BEAMACQ_OTFS_HPP

#include <complex>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "beamacq/array.hpp"
#include "beamacq/rng.hpp"

namespace beamacq {

/// OTFS frame geometry: N Doppler (time) slots, M delay (subcarrier) bins,
/// T * delta_f = 1, bandwidth W = M * delta_f, block duration N * T.
struct OtfsFrame {
    int n_doppler = 0;          // N
    int m_delay = 0;            // M
    double subcarrier_hz = 0.0; // delta_f
    double symbol_s = 0.0;      // T = 1 / delta_f
    int blocks = 1;             // B

    static OtfsFrame make(int n_doppler, int m_delay, double subcarrier_hz, int blocks = 1);

    double bandwidth_hz() const { return m_delay * subcarrier_hz; }
    double block_duration_s() const { return n_doppler * symbol_s; }
    int samples() const { return n_doppler * m_delay; }
};

/// One block of delay-Doppler data symbols, N x M, unit average energy.
struct SymbolFrame {
    Eigen::MatrixXcd symbols;  // row k = Doppler, col l = delay

    Eigen::VectorXcd flattened() const;  // index k*M + l
};

/// i.i.d. QPSK grid, deterministic under the RNG seed.
SymbolFrame generate_symbols(const OtfsFrame& frame, Rng& rng);

/// Inverse symplectic finite Fourier transform, N x M delay-Doppler grid to
/// the time-frequency grid; sfft is its inverse.
Eigen::MatrixXcd isfft(const Eigen::MatrixXcd& dd_grid);
Eigen::MatrixXcd sfft(const Eigen::MatrixXcd& tf_grid);

/// ISFFT + Heisenberg transform with rectangular pulses, sampled at rate W.
/// Collapses to the Zak form s[n*M + l] = (1/sqrt(N)) sum_k x[k,l] e^{j2pi nk/N}.
Eigen::VectorXcd otfs_modulate(const OtfsFrame& frame, const Eigen::MatrixXcd& dd_grid);

/// Wigner transform (rectangular receive pulse) + SFFT; inverse of otfs_modulate.
Eigen::MatrixXcd otfs_demodulate(const OtfsFrame& frame, const Eigen::VectorXcd& samples);

/// Band-limited cyclic fractional delay (DFT phase ramp over signed
/// frequencies) followed by the Doppler ramp e^{j 2 pi nu t}, t = q / W.
/// Exactly energy preserving.
Eigen::VectorXcd apply_delay_doppler(const OtfsFrame& frame, const Eigen::VectorXcd& samples,
                                     double doppler_hz, double delay_s);

/// Psi(nu, tau) x without materializing the matrix: modulate, pass through
/// the delay-Doppler channel, demodulate. x is the flattened N*M symbol vector.
Eigen::VectorXcd crosstalk_apply(double doppler_hz, double delay_s, const OtfsFrame& frame,
                                 const Eigen::VectorXcd& x);

/// Dense delay-Doppler crosstalk matrix, Psi(nu, tau), index k*M + l.
/// Column (k', l') is the demodulated response to a unit impulse at (k', l').
struct CrosstalkMatrix {
    Eigen::MatrixXcd entries;
    double doppler_hz = 0.0;
    double delay_s = 0.0;
};

CrosstalkMatrix crosstalk_matrix(double doppler_hz, double delay_s, const OtfsFrame& frame);

/// Concurrent-read cache of crosstalk matrices keyed by (nu, tau).
class CrosstalkCache {
public:
    explicit CrosstalkCache(const OtfsFrame& frame) : frame_(frame) {}

    std::shared_ptr<const CrosstalkMatrix> get(double doppler_hz, double delay_s);
    std::size_t size() const;

private:
    OtfsFrame frame_;
    mutable std::shared_mutex mutex_;
    std::map<std::pair<double, double>, std::shared_ptr<const CrosstalkMatrix>> entries_;
};

/// Receive beam-space gains through the hybrid front end at a hypothesis
/// angle: g = (a(phi)^H f) * U^H a(phi), length N_rf.
Eigen::VectorXcd beam_gains(const Eigen::MatrixXcd& u_matrix, const Eigen::VectorXcd& f,
                            double angle_rad);

/// ((U^H a a^H f) kron Psi) x via the factored form: stacks g_q * (Psi x).
Eigen::VectorXcd effective_channel_apply(const Eigen::MatrixXcd& u_matrix,
                                         const Eigen::VectorXcd& f, double angle_rad,
                                         const CrosstalkMatrix& psi, const Eigen::VectorXcd& x);

/// One received block y_b = sum_p h'_p G_b(nu_p,tau_p,phi_p) x + w, with
/// h'_p = h_p e^{j 2 pi tau_p nu_p} and w ~ CN(0, sigma_w^2 I).
struct BlockObservation {
    Eigen::VectorXcd samples;   // length N_rf * N * M
    int block_index = 0;
    Eigen::MatrixXcd reduction; // the U_b that produced it
};

BlockObservation synthesize_rx_block(std::span<const PathParams> paths,
                                     const Eigen::MatrixXcd& u_matrix, const Eigen::VectorXcd& f,
                                     const SymbolFrame& symbols, const OtfsFrame& frame,
                                     const NoiseModel& noise, Rng& rng,
                                     double tx_amplitude = 1.0, int block_index = 0);

}  // namespace beamacq

#endif
