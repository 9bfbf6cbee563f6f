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

#ifndef BEAMACQ_ARRAY_HPP
#define BEAMACQ_ARRAY_HPP

#include <complex>

#include <Eigen/Dense>

#include "beamacq/rng.hpp"

namespace beamacq {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Uniform linear array with half-wavelength element spacing.
struct ArrayConfig {
    int n_antennas = 0;
    double carrier_freq_hz = 0.0;
    double wavelength_m = 0.0;

    static ArrayConfig make(int n_antennas, double carrier_freq_hz);
};

/// A point scatterer: monostatic range, radial speed, angle of arrival, RCS.
struct Target {
    double range_m = 0.0;
    double radial_speed_mps = 0.0;
    double angle_rad = 0.0;  // in [-pi/2, pi/2]
    double rcs_m2 = 1.0;
};

/// Round-trip channel parameters derived from a Target.
struct PathParams {
    std::complex<double> gain;  // h_p, |h|^2 from the two-way radar equation
    double delay_s = 0.0;       // 2 d / c
    double doppler_hz = 0.0;    // 2 v f_c / c
    double angle_rad = 0.0;
};

/// Receiver noise: variance_w = psd * 10^(NF/10) * bandwidth.
struct NoiseModel {
    double psd_w_per_hz = 0.0;
    double noise_figure_db = 0.0;
    double bandwidth_hz = 0.0;
    double variance_w = 0.0;

    static NoiseModel make(double psd_w_per_hz, double noise_figure_db, double bandwidth_hz);
};

/// ULA response a(phi), element i (0-based) = exp(j*pi*i*sin(phi)). ||a||^2 = n.
Eigen::VectorXcd steering_vector(double angle_rad, int n_antennas);

/// Channel parameters for a target. The gain magnitude follows the two-way
/// radar equation; the phase is drawn uniformly on [0, 2pi) and held constant
/// for the coherence processing interval.
PathParams path_params(const Target& target, const ArrayConfig& array, Rng& rng);

/// Isotropic SNR at the radar receiver in dB (no array or beamforming gain).
double link_snr_db(const Target& target, double tx_power_w, const NoiseModel& noise,
                   const ArrayConfig& array);

}  // namespace beamacq

#endif
