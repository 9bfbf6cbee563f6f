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

#include "beamacq/array.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace beamacq {

ArrayConfig ArrayConfig::make(int n_antennas, double carrier_freq_hz) {
    if (n_antennas < 2) throw std::invalid_argument("ArrayConfig: n_antennas must be >= 2");
    if (carrier_freq_hz <= 0.0) throw std::invalid_argument("ArrayConfig: carrier frequency must be positive");
    ArrayConfig cfg;
    cfg.n_antennas = n_antennas;
    cfg.carrier_freq_hz = carrier_freq_hz;
    cfg.wavelength_m = kSpeedOfLight / carrier_freq_hz;
    return cfg;
}

NoiseModel NoiseModel::make(double psd_w_per_hz, double noise_figure_db, double bandwidth_hz) {
    if (psd_w_per_hz <= 0.0 || bandwidth_hz <= 0.0)
        throw std::invalid_argument("NoiseModel: psd and bandwidth must be positive");
    if (noise_figure_db < 0.0)
        throw std::invalid_argument("NoiseModel: noise figure must be nonnegative");
    NoiseModel n;
    n.psd_w_per_hz = psd_w_per_hz;
    n.noise_figure_db = noise_figure_db;
    n.bandwidth_hz = bandwidth_hz;
    n.variance_w = psd_w_per_hz * std::pow(10.0, noise_figure_db / 10.0) * bandwidth_hz;
    return n;
}

Eigen::VectorXcd steering_vector(double angle_rad, int n_antennas) {
    constexpr double half_pi = std::numbers::pi / 2.0;
    if (!(angle_rad >= -half_pi && angle_rad <= half_pi))
        throw std::domain_error("steering_vector: angle outside [-pi/2, pi/2]");
    if (n_antennas < 1) throw std::invalid_argument("steering_vector: need at least one antenna");

    const double s = std::sin(angle_rad);
    Eigen::VectorXcd a(n_antennas);
    for (int i = 0; i < n_antennas; ++i)
        a(i) = std::polar(1.0, std::numbers::pi * i * s);
    return a;
}

PathParams path_params(const Target& target, const ArrayConfig& array, Rng& rng) {
    if (target.range_m <= 0.0) throw std::invalid_argument("path_params: range must be positive");
    if (target.rcs_m2 <= 0.0) throw std::invalid_argument("path_params: RCS must be positive");

    const double lambda = array.wavelength_m;
    const double four_pi = 4.0 * std::numbers::pi;
    const double gain2 = lambda * lambda * target.rcs_m2 /
                         (four_pi * four_pi * four_pi * std::pow(target.range_m, 4.0));

    PathParams p;
    p.gain = std::polar(std::sqrt(gain2), rng.uniform(0.0, 2.0 * std::numbers::pi));
    p.delay_s = 2.0 * target.range_m / kSpeedOfLight;
    p.doppler_hz = 2.0 * target.radial_speed_mps * array.carrier_freq_hz / kSpeedOfLight;
    p.angle_rad = target.angle_rad;
    return p;
}

double link_snr_db(const Target& target, double tx_power_w, const NoiseModel& noise,
                   const ArrayConfig& array) {
    if (tx_power_w <= 0.0) throw std::invalid_argument("link_snr_db: power must be positive");
    const double lambda = array.wavelength_m;
    const double four_pi = 4.0 * std::numbers::pi;
    const double path = lambda * lambda * target.rcs_m2 /
                        (four_pi * four_pi * four_pi * std::pow(target.range_m, 4.0));
    return 10.0 * std::log10(path * tx_power_w / noise.variance_w);
}

}  // namespace beamacq
