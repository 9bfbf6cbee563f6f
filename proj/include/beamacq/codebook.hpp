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

#ifndef BEAMACQ_CODEBOOK_HPP
#define BEAMACQ_CODEBOOK_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beamacq/array.hpp"

namespace beamacq {

/// Unit-norm beamforming weights with a nominal flat passband in sin-angle
/// space: [center_sin - width_sin/2, center_sin + width_sin/2].
struct Codeword {
    Eigen::VectorXcd weights;
    double center_sin = 0.0;
    double width_sin = 0.0;
};

/// Q flat-top beams uniformly spaced in sin space covering the field of view.
struct Codebook {
    std::vector<Codeword> codewords;
    double fov_lo_rad = 0.0;
    double fov_hi_rad = 0.0;
    double delta_sin = 0.0;  // sector spacing in sin space, sin-span / Q

    int size() const { return static_cast<int>(codewords.size()); }
    double sin_lo() const;
    double sin_hi() const;
    /// Index of the sector whose sin-span contains s (clamped to [0, Q-1]).
    int sector_of_sin(double s) const;
    double sector_center_sin(int q) const;
};

struct FlattopOptions {
    int grid_points = 2048;
    int max_iterations = 300;
    double stall_tol = 1e-6;
    double stopband_weight = 0.5;
};

/// Flat-top synthesis by alternating magnitude least squares. The target
/// in-band level is sqrt(2/width) so that the unit-norm Parseval budget is
/// spent uniformly across the passband. Widths below ~1.75 aperture bins
/// degenerate to the conjugate steering vector, which is the optimum shape
/// the aperture supports there.
Codeword design_flattop(const ArrayConfig& array, double center_sin, double width_sin,
                        const FlattopOptions& opts = {});

/// Build the Q-sector codebook over [fov_lo, fov_hi]. Individual beams are
/// synthesized with a one-bin guard between passbands and the set is then
/// partially Loewdin-orthogonalized to meet the cross-coherence contract
/// without disturbing the patterns.
Codebook build_codebook(const ArrayConfig& array, double fov_lo_rad, double fov_hi_rad,
                        int q_count);

/// Translate the beam pattern by delta_sin in sin space via the phase ramp
/// e^{-j pi i delta_sin} on element i.
Codeword grid_shift(const Codeword& u, double delta_sin);

/// Circularly rotate the weights by k positions; the pattern magnitude is
/// unchanged at every angle.
Codeword circ_shift(const Codeword& u, int k);

/// The size-l_max subset of {0..N_a-1} minimizing the summed pairwise
/// coherence of the circularly shifted codeword copies. Exhaustive search
/// reduced by the shift-difference structure; ties resolved to the
/// lexicographically smallest set.
std::vector<int> babel_select(const Codeword& u, int l_max);

/// Per-codeword circular shifts for the CS strategy: the most incoherent
/// (l_max + 1)-set including the unshifted reference, with the reference
/// stripped, leaving l_max usable shifts per codeword.
struct ShiftTable {
    std::vector<std::vector<int>> shifts;
    int l_max = 0;
};

ShiftTable build_shift_table(const Codebook& cb, int l_max);

/// |u^H a(phi)|^2 for each grid angle.
Eigen::VectorXd beam_pattern(const Codeword& u, const std::vector<double>& angles_rad);

/// Normalized receive beam pattern of a set of codewords over the angular
/// grid: max over codewords of |u_q^H a(phi)|^2, scaled to peak 1.
struct WeightProfile {
    Eigen::VectorXd values;
};

WeightProfile weight_profile(const std::vector<Codeword>& beams,
                             const std::vector<double>& angles_rad);

/// Text serialization: header lines, then one record per codeword
/// (center, width, re/im weight pairs), then optional shift-table records.
void save_codebook(const Codebook& cb, const ShiftTable* table, const std::string& path);
Codebook load_codebook(const std::string& path, ShiftTable* table_out = nullptr);

}  // namespace beamacq

#endif
