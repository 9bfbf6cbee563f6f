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

#ifndef BEAMACQ_HARNESS_HPP
#define BEAMACQ_HARNESS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "beamacq/strategy.hpp"

namespace beamacq {

/// Full experiment description: radio, codebook, scene, sweep, detection.
struct ExperimentConfig {
    // OTFS frame
    int n_doppler = 16;
    int m_delay = 16;
    double bandwidth_hz = 150e6;  // W; subcarrier spacing = W / M

    // array and front end
    int n_antennas = 32;
    int n_rf = 4;
    double carrier_hz = 30e9;

    // codebook
    int q_count = 8;
    double fov_lo_deg = -48.0;
    double fov_hi_deg = 48.0;

    // link budget
    double tx_power_dbm = 24.0;
    double noise_psd_w_per_hz = 2e-21;
    double noise_figure_db = 3.0;

    // strategy
    std::string strategy = "gs";
    int blocks = 0;  // fixed block count; 0 = adaptive
    int b_max = 12;
    int l_max = 3;

    // scene
    int n_targets = 2;
    std::string placement = "angle_separated";  // or "fixed"
    double target_range_m = 40.0;
    double target_speed_mps = 0.0;
    double target_rcs_m2 = 1.0;
    std::vector<double> fixed_angles_deg;  // used by placement = "fixed"

    // detection
    double pfa = 1e-3;
    double cfar_pfa = 1e-5;
    int cfar_window = 3;
    int cfar_guard = 1;
    double cfar_rank_fraction = 0.75;
    double epsilon_deg = 0.5;
    long min_exceedances = 50;

    // hypothesis grid (delay at the native 1/W resolution)
    int grid_angles = 144;
    int delay_bin_min = 16;
    int delay_bin_max = 104;
    int delay_bin_step = 1;
    int doppler_bin_half = 1;

    // sweep
    std::string sweep = "range";  // "range" | "blocks" | "none"
    std::vector<double> sweep_values{20, 35, 50, 65, 80};
    int trials = 200;

    std::uint64_t seed = 1;
    int workers = 0;  // 0: BEAMACQ_WORKERS env or hardware concurrency

    double subcarrier_hz() const { return bandwidth_hz / m_delay; }
    double tx_power_w() const;
    void validate() const;
};

ExperimentConfig desk_preset();
ExperimentConfig paper_preset();
ExperimentConfig preset_by_name(const std::string& name);

/// Flat key = value config file; '#' starts a comment. Unknown keys reject.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Shared per-sweep machinery built once from a config.
struct ExperimentSetup {
    ArrayConfig array;
    OtfsFrame frame;
    NoiseModel noise;
    Codebook codebook;
    ShiftTable shift_table;
    Eigen::VectorXcd tx_beam;
    std::shared_ptr<const HypothesisGrid> grid;
};

ExperimentSetup build_setup(const ExperimentConfig& cfg);

/// Targets for one trial under the configured placement rule.
std::vector<Target> place_targets(const ExperimentConfig& cfg, double range_m, Rng& rng);

/// Fraction of targets matched by a detection within epsilon of the true
/// angle, greedy nearest-first, each detection usable once.
double trial_pd(const AcquisitionResult& result, std::span<const Target> truth,
                double epsilon_rad);

/// Mean trial_pd over a batch of results sharing one truth list.
double compute_pd(std::span<const AcquisitionResult> results, std::span<const Target> truth,
                  double epsilon_rad);

/// 95% percentile bootstrap interval of the mean of per-trial Pd values.
std::pair<double, double> bootstrap_ci(std::span<const double> trial_values, int resamples,
                                       Rng& rng);

struct PdCurve {
    std::string sweep_name;
    std::vector<double> sweep_values;
    std::vector<double> pd;
    std::vector<double> ci_lo;
    std::vector<double> ci_hi;
    int trials = 0;
};

/// Monte Carlo sweep: per sweep value, `trials` independent acquisitions
/// with per-trial RNG streams derived from (seed, sweep index, trial index).
/// Results are independent of the worker count.
PdCurve run_sweep(const ExperimentConfig& cfg);

/// Per-trial Pd samples for one sweep value (the run_sweep inner loop).
std::vector<double> run_trials(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                               std::size_t sweep_index, double sweep_value);

/// Writes <prefix>.csv, <prefix>.dat (plot data) and <prefix>.manifest.json.
void emit_outputs(const PdCurve& curve, const std::string& prefix, const ExperimentConfig& cfg);

/// CSV round trip of the curve file.
PdCurve read_curve_csv(const std::string& path);

}  // namespace beamacq

#endif
