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

#ifndef BEAMACQ_STRATEGY_HPP
#define BEAMACQ_STRATEGY_HPP

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "beamacq/detector.hpp"

namespace beamacq {

enum class Strategy { GS, CS, Random };

Strategy strategy_from_string(const std::string& name);
std::string to_string(Strategy s);

/// Relative grid-shift for a track entering level `level` (>= 2), given the
/// hypothesis observed on the previous probe. The opening shift is
/// delta_1 = +Delta/2; level 2 overrides the negative branch with -2 so a
/// miss undoes the first probe and tests the opposite half of the beam.
double gs_next_delta(int level, bool positive, double prev_delta);

/// One adaptively probed sector. A track opens at level 0 when its sector
/// first detects, occupies one RF chain per block at levels 1..l_max, and
/// never reactivates after retiring.
struct BeamTrack {
    int id = -1;
    int base_codeword = -1;
    int level = 0;
    double delta_sin = 0.0;      // last relative grid shift (GS)
    double cum_shift_sin = 0.0;  // accumulated grid shift (GS)
    int circ_index = 0;          // next entry of the shift table (CS)
    bool last_positive = true;
    bool confirmed = false;      // any positive hypothesis on a probe
    bool active = true;
    int negatives_in_a_row_from_start = 0;
    double priority_metric = 0.0;
    Codeword beam;               // beam emitted for the current block
};

/// A track whose first two probes both miss is retired; an unconfirmed
/// sector returns to the exploration pool.
void handle_misspent(BeamTrack& track, bool detected_this_block,
                     std::set<int>& covered_sectors);

/// One beam of the current reduction matrix with its provenance.
struct PlannedBeam {
    Codeword beam;
    int codeword_index = -1;  // codebook sector, -1 for none
    int track_id = -1;        // -1 for exploration beams
};

/// Super-threshold cells of the block-level test, reduced to what the
/// planner needs: angular position (sin space) and metric value.
struct BlockDetections {
    std::vector<double> cell_sin;
    std::vector<double> cell_metric;
};

/// Sequential reduction-matrix selection. All strategies share the same
/// exploration sampler so that identical seeds yield identical plans on the
/// no-detection path.
class AcquisitionPlanner {
public:
    AcquisitionPlanner(const Codebook& codebook, const ShiftTable* shift_table,
                       Strategy strategy, int n_rf, int l_max, Rng& rng);

    /// U_1: N_rf distinct codewords drawn at random; sectors marked covered.
    std::vector<PlannedBeam> init_plan();

    /// Track bookkeeping for the detections of the block just observed:
    /// hypothesis tests, level advance or retirement, new track openings.
    /// Consumes no randomness.
    void apply_feedback(const BlockDetections& detections);

    /// Assemble U_{b+1}: track beams first, remaining chains filled from the
    /// uncovered pool (or uniformly once coverage is done).
    std::vector<PlannedBeam> make_plan();

    /// apply_feedback followed by make_plan.
    std::vector<PlannedBeam> next_plan(const BlockDetections& detections);

    bool coverage_complete() const { return covered_.size() == static_cast<std::size_t>(codebook_->size()); }
    bool tracks_active() const;
    const std::vector<BeamTrack>& tracks() const { return tracks_; }
    const std::set<int>& covered_sectors() const { return covered_; }

    static Eigen::MatrixXcd reduction_matrix(const std::vector<PlannedBeam>& beams);

private:
    std::vector<PlannedBeam> assemble(std::vector<PlannedBeam> track_beams);
    void fill_exploration(std::vector<PlannedBeam>& beams);
    void update_tracks(const BlockDetections& detections);
    void open_new_tracks(const BlockDetections& detections);
    Codeword track_beam(BeamTrack& track) const;

    const Codebook* codebook_;
    const ShiftTable* shift_table_;
    Strategy strategy_;
    int n_rf_;
    int l_max_;
    Rng* rng_;
    std::set<int> covered_;
    std::set<int> tracked_ever_;  // sectors that may not spawn another track
    std::vector<BeamTrack> tracks_;
    std::vector<PlannedBeam> current_;
    int next_track_id_ = 0;
};

/// Scene and radio configuration for one acquisition run.
struct Scenario {
    ArrayConfig array;
    OtfsFrame frame;
    NoiseModel noise;
    std::vector<Target> targets;
    double tx_power_w = 1.0;
    Codebook codebook;
    ShiftTable shift_table;
    Eigen::VectorXcd tx_beam;  // f, wide flat-top over the FoV
};

struct AcquisitionConfig {
    int n_rf = 4;
    int l_max = 3;
    int blocks_fixed = 0;  // > 0: run exactly this many blocks
    int b_max = 12;        // adaptive-mode cap
    /// Per-block false-alarm budget of the block-level test. The GEVT
    /// quantile is evaluated at pfa / (grid cells) per cell so that a false
    /// sector event occurs roughly once per 1/pfa blocks; without the
    /// familywise scaling every sector would trip on noise in every block
    /// and the track hypotheses would carry no information.
    double pfa = 1e-3;
    double cfar_pfa = 1e-5;
    int cfar_window = 3;
    int cfar_guard = 1;
    double cfar_rank_fraction = 0.75;
    double cfar_scale = 0.0;  // <= 0: derive from cfar_pfa
    long min_exceedances = 50;
    std::shared_ptr<const HypothesisGrid> grid;
};

struct BlockRecord {
    int block_index = 0;
    std::vector<int> codeword_indices;  // -1 entries are track beams
    std::vector<int> track_ids;
    int n_detected_cells = 0;
    double threshold = 0.0;
};

struct AcquisitionResult {
    std::vector<Detection> detections;
    int blocks_used = 0;
    double acquisition_time_s = 0.0;  // N * B / delta_f
    bool coverage_complete = false;
    std::vector<BlockRecord> log;
};

void write_event_log_csv(std::span<const BlockRecord> log, const std::string& path);

/// Full acquisition: per block select U_b, synthesize, evaluate the weighted
/// block metric against the GEVT threshold, feed the strategy; then apply
/// OS-CFAR to the B-block integrated metric and extract detections.
AcquisitionResult run_acquisition(const Scenario& scenario, Strategy strategy,
                                  const AcquisitionConfig& config, Rng& rng);

}  // namespace beamacq

#endif
