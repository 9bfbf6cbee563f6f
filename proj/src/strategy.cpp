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

#include "beamacq/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace beamacq {

Strategy strategy_from_string(const std::string& name) {
    if (name == "gs") return Strategy::GS;
    if (name == "cs") return Strategy::CS;
    if (name == "random") return Strategy::Random;
    throw std::invalid_argument("unknown strategy '" + name + "' (expected gs|cs|random)");
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::GS: return "gs";
        case Strategy::CS: return "cs";
        default: return "random";
    }
}

double gs_next_delta(int level, bool positive, double prev_delta) {
    if (level < 2) throw std::invalid_argument("gs_next_delta: defined for level >= 2");
    if (level == 2) return positive ? 0.5 * prev_delta : -2.0 * prev_delta;
    return positive ? 0.5 * prev_delta : -0.5 * prev_delta;
}

void handle_misspent(BeamTrack& track, bool detected_this_block,
                     std::set<int>& covered_sectors) {
    if (!track.active) return;
    if (detected_this_block) {
        track.confirmed = true;
        track.negatives_in_a_row_from_start = 0;
        return;
    }
    if (!track.confirmed) {
        ++track.negatives_in_a_row_from_start;
        if (track.negatives_in_a_row_from_start >= 2) {
            // Two misses on the opening probes: conclude no target and return
            // the sector to the exploration pool. The blocks already observed
            // stay in the integrated metric.
            track.active = false;
            covered_sectors.erase(track.base_codeword);
        }
    }
}

AcquisitionPlanner::AcquisitionPlanner(const Codebook& codebook, const ShiftTable* shift_table,
                                       Strategy strategy, int n_rf, int l_max, Rng& rng)
    : codebook_(&codebook),
      shift_table_(shift_table),
      strategy_(strategy),
      n_rf_(n_rf),
      l_max_(l_max),
      rng_(&rng) {
    if (n_rf_ < 1 || n_rf_ > codebook_->size())
        throw std::invalid_argument("AcquisitionPlanner: need 1 <= N_rf <= Q");
    if (strategy_ == Strategy::CS && !shift_table_)
        throw std::invalid_argument("AcquisitionPlanner: CS strategy needs a shift table");
    if (strategy_ == Strategy::CS &&
        shift_table_->shifts.size() != static_cast<std::size_t>(codebook_->size()))
        throw std::invalid_argument("AcquisitionPlanner: shift table does not cover the codebook");
}

std::vector<PlannedBeam> AcquisitionPlanner::init_plan() {
    std::vector<int> pool(codebook_->size());
    for (int q = 0; q < codebook_->size(); ++q) pool[q] = q;
    for (int i = 0; i < n_rf_; ++i) {
        const std::size_t j = i + rng_->index(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    std::vector<PlannedBeam> beams;
    for (int i = 0; i < n_rf_; ++i) {
        PlannedBeam pb;
        pb.codeword_index = pool[i];
        pb.beam = codebook_->codewords[pool[i]];
        beams.push_back(std::move(pb));
        covered_.insert(pool[i]);
    }
    current_ = beams;
    return beams;
}

bool AcquisitionPlanner::tracks_active() const {
    return std::any_of(tracks_.begin(), tracks_.end(),
                       [](const BeamTrack& t) { return t.active; });
}

void AcquisitionPlanner::update_tracks(const BlockDetections& detections) {
    for (BeamTrack& track : tracks_) {
        if (!track.active || track.level < 1) continue;

        const double lo = track.beam.center_sin - track.beam.width_sin / 2;
        const double hi = track.beam.center_sin + track.beam.width_sin / 2;
        bool positive = false;
        double peak = 0.0;
        for (std::size_t i = 0; i < detections.cell_sin.size(); ++i) {
            if (detections.cell_sin[i] >= lo && detections.cell_sin[i] <= hi) {
                positive = true;
                peak = std::max(peak, detections.cell_metric[i]);
            }
        }
        track.last_positive = positive;
        if (positive) track.priority_metric = peak;

        handle_misspent(track, positive, covered_);
        if (!track.active) {
            if (!track.confirmed) tracked_ever_.erase(track.base_codeword);
            continue;
        }

        if (track.level >= l_max_) {
            track.active = false;  // all probe levels spent
            continue;
        }

        const int next_level = track.level + 1;
        if (strategy_ == Strategy::GS) {
            track.delta_sin = gs_next_delta(next_level, positive, track.delta_sin);
            track.cum_shift_sin += track.delta_sin;
        } else {
            ++track.circ_index;
        }
        track.level = next_level;
    }
}

void AcquisitionPlanner::open_new_tracks(const BlockDetections& detections) {
    if (strategy_ == Strategy::Random) return;

    // Detected sectors restricted to this block's exploration beams.
    for (const PlannedBeam& pb : current_) {
        if (pb.track_id >= 0 || pb.codeword_index < 0) continue;
        const int sector = pb.codeword_index;
        if (tracked_ever_.count(sector)) continue;

        double peak = -1.0;
        const double lo = codebook_->sector_center_sin(sector) - codebook_->delta_sin / 2;
        const double hi = codebook_->sector_center_sin(sector) + codebook_->delta_sin / 2;
        for (std::size_t i = 0; i < detections.cell_sin.size(); ++i)
            if (detections.cell_sin[i] >= lo && detections.cell_sin[i] <= hi)
                peak = std::max(peak, detections.cell_metric[i]);
        if (peak < 0.0) continue;

        BeamTrack track;
        track.id = next_track_id_++;
        track.base_codeword = sector;
        track.priority_metric = peak;
        if (strategy_ == Strategy::GS) {
            track.level = 1;
            track.delta_sin = codebook_->delta_sin / 2;  // delta_1 = Delta/2, to the right
            track.cum_shift_sin = track.delta_sin;
        } else {
            track.level = 1;
            track.circ_index = 0;
        }
        tracks_.push_back(track);
        tracked_ever_.insert(sector);
    }
}

Codeword AcquisitionPlanner::track_beam(BeamTrack& track) const {
    const Codeword& base = codebook_->codewords[track.base_codeword];
    if (strategy_ == Strategy::CS) {
        const auto& row = shift_table_->shifts[track.base_codeword];
        const int idx = std::min<int>(track.circ_index, static_cast<int>(row.size()) - 1);
        return circ_shift(base, row[idx]);
    }
    // Clamp the cumulative shift so the span stays inside sin space.
    double shift = track.cum_shift_sin;
    const double margin = 1.0 - base.width_sin / 2;
    shift = std::clamp(shift, -margin - base.center_sin, margin - base.center_sin);
    return grid_shift(base, shift);
}

std::vector<PlannedBeam> AcquisitionPlanner::assemble(std::vector<PlannedBeam> track_beams) {
    if (static_cast<int>(track_beams.size()) > n_rf_) {
        // More live tracks than RF chains: keep the strongest, retire the rest.
        std::stable_sort(track_beams.begin(), track_beams.end(),
                         [&](const PlannedBeam& a, const PlannedBeam& b) {
                             const auto pa = tracks_[a.track_id].priority_metric;
                             const auto pb = tracks_[b.track_id].priority_metric;
                             return pa > pb;
                         });
        for (std::size_t i = n_rf_; i < track_beams.size(); ++i) {
            BeamTrack& t = tracks_[track_beams[i].track_id];
            t.active = false;
            if (!t.confirmed) {
                covered_.erase(t.base_codeword);
                tracked_ever_.erase(t.base_codeword);
            }
        }
        track_beams.resize(n_rf_);
    }
    fill_exploration(track_beams);
    current_ = track_beams;
    return track_beams;
}

void AcquisitionPlanner::fill_exploration(std::vector<PlannedBeam>& beams) {
    const int need = n_rf_ - static_cast<int>(beams.size());
    if (need <= 0) return;

    std::vector<int> uncovered;
    for (int q = 0; q < codebook_->size(); ++q)
        if (!covered_.count(q)) uncovered.push_back(q);

    const int from_pool = std::min<int>(need, static_cast<int>(uncovered.size()));
    for (int i = 0; i < from_pool; ++i) {
        const std::size_t j = i + rng_->index(uncovered.size() - i);
        std::swap(uncovered[i], uncovered[j]);
        PlannedBeam pb;
        pb.codeword_index = uncovered[i];
        pb.beam = codebook_->codewords[uncovered[i]];
        beams.push_back(std::move(pb));
        covered_.insert(uncovered[i]);
    }

    // Coverage exhausted: keep the remaining chains busy with uniform draws
    // over sectors not already selected in this block.
    int remaining = need - from_pool;
    if (remaining > 0) {
        std::vector<int> pool;
        for (int q = 0; q < codebook_->size(); ++q) {
            const bool used = std::any_of(beams.begin(), beams.end(), [&](const PlannedBeam& b) {
                return b.codeword_index == q;
            });
            if (!used) pool.push_back(q);
        }
        for (int i = 0; i < remaining && !pool.empty(); ++i) {
            const std::size_t j = i + rng_->index(pool.size() - i);
            std::swap(pool[i], pool[static_cast<std::size_t>(j)]);
            PlannedBeam pb;
            pb.codeword_index = pool[i];
            pb.beam = codebook_->codewords[pool[i]];
            beams.push_back(std::move(pb));
        }
    }
}

void AcquisitionPlanner::apply_feedback(const BlockDetections& detections) {
    if (strategy_ == Strategy::Random) return;
    update_tracks(detections);
    open_new_tracks(detections);
}

std::vector<PlannedBeam> AcquisitionPlanner::make_plan() {
    std::vector<PlannedBeam> track_beams;
    for (BeamTrack& track : tracks_) {
        if (!track.active) continue;
        PlannedBeam pb;
        pb.track_id = track.id;
        pb.codeword_index = -1;
        pb.beam = track_beam(track);
        track_beams.push_back(std::move(pb));
    }
    return assemble(std::move(track_beams));
}

std::vector<PlannedBeam> AcquisitionPlanner::next_plan(const BlockDetections& detections) {
    apply_feedback(detections);
    return make_plan();
}

Eigen::MatrixXcd AcquisitionPlanner::reduction_matrix(const std::vector<PlannedBeam>& beams) {
    if (beams.empty()) throw std::invalid_argument("reduction_matrix: no beams");
    Eigen::MatrixXcd u(beams[0].beam.weights.size(), beams.size());
    for (std::size_t i = 0; i < beams.size(); ++i) u.col(i) = beams[i].beam.weights;
    return u;
}

void write_event_log_csv(std::span<const BlockRecord> log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_event_log_csv: cannot open " + path);
    out << "block,codeword_indices,track_ids,detected_cells,threshold\n";
    for (const BlockRecord& r : log) {
        out << r.block_index << ',';
        for (std::size_t i = 0; i < r.codeword_indices.size(); ++i)
            out << (i ? ";" : "") << r.codeword_indices[i];
        out << ',';
        for (std::size_t i = 0; i < r.track_ids.size(); ++i)
            out << (i ? ";" : "") << r.track_ids[i];
        out << ',' << r.n_detected_cells << ',' << r.threshold << '\n';
    }
    if (!out) throw std::runtime_error("write_event_log_csv: write failed for " + path);
}

AcquisitionResult run_acquisition(const Scenario& scenario, Strategy strategy,
                                  const AcquisitionConfig& config, Rng& rng) {
    if (!config.grid) throw std::invalid_argument("run_acquisition: missing hypothesis grid");
    if (config.blocks_fixed < 0 || (config.blocks_fixed == 0 && config.b_max < 1))
        throw std::invalid_argument("run_acquisition: bad block budget");

    std::vector<PathParams> paths;
    paths.reserve(scenario.targets.size());
    for (const Target& t : scenario.targets)
        paths.push_back(path_params(t, scenario.array, rng));

    const double amp = std::sqrt(scenario.tx_power_w);
    AcquisitionPlanner planner(scenario.codebook, &scenario.shift_table, strategy, config.n_rf,
                               config.l_max, rng);
    GlrtAccumulator acc(config.grid, scenario.frame);

    AcquisitionResult result;
    std::vector<PlannedBeam> beams = planner.init_plan();
    const int last_block = config.blocks_fixed > 0 ? config.blocks_fixed : config.b_max;

    std::vector<double> angle_sins(config.grid->n_angle());
    for (std::size_t gidx = 0; gidx < angle_sins.size(); ++gidx)
        angle_sins[gidx] = std::sin(config.grid->angle_axis[gidx]);

    for (int b = 1;; ++b) {
        const Eigen::MatrixXcd u = AcquisitionPlanner::reduction_matrix(beams);
        const SymbolFrame symbols = generate_symbols(scenario.frame, rng);
        BlockObservation obs = synthesize_rx_block(paths, u, scenario.tx_beam, symbols,
                                                   scenario.frame, scenario.noise, rng, amp, b - 1);

        BlockContext ctx;
        ctx.y = std::move(obs.samples);
        ctx.u = u;
        ctx.f = scenario.tx_beam;
        ctx.x = symbols.flattened() * amp;
        const MetricField block_field = acc.add_block(ctx);

        std::vector<Codeword> block_beams;
        block_beams.reserve(beams.size());
        for (const PlannedBeam& pb : beams) block_beams.push_back(pb.beam);
        const WeightProfile wp = weight_profile(block_beams, config.grid->angle_axis);
        const MetricField weighted = weighted_metric(block_field, wp);

        // The unweighted metric is homogeneous under noise (the hypothesis
        // energy cancels in the GLRT ratio), so the tail fit is taken there;
        // the weighted field is what gets tested, per the block-level rule.
        double threshold = std::numeric_limits<double>::infinity();
        const double cell_pfa = config.pfa / static_cast<double>(config.grid->size());
        try {
            threshold = robust_block_threshold(block_field.values, cell_pfa,
                                               config.min_exceedances).threshold;
        } catch (const CalibrationError&) {
            // Degenerate block field (e.g. noiseless empty scene): no block
            // detections, exploration continues.
        } catch (const std::domain_error&) {
        }

        BlockDetections feedback;
        const std::size_t n_phi = config.grid->n_angle();
        for (std::size_t cell = 0; cell < weighted.values.size(); ++cell) {
            if (weighted.values[cell] > threshold) {
                feedback.cell_sin.push_back(angle_sins[cell % n_phi]);
                feedback.cell_metric.push_back(weighted.values[cell]);
            }
        }

        BlockRecord record;
        record.block_index = b;
        for (const PlannedBeam& pb : beams) {
            record.codeword_indices.push_back(pb.codeword_index);
            record.track_ids.push_back(pb.track_id);
        }
        record.n_detected_cells = static_cast<int>(feedback.cell_sin.size());
        record.threshold = threshold;
        result.log.push_back(std::move(record));

        result.blocks_used = b;
        planner.apply_feedback(feedback);
        if (b >= last_block) break;
        if (config.blocks_fixed == 0 && planner.coverage_complete() && !planner.tracks_active())
            break;
        beams = planner.make_plan();
    }

    result.coverage_complete = planner.coverage_complete();
    result.acquisition_time_s =
        result.blocks_used * scenario.frame.n_doppler / scenario.frame.subcarrier_hz;

    const MetricField integrated = acc.integrated_field();
    double scale = config.cfar_scale;
    if (scale <= 0.0) {
        const int window_cells = (2 * config.cfar_window + 1) * (2 * config.cfar_window + 1) *
                                 (2 * config.cfar_window + 1);
        const int guard_cells = (2 * config.cfar_guard + 1) * (2 * config.cfar_guard + 1) *
                                (2 * config.cfar_guard + 1);
        scale = os_cfar_scale_for_pfa(window_cells - guard_cells, config.cfar_rank_fraction,
                                      config.cfar_pfa);
    }
    const std::vector<double> thresholds = os_cfar_threshold(
        integrated, config.cfar_window, config.cfar_guard, config.cfar_rank_fraction, scale);

    std::vector<std::complex<double>> gains(integrated.values.size());
    for (std::size_t cell = 0; cell < gains.size(); ++cell) gains[cell] = acc.gain_at(cell);
    result.detections = extract_detections(integrated, thresholds, scenario.codebook, gains);
    return result;
}

}  // namespace beamacq
