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

#ifndef BEAMACQ_DETECTOR_HPP
#define BEAMACQ_DETECTOR_HPP

#include <complex>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beamacq/codebook.hpp"
#include "beamacq/otfs.hpp"

namespace beamacq {

/// 3-D hypothesis grid over (Doppler, delay, angle), axes strictly increasing.
struct HypothesisGrid {
    std::vector<double> doppler_axis;
    std::vector<double> delay_axis;
    std::vector<double> angle_axis;

    std::size_t n_doppler() const { return doppler_axis.size(); }
    std::size_t n_delay() const { return delay_axis.size(); }
    std::size_t n_angle() const { return angle_axis.size(); }
    std::size_t size() const { return n_doppler() * n_delay() * n_angle(); }
    std::size_t index(std::size_t i_nu, std::size_t i_tau, std::size_t i_phi) const {
        return (i_nu * n_delay() + i_tau) * n_angle() + i_phi;
    }
    void validate() const;
};

/// GLRT metric values over a HypothesisGrid.
struct MetricField {
    enum class Scope { SingleBlock, Integrated };

    std::shared_ptr<const HypothesisGrid> grid;
    std::vector<double> values;
    Scope scope = Scope::SingleBlock;
    int block_index = 0;
};

/// Everything the detector needs to evaluate one block's contribution:
/// the observation, the beams that produced it, and the (scaled) symbols.
struct BlockContext {
    Eigen::VectorXcd y;  // N_rf * N * M
    Eigen::MatrixXcd u;  // N_a x N_rf
    Eigen::VectorXcd f;  // N_a
    Eigen::VectorXcd x;  // N * M, transmit-amplitude scaled
};

/// Closed-form ML gain at a hypothesis point:
/// h = (sum_b y_b^H G_b x_b)^* / sum_b ||G_b x_b||^2. Zero signal energy at
/// the hypothesis yields 0 (the matching metric is 0 by convention).
std::complex<double> estimate_gain(std::span<const BlockContext> blocks, const OtfsFrame& frame,
                                   double doppler_hz, double delay_s, double angle_rad);

/// GLRT metric S = |sum_b y_b^H G_b x_b|^2 / sum_b ||G_b x_b||^2.
double glrt_metric(std::span<const BlockContext> blocks, const OtfsFrame& frame,
                   double doppler_hz, double delay_s, double angle_rad);

/// Incremental GLRT evaluation over the grid. Each added block contributes
/// its correlation to the running integrated metric; the per-block metric is
/// returned on the way for the block-level test.
class GlrtAccumulator {
public:
    GlrtAccumulator(std::shared_ptr<const HypothesisGrid> grid, const OtfsFrame& frame);

    /// Adds a block and returns its single-block metric field.
    MetricField add_block(const BlockContext& block);

    MetricField integrated_field() const;
    std::complex<double> gain_at(std::size_t cell) const;
    int blocks_added() const { return blocks_; }

private:
    std::shared_ptr<const HypothesisGrid> grid_;
    OtfsFrame frame_;
    std::vector<std::complex<double>> num_;
    std::vector<double> den_;
    int blocks_ = 0;
};

/// S~_b = S_b(nu, tau, phi_g) * W_b(phi_g).
MetricField weighted_metric(const MetricField& field, const WeightProfile& weights);

/// Generalized Pareto tail fit of the exceedances over the clip threshold,
/// by probability-weighted moments.
struct GpdFit {
    double shape = 0.0;        // alpha
    double scale = 0.0;        // beta
    double clip_threshold = 0.0;
    long tail_count = 0;       // K
    long sample_count = 0;     // N
    double tail_prob = 0.0;    // K / N
};

struct GevtThreshold {
    double threshold = 0.0;
    GpdFit fit;
};

/// Thrown when a threshold cannot be calibrated from the data.
struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 99th percentile of the samples, the default peaks-over-threshold clip.
double default_clip_threshold(std::span<const double> samples);

/// Extreme-value hard threshold: fit a GPD to the excesses over clip and
/// return the quantile exceeded with probability pfa,
/// T = eta + beta/alpha ((N pfa / K)^(-alpha) - 1), exponential limit as
/// alpha -> 0. Requires at least min_exceedances points above clip and
/// pfa < K/N.
GevtThreshold gevt_threshold(std::span<const double> samples, double clip, double pfa,
                             long min_exceedances = 50);

/// Human-readable description of the implemented tail-quantile formula,
/// logged by the CLI alongside calibration output.
std::string gevt_formula_description();

/// Block-level variant of gevt_threshold that is robust to in-beam targets
/// contaminating the exceedance set: a median-based exponential prefit sets
/// a provisional cut, samples above it are censored as signal candidates,
/// and the GPD is fitted to the remaining noise core. On target-free fields
/// the cut removes (almost) nothing and the result matches gevt_threshold.
GevtThreshold robust_block_threshold(std::span<const double> samples, double pfa,
                                     long min_exceedances = 50);

/// Per-cell OS-CFAR threshold over the field: scale times the
/// rank_fraction-order statistic of the reference cells in the sliding
/// 3-D window (per-axis half-width `window`, guard cells excluded).
std::vector<double> os_cfar_threshold(const MetricField& field, int window, int guard,
                                      double rank_fraction, double scale);

/// Scale factor hitting the target false-alarm probability for exponential
/// cells: solves prod_{i=0..k-1} (R - i) / (R - i + T) = pfa for T.
double os_cfar_scale_for_pfa(int n_reference, double rank_fraction, double pfa);

/// One extracted detection with its grid-point estimates.
struct Detection {
    double doppler_hz = 0.0;
    double delay_s = 0.0;
    double angle_rad = 0.0;
    double metric = 0.0;
    std::complex<double> gain_estimate;
    int codeword_bin = -1;
};

/// Cells exceeding their threshold, grouped to 26-neighborhood local maxima.
/// `gains` (optional, field-sized) supplies the per-cell ML gain estimates.
std::vector<Detection> extract_detections(const MetricField& field,
                                          std::span<const double> thresholds,
                                          const Codebook& codebook,
                                          std::span<const std::complex<double>> gains = {});

/// CSV export: nu_hz, tau_s, phi_rad, metric, threshold, detected.
void write_metric_csv(const MetricField& field, std::span<const double> thresholds,
                      const std::string& path);
void write_detections_csv(std::span<const Detection> detections, const std::string& path);

}  // namespace beamacq

#endif
