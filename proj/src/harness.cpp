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

#include "beamacq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace beamacq {

namespace {

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

int resolve_workers(int configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("BEAMACQ_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

}  // namespace

double ExperimentConfig::tx_power_w() const {
    return std::pow(10.0, tx_power_dbm / 10.0) / 1000.0;
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (!(pfa > 0.0 && pfa < 1.0)) throw std::invalid_argument("config: pfa outside (0, 1)");
    if (!(cfar_pfa > 0.0 && cfar_pfa < 1.0))
        throw std::invalid_argument("config: cfar_pfa outside (0, 1)");
    if (epsilon_deg <= 0.0) throw std::invalid_argument("config: epsilon_deg must be positive");
    if (n_rf > q_count) throw std::invalid_argument("config: N_rf exceeds codebook size Q");
    if (n_targets < 0) throw std::invalid_argument("config: negative target count");
    if (fov_hi_deg <= fov_lo_deg) throw std::invalid_argument("config: empty field of view");
    if (blocks < 0 || b_max < 1) throw std::invalid_argument("config: bad block budget");
    if (l_max < 1) throw std::invalid_argument("config: l_max must be >= 1");
    if (grid_angles < 2 || delay_bin_step < 1 || delay_bin_max < delay_bin_min)
        throw std::invalid_argument("config: bad hypothesis grid");
    if (placement != "angle_separated" && placement != "fixed")
        throw std::invalid_argument("config: unknown placement rule '" + placement + "'");
    if (placement == "fixed" && static_cast<int>(fixed_angles_deg.size()) < n_targets)
        throw std::invalid_argument("config: fixed placement needs one angle per target");
    if (sweep != "range" && sweep != "blocks" && sweep != "none")
        throw std::invalid_argument("config: unknown sweep '" + sweep + "'");
    if (sweep != "none" && sweep_values.empty())
        throw std::invalid_argument("config: empty sweep_values");
    strategy_from_string(strategy);
}

ExperimentConfig desk_preset() { return ExperimentConfig{}; }

ExperimentConfig paper_preset() {
    ExperimentConfig cfg;
    cfg.n_doppler = 64;
    cfg.m_delay = 64;
    cfg.n_antennas = 64;
    cfg.q_count = 10;
    cfg.grid_angles = 192;
    return cfg;
}

ExperimentConfig preset_by_name(const std::string& name) {
    if (name == "desk") return desk_preset();
    if (name == "paper") return paper_preset();
    throw std::invalid_argument("unknown preset '" + name + "' (expected desk|paper)");
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto as_int = [&] { return std::stoi(value); };
    auto as_double = [&] { return std::stod(value); };
    auto as_list = [&] {
        std::vector<double> v;
        std::istringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) v.push_back(std::stod(tok));
        return v;
    };

    if (key == "n") cfg.n_doppler = as_int();
    else if (key == "m") cfg.m_delay = as_int();
    else if (key == "bandwidth_hz") cfg.bandwidth_hz = as_double();
    else if (key == "n_antennas") cfg.n_antennas = as_int();
    else if (key == "n_rf") cfg.n_rf = as_int();
    else if (key == "carrier_hz") cfg.carrier_hz = as_double();
    else if (key == "q") cfg.q_count = as_int();
    else if (key == "fov_lo_deg") cfg.fov_lo_deg = as_double();
    else if (key == "fov_hi_deg") cfg.fov_hi_deg = as_double();
    else if (key == "tx_power_dbm") cfg.tx_power_dbm = as_double();
    else if (key == "noise_psd") cfg.noise_psd_w_per_hz = as_double();
    else if (key == "noise_figure_db") cfg.noise_figure_db = as_double();
    else if (key == "strategy") cfg.strategy = value;
    else if (key == "blocks") cfg.blocks = as_int();
    else if (key == "b_max") cfg.b_max = as_int();
    else if (key == "l_max") cfg.l_max = as_int();
    else if (key == "targets") cfg.n_targets = as_int();
    else if (key == "placement") cfg.placement = value;
    else if (key == "target_range_m") cfg.target_range_m = as_double();
    else if (key == "target_speed_mps") cfg.target_speed_mps = as_double();
    else if (key == "target_rcs_m2") cfg.target_rcs_m2 = as_double();
    else if (key == "fixed_angles_deg") cfg.fixed_angles_deg = as_list();
    else if (key == "pfa") cfg.pfa = as_double();
    else if (key == "cfar_pfa") cfg.cfar_pfa = as_double();
    else if (key == "cfar_window") cfg.cfar_window = as_int();
    else if (key == "cfar_guard") cfg.cfar_guard = as_int();
    else if (key == "cfar_rank_fraction") cfg.cfar_rank_fraction = as_double();
    else if (key == "epsilon_deg") cfg.epsilon_deg = as_double();
    else if (key == "grid_angles") cfg.grid_angles = as_int();
    else if (key == "delay_bin_min") cfg.delay_bin_min = as_int();
    else if (key == "delay_bin_max") cfg.delay_bin_max = as_int();
    else if (key == "delay_bin_step") cfg.delay_bin_step = as_int();
    else if (key == "doppler_bin_half") cfg.doppler_bin_half = as_int();
    else if (key == "sweep") cfg.sweep = value;
    else if (key == "sweep_values") cfg.sweep_values = as_list();
    else if (key == "trials") cfg.trials = as_int();
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "workers") cfg.workers = as_int();
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                                         ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        apply_config_entry(cfg, key, value);
    }
}

ExperimentSetup build_setup(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentSetup s;
    s.array = ArrayConfig::make(cfg.n_antennas, cfg.carrier_hz);
    s.frame = OtfsFrame::make(cfg.n_doppler, cfg.m_delay, cfg.subcarrier_hz(),
                              std::max(cfg.blocks, 1));
    s.noise = NoiseModel::make(cfg.noise_psd_w_per_hz, cfg.noise_figure_db, cfg.bandwidth_hz);
    s.codebook = build_codebook(s.array, deg2rad(cfg.fov_lo_deg), deg2rad(cfg.fov_hi_deg),
                                cfg.q_count);
    s.shift_table = build_shift_table(s.codebook, cfg.l_max);

    const double slo = std::sin(deg2rad(cfg.fov_lo_deg));
    const double shi = std::sin(deg2rad(cfg.fov_hi_deg));
    s.tx_beam = design_flattop(s.array, 0.5 * (slo + shi), shi - slo).weights;

    auto grid = std::make_shared<HypothesisGrid>();
    const double nu_bin = cfg.subcarrier_hz() / cfg.n_doppler;
    for (int k = -cfg.doppler_bin_half; k <= cfg.doppler_bin_half; ++k)
        grid->doppler_axis.push_back(k * nu_bin);
    const double tau_bin = 1.0 / cfg.bandwidth_hz;
    for (int l = cfg.delay_bin_min; l <= cfg.delay_bin_max; l += cfg.delay_bin_step)
        grid->delay_axis.push_back(l * tau_bin);
    const double alo = deg2rad(cfg.fov_lo_deg);
    const double ahi = deg2rad(cfg.fov_hi_deg);
    for (int g = 0; g < cfg.grid_angles; ++g)
        grid->angle_axis.push_back(alo + (g + 0.5) * (ahi - alo) / cfg.grid_angles);
    grid->validate();
    s.grid = std::move(grid);
    return s;
}

std::vector<Target> place_targets(const ExperimentConfig& cfg, double range_m, Rng& rng) {
    std::vector<Target> targets;
    targets.reserve(cfg.n_targets);
    const double lo = cfg.fov_lo_deg, hi = cfg.fov_hi_deg;
    const double min_sep_deg = (hi - lo) / cfg.q_count;  // one codeword span

    if (cfg.placement == "fixed") {
        for (int i = 0; i < cfg.n_targets; ++i) {
            Target t;
            t.range_m = range_m;
            t.radial_speed_mps = cfg.target_speed_mps;
            t.rcs_m2 = cfg.target_rcs_m2;
            t.angle_rad = deg2rad(cfg.fixed_angles_deg[i]);
            targets.push_back(t);
        }
        return targets;
    }

    // Targets separated only in angle: same range and speed, random angles at
    // least one codeword span apart.
    std::vector<double> angles;
    int guard = 0;
    while (static_cast<int>(angles.size()) < cfg.n_targets) {
        const double cand = rng.uniform(lo, hi);
        const bool clear = std::all_of(angles.begin(), angles.end(), [&](double a) {
            return std::abs(a - cand) >= min_sep_deg;
        });
        if (clear) angles.push_back(cand);
        if (++guard > 10000)
            throw std::runtime_error("place_targets: cannot satisfy angular separation");
    }
    for (double a : angles) {
        Target t;
        t.range_m = range_m;
        t.radial_speed_mps = cfg.target_speed_mps;
        t.rcs_m2 = cfg.target_rcs_m2;
        t.angle_rad = deg2rad(a);
        targets.push_back(t);
    }
    return targets;
}

double trial_pd(const AcquisitionResult& result, std::span<const Target> truth,
                double epsilon_rad) {
    if (truth.empty()) return 0.0;

    struct Pair {
        double err;
        std::size_t det, tgt;
    };
    std::vector<Pair> pairs;
    for (std::size_t d = 0; d < result.detections.size(); ++d)
        for (std::size_t t = 0; t < truth.size(); ++t)
            pairs.push_back({std::abs(result.detections[d].angle_rad - truth[t].angle_rad), d, t});
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.err < b.err; });

    std::vector<bool> det_used(result.detections.size(), false);
    std::vector<bool> tgt_hit(truth.size(), false);
    int hits = 0;
    for (const Pair& p : pairs) {
        if (p.err > epsilon_rad) break;
        if (det_used[p.det] || tgt_hit[p.tgt]) continue;
        det_used[p.det] = true;
        tgt_hit[p.tgt] = true;
        ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double compute_pd(std::span<const AcquisitionResult> results, std::span<const Target> truth,
                  double epsilon_rad) {
    if (results.empty()) throw std::invalid_argument("compute_pd: no results");
    double acc = 0.0;
    for (const AcquisitionResult& r : results) acc += trial_pd(r, truth, epsilon_rad);
    return acc / static_cast<double>(results.size());
}

std::pair<double, double> bootstrap_ci(std::span<const double> trial_values, int resamples,
                                       Rng& rng) {
    if (trial_values.empty()) throw std::invalid_argument("bootstrap_ci: empty sample set");
    const std::size_t n = trial_values.size();
    std::vector<double> means(resamples);
    for (int r = 0; r < resamples; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += trial_values[rng.index(n)];
        means[r] = acc / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const auto at = [&](double q) {
        const double pos = q * (means.size() - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < means.size() ? means[i] * (1.0 - frac) + means[i + 1] * frac : means[i];
    };
    return {at(0.025), at(0.975)};
}

std::vector<double> run_trials(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                               std::size_t sweep_index, double sweep_value) {
    const double eps_rad = deg2rad(cfg.epsilon_deg);
    const Strategy strategy = strategy_from_string(cfg.strategy);

    AcquisitionConfig acq;
    acq.n_rf = cfg.n_rf;
    acq.l_max = cfg.l_max;
    acq.blocks_fixed = cfg.blocks;
    acq.b_max = cfg.b_max;
    acq.pfa = cfg.pfa;
    acq.cfar_pfa = cfg.cfar_pfa;
    acq.cfar_window = cfg.cfar_window;
    acq.cfar_guard = cfg.cfar_guard;
    acq.cfar_rank_fraction = cfg.cfar_rank_fraction;
    acq.min_exceedances = cfg.min_exceedances;
    acq.grid = setup.grid;

    double range_m = cfg.target_range_m;
    if (cfg.sweep == "range") range_m = sweep_value;
    else if (cfg.sweep == "blocks") acq.blocks_fixed = static_cast<int>(sweep_value);

    std::vector<double> pd(cfg.trials, 0.0);
    std::atomic<std::size_t> next{0};
    const int workers = std::min(resolve_workers(cfg.workers), cfg.trials);

    auto work = [&]() {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= static_cast<std::size_t>(cfg.trials)) return;
            Rng rng = Rng::stream(cfg.seed, sweep_index, t);
            Scenario sc;
            sc.array = setup.array;
            sc.frame = setup.frame;
            sc.noise = setup.noise;
            sc.targets = place_targets(cfg, range_m, rng);
            sc.tx_power_w = cfg.tx_power_w();
            sc.codebook = setup.codebook;
            sc.shift_table = setup.shift_table;
            sc.tx_beam = setup.tx_beam;
            const AcquisitionResult result = run_acquisition(sc, strategy, acq, rng);
            pd[t] = trial_pd(result, sc.targets, eps_rad);
        }
    };

    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return pd;
}

PdCurve run_sweep(const ExperimentConfig& cfg) {
    const ExperimentSetup setup = build_setup(cfg);

    PdCurve curve;
    curve.sweep_name = cfg.sweep;
    curve.trials = cfg.trials;
    const std::vector<double> values = cfg.sweep == "none"
        ? std::vector<double>{cfg.target_range_m} : cfg.sweep_values;

    for (std::size_t s = 0; s < values.size(); ++s) {
        const std::vector<double> pd = run_trials(cfg, setup, s, values[s]);
        const double mean =
            std::accumulate(pd.begin(), pd.end(), 0.0) / static_cast<double>(pd.size());
        Rng boot = Rng::stream(cfg.seed, 0xb007, s);
        const auto [lo, hi] = bootstrap_ci(pd, 1000, boot);
        curve.sweep_values.push_back(values[s]);
        curve.pd.push_back(mean);
        curve.ci_lo.push_back(lo);
        curve.ci_hi.push_back(hi);
    }
    return curve;
}

void emit_outputs(const PdCurve& curve, const std::string& prefix, const ExperimentConfig& cfg) {
    {
        std::ofstream out(prefix + ".csv");
        if (!out) throw std::runtime_error("emit_outputs: cannot open " + prefix + ".csv");
        out.precision(12);
        out << "sweep_value,pd,ci_lo,ci_hi,trials\n";
        for (std::size_t i = 0; i < curve.sweep_values.size(); ++i)
            out << curve.sweep_values[i] << ',' << curve.pd[i] << ',' << curve.ci_lo[i] << ','
                << curve.ci_hi[i] << ',' << curve.trials << '\n';
        if (!out) throw std::runtime_error("emit_outputs: write failed for " + prefix + ".csv");
    }
    {
        // gnuplot-style plot data: value pd ci_lo ci_hi
        std::ofstream out(prefix + ".dat");
        if (!out) throw std::runtime_error("emit_outputs: cannot open " + prefix + ".dat");
        out.precision(12);
        out << "# " << (curve.sweep_name.empty() ? "sweep" : curve.sweep_name)
            << " pd ci_lo ci_hi\n";
        for (std::size_t i = 0; i < curve.sweep_values.size(); ++i)
            out << curve.sweep_values[i] << ' ' << curve.pd[i] << ' ' << curve.ci_lo[i] << ' '
                << curve.ci_hi[i] << '\n';
        if (!out) throw std::runtime_error("emit_outputs: write failed for " + prefix + ".dat");
    }
    {
        nlohmann::json manifest;
        manifest["seed"] = cfg.seed;
        manifest["sweep"] = cfg.sweep;
        manifest["trials"] = cfg.trials;
        manifest["strategy"] = cfg.strategy;
        manifest["gevt_formula"] = gevt_formula_description();
        nlohmann::json c;
        c["n"] = cfg.n_doppler;
        c["m"] = cfg.m_delay;
        c["bandwidth_hz"] = cfg.bandwidth_hz;
        c["n_antennas"] = cfg.n_antennas;
        c["n_rf"] = cfg.n_rf;
        c["carrier_hz"] = cfg.carrier_hz;
        c["q"] = cfg.q_count;
        c["fov_lo_deg"] = cfg.fov_lo_deg;
        c["fov_hi_deg"] = cfg.fov_hi_deg;
        c["tx_power_dbm"] = cfg.tx_power_dbm;
        c["noise_psd"] = cfg.noise_psd_w_per_hz;
        c["noise_figure_db"] = cfg.noise_figure_db;
        c["blocks"] = cfg.blocks;
        c["b_max"] = cfg.b_max;
        c["l_max"] = cfg.l_max;
        c["targets"] = cfg.n_targets;
        c["placement"] = cfg.placement;
        c["target_range_m"] = cfg.target_range_m;
        c["target_speed_mps"] = cfg.target_speed_mps;
        c["target_rcs_m2"] = cfg.target_rcs_m2;
        c["pfa"] = cfg.pfa;
        c["cfar_pfa"] = cfg.cfar_pfa;
        c["cfar_window"] = cfg.cfar_window;
        c["cfar_guard"] = cfg.cfar_guard;
        c["cfar_rank_fraction"] = cfg.cfar_rank_fraction;
        c["epsilon_deg"] = cfg.epsilon_deg;
        c["grid_angles"] = cfg.grid_angles;
        c["delay_bin_min"] = cfg.delay_bin_min;
        c["delay_bin_max"] = cfg.delay_bin_max;
        c["delay_bin_step"] = cfg.delay_bin_step;
        c["doppler_bin_half"] = cfg.doppler_bin_half;
        c["sweep_values"] = cfg.sweep_values;
        manifest["config"] = c;

        std::ofstream out(prefix + ".manifest.json");
        if (!out) throw std::runtime_error("emit_outputs: cannot open " + prefix + ".manifest.json");
        out << manifest.dump(2) << '\n';
        if (!out)
            throw std::runtime_error("emit_outputs: write failed for " + prefix + ".manifest.json");
    }
}

PdCurve read_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_curve_csv: cannot open " + path);
    PdCurve curve;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        std::vector<double> row;
        while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
        if (row.size() != 5) throw std::runtime_error("read_curve_csv: malformed row");
        curve.sweep_values.push_back(row[0]);
        curve.pd.push_back(row[1]);
        curve.ci_lo.push_back(row[2]);
        curve.ci_hi.push_back(row[3]);
        curve.trials = static_cast<int>(row[4]);
    }
    return curve;
}

}  // namespace beamacq
