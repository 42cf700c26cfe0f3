#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfuse/rct_infer.hpp"
#include "cfuse/rng.hpp"
#include "cfuse/study_data.hpp"

namespace cfuse {

enum class OverlapRegime { kAll, kMajority, kLimited };

char const* to_string(OverlapRegime r);
OverlapRegime parse_regime(std::string const& text);
/// Threshold on x1 defining the overlap region (-inf, -1, 0).
double regime_threshold(OverlapRegime r);

struct ScenarioSpec {
    std::string name = "scenario";
    std::size_t n_total = 500;
    OverlapRegime overlap = OverlapRegime::kAll;
    double delta_star = 0.0;
    double gamma_star = 1.0;
    std::optional<double> effect_tau;
    std::size_t replications = 100;
    double alpha = 0.05;
    std::size_t mc_samples = 10000;
    std::uint64_t base_seed = 1;
    std::size_t controls_per_set = 1;
    // Units are assigned by independent coin flips; the analysis conditions on
    // the realized treated count unless told otherwise.
    RctScheme analysis_scheme = RctScheme::kComplete;
    // Analysis ladders; empty means "at the truth" (gamma_star, delta_star).
    std::vector<double> analysis_gamma;
    std::vector<double> analysis_delta;

    /// Throws InputError on an invalid parameter.
    void validate() const;
    std::vector<double> gammas() const;
    std::vector<double> deltas() const;
};

struct SimulatedStudy {
    StudyData data;
    double true_atot = 0.0;
    double delta_tilde = 0.0;
    double out_of_overlap_fraction = 0.0;
};

/// One draw of the simulation population. Covariates are x1..x5; U and the
/// noise term are latent and not stored.
SimulatedStudy generate(ScenarioSpec const& spec, SeededRng& rng);

struct CellResult {
    double gamma = 1.0;
    double delta = 0.0;
    // Indexed by method: 0 rct, 1 os, 2 combined.
    std::array<double, 3> lower{};
    std::array<double, 3> upper{};
};

struct ReplicationRecord {
    std::size_t index = 0;
    bool ok = false;
    std::string error;
    double truth = 0.0;
    std::vector<CellResult> cells;
    std::array<bool, 2> has_domain{false, false};
    std::array<double, 2> smd_before{0.0, 0.0};
    std::array<double, 2> smd_after{0.0, 0.0};
};

struct MethodSummary {
    std::string method;
    double gamma = 1.0;
    double delta = 0.0;
    std::size_t count = 0;
    double coverage = 0.0;
    double mean_length = 0.0;
    double rejection_rate = 0.0;  // share of intervals excluding 0
};

struct ScenarioReport {
    ScenarioSpec spec;
    std::vector<ReplicationRecord> replications;  // sorted by index
    std::vector<MethodSummary> summaries;
    std::size_t failures = 0;
    bool failed = false;  // more than 2% of replications errored
    std::array<double, 2> mean_smd_before{0.0, 0.0};
    std::array<double, 2> mean_smd_after{0.0, 0.0};

    MethodSummary const& summary(std::string const& method, double gamma, double delta) const;
};

/// Full pipeline for replication r on stream (base_seed, r). Errors are caught
/// and recorded.
ReplicationRecord run_replication(ScenarioSpec const& spec, std::size_t r);

/// Replications one after another.
std::vector<ReplicationRecord> run_replications_serial(ScenarioSpec const& spec);
using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Replications across OpenMP threads; records are stored by index, so the
/// result matches the serial version exactly.
std::vector<ReplicationRecord> run_replications_parallel(ScenarioSpec const& spec,
                                                         ProgressFn const& progress = {});

ScenarioReport summarize(ScenarioSpec const& spec, std::vector<ReplicationRecord> records);

ScenarioReport run_scenario(ScenarioSpec const& spec, bool parallel = true,
                            ProgressFn const& progress = {});

}  // namespace cfuse
