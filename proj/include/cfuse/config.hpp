#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfuse/pipeline.hpp"
#include "cfuse/sim_lab.hpp"
#include "cfuse/study_data.hpp"

namespace cfuse {

/// Flat `key = value` text. Repeating a key builds a list; `#` starts a
/// comment; blank lines are ignored. Keys are case-sensitive.
class ConfigFile {
public:
    static ConfigFile parse(std::string const& text, std::string const& source = "config");
    static ConfigFile load(std::string const& path);

    bool has(std::string const& key) const;
    std::vector<std::string> all(std::string const& key) const;
    /// Last value of a key. Throws InputError when a single-valued key repeats.
    std::optional<std::string> single(std::string const& key) const;

    /// Throws InputError naming the first key outside `known`.
    void require_known(std::vector<std::string> const& known) const;

    std::vector<std::pair<std::string, std::string>> const& entries() const { return entries_; }
    std::string const& source() const { return source_; }

private:
    std::string source_;
    std::vector<std::pair<std::string, std::string>> entries_;
    std::vector<int> lines_;
};

double parse_double(std::string const& text, std::string const& what);
long long parse_integer(std::string const& text, std::string const& what);
bool parse_bool(std::string const& text, std::string const& what);

/// Overlap rule text before covariate names are known: `all`, `rct_box`, or
/// `[{var="x1", lo=-1.0}, {var="x2", hi=3}]`.
struct OverlapSpec {
    enum class Kind { kAll, kRctBox, kBounds };
    struct Bound {
        std::string var;
        std::optional<double> lo;
        std::optional<double> hi;
    };
    Kind kind = Kind::kRctBox;
    std::vector<Bound> bounds;

    static OverlapSpec parse(std::string const& text);
    OverlapRule resolve(std::vector<std::string> const& covariate_names) const;
};

RctScheme parse_scheme(std::string const& text);
char const* to_string(RctScheme s);

struct RunConfig {
    std::string input;
    std::vector<std::string> covariates;  // empty: every non-reserved column
    OverlapSpec overlap;
    std::vector<double> gammas{1.0};
    std::vector<double> deltas{0.0};
    double alpha = 0.05;
    std::size_t controls_per_set = 1;
    std::size_t mc_samples = 10000;
    std::uint64_t seed = 1;
    double rct_theta = 0.5;
    RctScheme rct_scheme = RctScheme::kBernoulli;
    bool rct_matched_copies = true;
    double clamp = 0.01;
    bool residualize = true;
    GridSizes grid;
    std::string output_dir = ".";

    /// Throws InputError for any invalid knob.
    void validate() const;
    PipelineOptions pipeline_options(std::vector<std::string> const& covariate_names) const;
};

/// Keys accepted in a study config (score / match / analyze).
std::vector<std::string> const& run_config_keys();

/// Applies the keys of `file` on top of `base`.
RunConfig apply_run_config(RunConfig base, ConfigFile const& file);

/// Keys accepted in a scenario file. List-valued keys n_total, overlap,
/// delta_star, gamma_star and tau expand into the cartesian grid of scenarios;
/// analysis_gamma and analysis_delta are ladders shared by every scenario.
std::vector<std::string> const& scenario_keys();
std::vector<ScenarioSpec> scenarios_from_config(ConfigFile const& file);

}  // namespace cfuse
