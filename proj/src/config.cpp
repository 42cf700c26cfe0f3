#include "cfuse/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cfuse/error.hpp"

namespace cfuse {

namespace {

std::string trim(std::string const& s)
{
    auto const b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    auto const e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s)
{
    for (char& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

}  // namespace

ConfigFile ConfigFile::parse(std::string const& text, std::string const& source)
{
    ConfigFile cfg;
    cfg.source_ = source;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        // Comments start at a '#' outside double quotes.
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') {
                quoted = !quoted;
            } else if (line[i] == '#' && !quoted) {
                line.erase(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto const eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError(source + ":" + std::to_string(number) + ": expected 'key = value'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw InputError(source + ":" + std::to_string(number) + ": empty key");
        }
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        cfg.entries_.emplace_back(std::move(key), std::move(value));
        cfg.lines_.push_back(number);
    }
    return cfg;
}

ConfigFile ConfigFile::load(std::string const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot read config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

bool ConfigFile::has(std::string const& key) const
{
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](auto const& e) { return e.first == key; });
}

std::vector<std::string> ConfigFile::all(std::string const& key) const
{
    std::vector<std::string> out;
    for (auto const& [k, v] : entries_) {
        if (k == key) {
            out.push_back(v);
        }
    }
    return out;
}

std::optional<std::string> ConfigFile::single(std::string const& key) const
{
    auto const values = all(key);
    if (values.empty()) {
        return std::nullopt;
    }
    if (values.size() > 1) {
        throw InputError(source_ + ": key '" + key + "' may appear only once");
    }
    return values.front();
}

void ConfigFile::require_known(std::vector<std::string> const& known) const
{
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (std::find(known.begin(), known.end(), entries_[i].first) == known.end()) {
            throw InputError(source_ + ":" + std::to_string(lines_[i]) + ": unknown key '"
                             + entries_[i].first + "'");
        }
    }
}

double parse_double(std::string const& text, std::string const& what)
{
    std::string const t = trim(text);
    char* end = nullptr;
    errno = 0;
    double const v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
        throw InputError(what + ": '" + text + "' is not a finite number");
    }
    return v;
}

long long parse_integer(std::string const& text, std::string const& what)
{
    std::string const t = trim(text);
    char* end = nullptr;
    errno = 0;
    long long const v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
        throw InputError(what + ": '" + text + "' is not an integer");
    }
    return v;
}

bool parse_bool(std::string const& text, std::string const& what)
{
    std::string const t = lower(trim(text));
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw InputError(what + ": '" + text + "' is not a boolean");
}

OverlapSpec OverlapSpec::parse(std::string const& text)
{
    std::string const t = trim(text);
    OverlapSpec spec;
    std::string const l = lower(t);
    if (l == "all" || l == "[]") {
        spec.kind = Kind::kAll;
        return spec;
    }
    if (l == "rct_box" || l == "rct_bounding_box") {
        spec.kind = Kind::kRctBox;
        return spec;
    }
    auto fail = [&](std::string const& m) {
        throw InputError("overlap: " + m + " in '" + text + "'");
    };
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
        fail("expected all, rct_box or a [{var=..., lo=..., hi=...}] list");
    }
    spec.kind = Kind::kBounds;
    std::size_t pos = 1;
    while (true) {
        auto const open = t.find('{', pos);
        if (open == std::string::npos) {
            if (trim(t.substr(pos, t.size() - 1 - pos)).find_first_not_of(", ") != std::string::npos) {
                fail("unexpected text");
            }
            break;
        }
        auto const close = t.find('}', open);
        if (close == std::string::npos) {
            fail("unterminated '{'");
        }
        Bound b;
        std::stringstream fields(t.substr(open + 1, close - open - 1));
        std::string field;
        while (std::getline(fields, field, ',')) {
            field = trim(field);
            if (field.empty()) {
                continue;
            }
            auto const eq = field.find('=');
            if (eq == std::string::npos) {
                fail("expected name=value");
            }
            std::string const name = lower(trim(field.substr(0, eq)));
            std::string value = trim(field.substr(eq + 1));
            if (name == "var") {
                if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
                    value = value.substr(1, value.size() - 2);
                }
                b.var = value;
            } else if (name == "lo") {
                b.lo = parse_double(value, "overlap lo");
            } else if (name == "hi") {
                b.hi = parse_double(value, "overlap hi");
            } else {
                fail("unknown field '" + name + "'");
            }
        }
        if (b.var.empty()) {
            fail("bound without var");
        }
        if (b.lo && b.hi && *b.lo > *b.hi) {
            fail("lo > hi for '" + b.var + "'");
        }
        spec.bounds.push_back(b);
        pos = close + 1;
    }
    return spec;
}

OverlapRule OverlapSpec::resolve(std::vector<std::string> const& covariate_names) const
{
    if (kind == Kind::kAll) {
        return OverlapRule::unbounded();
    }
    if (kind == Kind::kRctBox) {
        return OverlapRule::rct_bounding_box();
    }
    OverlapRule rule;
    for (auto const& b : bounds) {
        auto const it = std::find(covariate_names.begin(), covariate_names.end(), b.var);
        if (it == covariate_names.end()) {
            throw InputError("overlap: unknown covariate '" + b.var + "'");
        }
        CovariateBound cb;
        cb.index = static_cast<std::size_t>(it - covariate_names.begin());
        if (b.lo) cb.lo = *b.lo;
        if (b.hi) cb.hi = *b.hi;
        rule.bounds.push_back(cb);
    }
    return rule;
}

RctScheme parse_scheme(std::string const& text)
{
    std::string const t = lower(trim(text));
    if (t == "bernoulli") return RctScheme::kBernoulli;
    if (t == "complete") return RctScheme::kComplete;
    if (t == "blocked") return RctScheme::kBlocked;
    throw InputError("unknown rct scheme '" + text + "' (expected bernoulli, complete or blocked)");
}

char const* to_string(RctScheme s)
{
    switch (s) {
    case RctScheme::kBernoulli: return "bernoulli";
    case RctScheme::kComplete: return "complete";
    case RctScheme::kBlocked: return "blocked";
    }
    return "bernoulli";
}

void RunConfig::validate() const
{
    auto fail = [](std::string const& m) { throw InputError("config: " + m); };
    auto check_ladder = [&](std::vector<double> const& v, std::string const& name, double floor,
                            std::string const& floor_text) {
        if (v.empty()) fail(name + " ladder is empty");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!(v[i] >= floor) || !std::isfinite(v[i])) {
                fail(name + " values must be finite and >= " + floor_text);
            }
            if (i > 0 && !(v[i] > v[i - 1])) {
                fail(name + " ladder must be strictly ascending");
            }
        }
    };
    check_ladder(gammas, "gamma", 1.0, "1");
    check_ladder(deltas, "delta", 0.0, "0");
    if (!(alpha > 0.0 && alpha < 0.5)) fail("alpha must lie in (0, 0.5)");
    if (controls_per_set < 1) fail("controls_per_set must be >= 1");
    if (mc_samples < 99) fail("mc_samples must be >= 99");
    if (!(rct_theta > 0.0 && rct_theta < 1.0)) fail("rct_theta must lie in (0, 1)");
    if (!(clamp > 0.0 && clamp < 0.5)) fail("clamp must lie in (0, 0.5)");
    if (grid.beta_points < 3) fail("grid_points must be >= 3");
    if (grid.envelope_points < 2) fail("envelope_points must be >= 2");
}

PipelineOptions RunConfig::pipeline_options(std::vector<std::string> const& covariate_names) const
{
    PipelineOptions o;
    o.overlap = overlap.resolve(covariate_names);
    o.controls_per_set = controls_per_set;
    o.clamp = clamp;
    o.rct_theta = rct_theta;
    o.rct_scheme = rct_scheme;
    o.residualize = residualize;
    o.rct_matched_copies = rct_matched_copies;
    return o;
}

std::vector<std::string> const& run_config_keys()
{
    static std::vector<std::string> const keys{
        "input", "covariate", "overlap", "gamma", "delta", "alpha", "controls_per_set",
        "mc_samples", "seed", "rct_theta", "rct_scheme", "rct_copies", "clamp", "residualize",
        "grid_points", "envelope_points", "output_dir"};
    return keys;
}

namespace {

std::vector<double> doubles(ConfigFile const& f, std::string const& key)
{
    std::vector<double> out;
    for (auto const& v : f.all(key)) {
        out.push_back(parse_double(v, key));
    }
    return out;
}

std::size_t positive_count(std::string const& text, std::string const& key)
{
    long long const v = parse_integer(text, key);
    if (v < 0) {
        throw InputError(key + " must be non-negative");
    }
    return static_cast<std::size_t>(v);
}

std::uint64_t parse_seed(std::string const& text, std::string const& key)
{
    std::string const t = trim(text);
    char* end = nullptr;
    errno = 0;
    unsigned long long const v = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || t.front() == '-' || end != t.c_str() + t.size() || errno == ERANGE) {
        throw InputError(key + ": '" + text + "' is not a 64-bit unsigned seed");
    }
    return v;
}

}  // namespace

RunConfig apply_run_config(RunConfig c, ConfigFile const& f)
{
    f.require_known(run_config_keys());
    if (auto v = f.single("input")) c.input = *v;
    if (f.has("covariate")) c.covariates = f.all("covariate");
    if (auto v = f.single("overlap")) c.overlap = OverlapSpec::parse(*v);
    if (f.has("gamma")) c.gammas = doubles(f, "gamma");
    if (f.has("delta")) c.deltas = doubles(f, "delta");
    if (auto v = f.single("alpha")) c.alpha = parse_double(*v, "alpha");
    if (auto v = f.single("controls_per_set")) c.controls_per_set = positive_count(*v, "controls_per_set");
    if (auto v = f.single("mc_samples")) c.mc_samples = positive_count(*v, "mc_samples");
    if (auto v = f.single("seed")) c.seed = parse_seed(*v, "seed");
    if (auto v = f.single("rct_theta")) c.rct_theta = parse_double(*v, "rct_theta");
    if (auto v = f.single("rct_scheme")) c.rct_scheme = parse_scheme(*v);
    if (auto v = f.single("rct_copies")) {
        std::string const t = lower(*v);
        if (t != "matched" && t != "plan") {
            throw InputError("rct_copies must be 'matched' or 'plan'");
        }
        c.rct_matched_copies = t == "matched";
    }
    if (auto v = f.single("clamp")) c.clamp = parse_double(*v, "clamp");
    if (auto v = f.single("residualize")) c.residualize = parse_bool(*v, "residualize");
    if (auto v = f.single("grid_points")) c.grid.beta_points = static_cast<int>(parse_integer(*v, "grid_points"));
    if (auto v = f.single("envelope_points")) c.grid.envelope_points = static_cast<int>(parse_integer(*v, "envelope_points"));
    if (auto v = f.single("output_dir")) c.output_dir = *v;
    return c;
}

std::vector<std::string> const& scenario_keys()
{
    static std::vector<std::string> const keys{
        "name", "n_total", "overlap", "delta_star", "gamma_star", "tau", "analysis_gamma",
        "analysis_delta", "replications", "alpha", "mc_samples", "seed", "controls_per_set",
        "rct_scheme"};
    return keys;
}

std::vector<ScenarioSpec> scenarios_from_config(ConfigFile const& f)
{
    f.require_known(scenario_keys());
    ScenarioSpec base;
    if (auto v = f.single("name")) base.name = *v;
    if (auto v = f.single("replications")) base.replications = positive_count(*v, "replications");
    if (auto v = f.single("alpha")) base.alpha = parse_double(*v, "alpha");
    if (auto v = f.single("mc_samples")) base.mc_samples = positive_count(*v, "mc_samples");
    if (auto v = f.single("seed")) base.base_seed = parse_seed(*v, "seed");
    if (auto v = f.single("controls_per_set")) base.controls_per_set = positive_count(*v, "controls_per_set");
    if (auto v = f.single("rct_scheme")) base.analysis_scheme = parse_scheme(*v);
    base.analysis_gamma = doubles(f, "analysis_gamma");
    base.analysis_delta = doubles(f, "analysis_delta");

    std::vector<std::size_t> sizes;
    for (auto const& v : f.all("n_total")) sizes.push_back(positive_count(v, "n_total"));
    if (sizes.empty()) sizes.push_back(base.n_total);
    std::vector<OverlapRegime> regimes;
    for (auto const& v : f.all("overlap")) regimes.push_back(parse_regime(v));
    if (regimes.empty()) regimes.push_back(base.overlap);
    std::vector<double> dstars = doubles(f, "delta_star");
    if (dstars.empty()) dstars.push_back(0.0);
    std::vector<double> gstars = doubles(f, "gamma_star");
    if (gstars.empty()) gstars.push_back(1.0);
    std::vector<std::optional<double>> taus;
    for (double t : doubles(f, "tau")) taus.push_back(t);
    if (taus.empty()) taus.push_back(std::nullopt);

    std::vector<ScenarioSpec> out;
    for (auto n : sizes) {
        for (auto o : regimes) {
            for (double d : dstars) {
                for (double g : gstars) {
                    for (auto const& t : taus) {
                        ScenarioSpec s = base;
                        s.n_total = n;
                        s.overlap = o;
                        s.delta_star = d;
                        s.gamma_star = g;
                        s.effect_tau = t;
                        s.validate();
                        out.push_back(s);
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace cfuse
