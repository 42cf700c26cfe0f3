#include "cfuse/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cfuse/config.hpp"
#include "cfuse/error.hpp"
#include "cfuse/gen_score.hpp"
#include "cfuse/pipeline.hpp"
#include "cfuse/sim_lab.hpp"

namespace cfuse {

namespace {

// CSV cells round-trip exactly.
std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string brief(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

struct Artifact {
    std::string name;
    std::string content;
};

/// Writes every artifact or none: on failure the files already written are
/// removed before the error propagates.
void write_all(std::string const& dir, std::vector<Artifact> const& artifacts)
{
    namespace fs = std::filesystem;
    std::vector<fs::path> written;
    try {
        fs::create_directories(dir);
        for (auto const& a : artifacts) {
            fs::path const p = fs::path(dir) / a.name;
            std::ofstream f(p, std::ios::binary | std::ios::trunc);
            if (!f) {
                throw std::runtime_error("cannot write '" + p.string() + "'");
            }
            written.push_back(p);
            f << a.content;
            f.flush();
            if (!f) {
                throw std::runtime_error("write failed for '" + p.string() + "'");
            }
        }
    } catch (...) {
        std::error_code ec;
        for (auto const& p : written) {
            fs::remove(p, ec);
        }
        throw;
    }
}

std::string scores_csv(CopyPlan const& plan)
{
    std::ostringstream s;
    s << "#schema: id,nu_hat,copies\n" << "id,nu_hat,copies\n";
    for (auto const& u : plan.units) {
        s << u.id << ',' << fmt(u.nu_hat) << ',' << u.copies << '\n';
    }
    return s.str();
}

std::string matched_csv(std::vector<MatchedSet> const& sets)
{
    std::ostringstream s;
    s << "#schema: set_id,unit_id,role,in_overlap\n" << "set_id,unit_id,role,in_overlap\n";
    for (auto const& m : sets) {
        int const ov = m.in_overlap ? 1 : 0;
        s << m.set_id << ',' << m.treated_id << ",os_treated," << ov << '\n';
        for (auto const& c : m.control_ids) {
            s << m.set_id << ',' << c << ",os_control," << ov << '\n';
        }
        if (m.rct_id) {
            s << m.set_id << ',' << *m.rct_id << ",rct," << ov << '\n';
        }
    }
    return s.str();
}

std::string balance_csv(BalanceReport const& b)
{
    std::ostringstream s;
    s << "#schema: domain,contrast,covariate,smd_before,smd_after\n"
      << "domain,contrast,covariate,smd_before,smd_after\n";
    for (auto const& e : b.entries) {
        s << e.domain << ',' << e.contrast << ',' << e.covariate << ',' << fmt(e.before) << ','
          << fmt(e.after) << '\n';
    }
    char const* names[2] = {"overlap", "nonoverlap"};
    for (int d = 0; d < 2; ++d) {
        if (b.has_domain[d]) {
            s << names[d] << ",max_abs,all," << fmt(b.max_abs_before[d]) << ','
              << fmt(b.max_abs_after[d]) << '\n';
        }
    }
    return s.str();
}

std::string ladder_csv(std::vector<LadderRow> const& rows)
{
    std::ostringstream s;
    s << "#schema: method,gamma,delta,alpha,lower,upper\n" << "method,gamma,delta,alpha,lower,upper\n";
    for (auto const& r : rows) {
        s << r.method << ',' << fmt(r.gamma) << ',' << fmt(r.delta) << ',' << fmt(r.alpha) << ','
          << fmt(r.lower) << ',' << fmt(r.upper) << '\n';
    }
    return s.str();
}

void print_ladder(std::ostream& out, std::vector<LadderRow> const& rows, double alpha)
{
    char line[160];
    std::snprintf(line, sizeof line, "%.0f%% confidence intervals\n", 100.0 * (1.0 - alpha));
    out << line;
    for (auto const& r : rows) {
        std::string label;
        if (r.method == "rct") {
            label = "RCT       Delta=" + brief(r.delta);
        } else if (r.method == "os") {
            label = "OS        Gamma=" + brief(r.gamma);
        } else {
            label = "Combined  Delta=" + brief(r.delta) + ", Gamma=" + brief(r.gamma);
        }
        std::snprintf(line, sizeof line, "  %-36s [%9.4f, %9.4f]\n", label.c_str(), r.lower, r.upper);
        out << line;
    }
}

struct StudyFlags {
    std::string config;
    std::string input;
    std::vector<std::string> covariates;
    std::string overlap;
    std::string output_dir;
    std::vector<double> gammas;
    std::vector<double> deltas;
    double alpha = -1.0;
    long long controls_per_set = -1;
    long long mc_samples = -1;
    std::string seed;
    std::string rct_scheme;
    double rct_theta = -1.0;
};

void add_study_flags(CLI::App* cmd, StudyFlags& f, bool inference, bool matching)
{
    cmd->add_option("--config", f.config, "Key=value config file");
    cmd->add_option("--input", f.input, "Study CSV (id,source,z,y,covariates...)");
    cmd->add_option("--covariate", f.covariates, "Covariate column (repeatable; default: all)");
    cmd->add_option("--overlap", f.overlap, "all | rct_box | [{var=\"x1\", lo=-1.0}]");
    cmd->add_option("--output-dir", f.output_dir, "Directory for output artifacts");
    if (matching) {
        cmd->add_option("--controls-per-set", f.controls_per_set, "OS controls per matched set");
    }
    if (inference) {
        cmd->add_option("--gamma", f.gammas, "Gamma ladder value (repeatable)");
        cmd->add_option("--delta", f.deltas, "Delta ladder value (repeatable)");
        cmd->add_option("--alpha", f.alpha, "Two-sided level (default 0.05)");
        cmd->add_option("--mc-samples", f.mc_samples, "Monte Carlo draws (default 10000)");
        cmd->add_option("--seed", f.seed, "RNG seed (fallback: CAUSAL_FUSE_SEED)");
        cmd->add_option("--rct-scheme", f.rct_scheme, "bernoulli | complete | blocked");
        cmd->add_option("--rct-theta", f.rct_theta, "RCT treatment probability (default 0.5)");
    }
}

std::uint64_t env_seed(std::uint64_t fallback)
{
    char const* env = std::getenv("CAUSAL_FUSE_SEED");
    if (!env || !*env) {
        return fallback;
    }
    ConfigFile const f = ConfigFile::parse(std::string("seed = ") + env, "CAUSAL_FUSE_SEED");
    return apply_run_config(RunConfig{}, f).seed;
}

RunConfig build_config(StudyFlags const& f)
{
    RunConfig c;
    c.seed = env_seed(c.seed);
    if (!f.config.empty()) {
        c = apply_run_config(c, ConfigFile::load(f.config));
    }
    if (!f.input.empty()) c.input = f.input;
    if (!f.covariates.empty()) c.covariates = f.covariates;
    if (!f.overlap.empty()) c.overlap = OverlapSpec::parse(f.overlap);
    if (!f.output_dir.empty()) c.output_dir = f.output_dir;
    if (!f.gammas.empty()) c.gammas = f.gammas;
    if (!f.deltas.empty()) c.deltas = f.deltas;
    if (f.alpha != -1.0) c.alpha = f.alpha;
    if (f.controls_per_set != -1) {
        if (f.controls_per_set < 1) throw InputError("--controls-per-set must be >= 1");
        c.controls_per_set = static_cast<std::size_t>(f.controls_per_set);
    }
    if (f.mc_samples != -1) {
        if (f.mc_samples < 1) throw InputError("--mc-samples must be positive");
        c.mc_samples = static_cast<std::size_t>(f.mc_samples);
    }
    if (!f.seed.empty()) c.seed = apply_run_config(RunConfig{}, ConfigFile::parse("seed = " + f.seed, "--seed")).seed;
    if (!f.rct_scheme.empty()) c.rct_scheme = parse_scheme(f.rct_scheme);
    if (f.rct_theta != -1.0) c.rct_theta = f.rct_theta;
    if (c.input.empty()) {
        throw InputError("no input study: pass --input or set 'input' in the config");
    }
    c.validate();
    return c;
}

std::string report_csv(std::vector<ScenarioReport> const& reports)
{
    std::ostringstream s;
    std::string const cols =
        "scenario,n_total,overlap,delta_star,gamma_star,tau,method,gamma,delta,replications,"
        "failures,coverage,mean_length,rejection_rate,smd_before_overlap,smd_after_overlap,"
        "smd_before_nonoverlap,smd_after_nonoverlap";
    s << "#schema: " << cols << '\n' << cols << '\n';
    for (auto const& r : reports) {
        for (auto const& m : r.summaries) {
            s << r.spec.name << ',' << r.spec.n_total << ',' << to_string(r.spec.overlap) << ','
              << fmt(r.spec.delta_star) << ',' << fmt(r.spec.gamma_star) << ','
              << (r.spec.effect_tau ? fmt(*r.spec.effect_tau) : std::string("NA")) << ','
              << m.method << ',' << fmt(m.gamma) << ',' << fmt(m.delta) << ',' << m.count << ','
              << r.failures << ',' << fmt(m.coverage) << ',' << fmt(m.mean_length) << ','
              << fmt(m.rejection_rate) << ',' << fmt(r.mean_smd_before[0]) << ','
              << fmt(r.mean_smd_after[0]) << ',' << fmt(r.mean_smd_before[1]) << ','
              << fmt(r.mean_smd_after[1]) << '\n';
        }
    }
    return s.str();
}

std::string power_csv(std::vector<ScenarioReport> const& reports)
{
    std::ostringstream s;
    std::string const cols = "scenario,n_total,overlap,tau,method,gamma,delta,replications,rejection_rate";
    s << "#schema: " << cols << '\n' << cols << '\n';
    for (auto const& r : reports) {
        if (!r.spec.effect_tau) {
            continue;
        }
        for (auto const& m : r.summaries) {
            s << r.spec.name << ',' << r.spec.n_total << ',' << to_string(r.spec.overlap) << ','
              << fmt(*r.spec.effect_tau) << ',' << m.method << ',' << fmt(m.gamma) << ','
              << fmt(m.delta) << ',' << m.count << ',' << fmt(m.rejection_rate) << '\n';
        }
    }
    return s.str();
}

}  // namespace

int run_cli(std::vector<std::string> const& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"causal_fuse: combine an RCT and an observational study under (Gamma, Delta) sensitivity",
                 "causal_fuse"};
    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (default: machine parallelism)");

    StudyFlags score_f;
    StudyFlags match_f;
    StudyFlags analyze_f;
    auto* score = app.add_subcommand("score", "Fit the generalization score; write scores.csv");
    add_study_flags(score, score_f, false, false);
    auto* match = app.add_subcommand("match", "Triplet matching; write matched.csv and balance.csv");
    add_study_flags(match, match_f, false, true);
    auto* analyze = app.add_subcommand("analyze", "Gamma/Delta ladder of intervals; write ladder.csv");
    add_study_flags(analyze, analyze_f, true, true);

    std::string scenario_path;
    std::string sim_out = ".";
    std::string sim_seed;
    auto* simulate = app.add_subcommand("simulate", "Run simulation scenarios; write report.csv");
    simulate->add_option("--scenario", scenario_path, "Scenario config file")->required();
    simulate->add_option("--output-dir", sim_out, "Directory for report.csv / power.csv");
    simulate->add_option("--seed", sim_seed, "Base seed (overrides the scenario file)");
    app.require_subcommand(1);

    if (args.size() <= 1) {
        err << app.help();
        return 1;
    }
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    try {
        app.parse(rev);
    } catch (CLI::CallForHelp const&) {
        out << app.help();
        return 0;
    } catch (CLI::CallForAllHelp const&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (CLI::ParseError const& e) {
        err << "causal_fuse: " << e.what() << "\n" << "run 'causal_fuse --help' for usage\n";
        return 1;
    }
    for (auto* sub : {score, match, analyze}) {
        if (sub->parsed() && sub->get_help_ptr() && sub->get_help_ptr()->count() > 0) {
            out << sub->help();
            return 0;
        }
    }

#ifdef _OPENMP
    if (threads > 0) {
        omp_set_num_threads(threads);
    }
#endif
    if (threads < 0) {
        err << "causal_fuse: --threads must be positive\n";
        return 1;
    }

    // Phase 1: validation (exit 1). Phase 2: computation and writing (exit 2).
    enum class Phase { kValidate, kRun } phase = Phase::kValidate;
    try {
        if (simulate->parsed()) {
            ConfigFile cfg = ConfigFile::load(scenario_path);
            if (!sim_seed.empty()) {
                std::string text = "seed = " + sim_seed + "\n";
                for (auto const& [k, v] : cfg.entries()) {
                    if (k != "seed") text += k + " = " + v + "\n";
                }
                cfg = ConfigFile::parse(text, scenario_path);
            } else if (!cfg.has("seed")) {
                std::string text = "seed = " + std::to_string(env_seed(1)) + "\n";
                for (auto const& [k, v] : cfg.entries()) {
                    text += k + " = " + v + "\n";
                }
                cfg = ConfigFile::parse(text, scenario_path);
            }
            auto const specs = scenarios_from_config(cfg);
            phase = Phase::kRun;
            std::vector<ScenarioReport> reports;
            bool any_tau = false;
            for (auto const& spec : specs) {
                std::string const label = spec.name + " N=" + std::to_string(spec.n_total) + " "
                                          + to_string(spec.overlap);
                auto progress = [&](std::size_t done, std::size_t total) {
                    std::size_t const stride = std::max<std::size_t>(1, total / 10);
                    if (done == total || done % stride == 0) {
                        err << "[" << label << "] replication " << done << "/" << total << '\n';
                    }
                };
                reports.push_back(run_scenario(spec, true, progress));
                any_tau = any_tau || spec.effect_tau.has_value();
                if (reports.back().failed) {
                    err << "causal_fuse: scenario '" << label << "' failed: "
                        << reports.back().failures << " of " << spec.replications
                        << " replications errored\n";
                    return 2;
                }
            }
            std::vector<Artifact> files{{"report.csv", report_csv(reports)}};
            if (any_tau) {
                files.push_back({"power.csv", power_csv(reports)});
            }
            write_all(sim_out, files);
            for (auto const& r : reports) {
                out << r.spec.name << " N=" << r.spec.n_total << ' ' << to_string(r.spec.overlap)
                    << " delta*=" << brief(r.spec.delta_star) << " gamma*=" << brief(r.spec.gamma_star)
                    << '\n';
                for (auto const& m : r.summaries) {
                    char line[160];
                    std::snprintf(line, sizeof line,
                                  "  %-8s Gamma=%-5s Delta=%-5s coverage %.3f  length %.3f\n",
                                  m.method.c_str(), brief(m.gamma).c_str(), brief(m.delta).c_str(),
                                  m.coverage, m.mean_length);
                    out << line;
                }
            }
            return 0;
        }

        StudyFlags const& f = score->parsed() ? score_f : match->parsed() ? match_f : analyze_f;
        RunConfig const cfg = build_config(f);
        StudyData const raw = load_csv(cfg.input, cfg.covariates);
        PipelineOptions const options = cfg.pipeline_options(raw.covariate_names());
        phase = Phase::kRun;

        if (score->parsed()) {
            StudyData const flagged = apply_overlap(raw, options.overlap);
            auto const model = fit_generalization(flagged, options.clamp);
            auto const plan = plan_copies(model, flagged);
            write_all(cfg.output_dir, {{"scores.csv", scores_csv(plan)}});
            out << "scored " << plan.units.size() << " RCT units; total copies "
                << plan.total_copies() << ", imaginary treated " << plan.imaginary_treated
                << ", imaginary RCT " << plan.imaginary_rct << '\n';
            return 0;
        }
        MatchedStudy const study = build_matched_study(raw, options);
        if (match->parsed()) {
            write_all(cfg.output_dir, {{"matched.csv", matched_csv(study.match.sets)},
                                       {"balance.csv", balance_csv(study.match.balance)}});
            auto const& b = study.match.balance;
            out << "matched sets: " << study.match.sets.size() << '\n';
            for (int d = 0; d < 2; ++d) {
                if (b.has_domain[d]) {
                    out << (d == 0 ? "  overlap" : "  nonoverlap")
                        << " max |SMD| before " << brief(b.max_abs_before[d]) << ", after "
                        << brief(b.max_abs_after[d]) << '\n';
                }
            }
            return 0;
        }
        LadderEngine engine(study, cfg.mc_samples, SeededRng(cfg.seed, 0), true, cfg.grid);
        auto const rows = engine.ladder(cfg.gammas, cfg.deltas, cfg.alpha);
        write_all(cfg.output_dir, {{"ladder.csv", ladder_csv(rows)}});
        print_ladder(out, rows, cfg.alpha);
        return 0;
    } catch (InputError const& e) {
        err << "causal_fuse: " << e.what() << '\n';
        return phase == Phase::kValidate ? 1 : 2;
    } catch (std::exception const& e) {
        err << "causal_fuse: " << e.what() << '\n';
        return phase == Phase::kValidate ? 1 : 2;
    }
}

int run_cli(int argc, char** argv)
{
    std::vector<std::string> args(argv, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace cfuse
