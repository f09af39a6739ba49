#include "cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mfe/engine.hpp"
#include "mfe/error.hpp"
#include "mfe/record.hpp"

namespace mfe::cli {

using ojson = nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsage = 2;

/// Thrown for bad flag values that CLI11 cannot catch by itself.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

SimTime parse_horizon(const std::string& text) {
    Rational r;
    try {
        r = Rational::parse(text);
    } catch (const std::exception&) {
        throw UsageError("invalid horizon '" + text + "'");
    }
    if (r < Rational(0)) throw UsageError("horizon must be non-negative");
    const Rational ticks = r * Rational(SimTime::kTicksPerTerm);
    if (!ticks.is_integer()) throw UsageError("horizon '" + text + "' is finer than one tick");
    return SimTime::from_ticks(ticks.num());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
    if (!f) throw std::runtime_error("failed writing " + path);
}

RecordFormat parse_format(const std::string& name, const std::string& path) {
    if (name == "csv") return RecordFormat::Csv;
    if (name == "json") return RecordFormat::Json;
    if (name.empty()) return path.empty() ? RecordFormat::Csv : format_from_path(path);
    throw UsageError("unknown record format '" + name + "'");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

ojson scenario_header(const std::string& path, const ScenarioSpec& spec) {
    return ojson{{"scenario", path}, {"name", spec.name}, {"fingerprint", spec.fingerprint()}};
}

struct SimulateOpts {
    std::string scenario, horizon = "10", log, record, format;
    std::optional<std::uint64_t> seed;
};

int do_simulate(const SimulateOpts& o, std::ostream& out) {
    const std::string path = resolve_scenario(o.scenario);
    ScenarioSpec spec = load_scenario(path);
    if (o.seed) spec.seed = *o.seed;
    const SimTime horizon = parse_horizon(o.horizon);
    const RecordFormat fmt = parse_format(o.format, o.record);

    NetworkState state = build_network(spec);
    EventLog log;
    run(state, horizon, log);

    if (!o.log.empty()) write_file(o.log, to_jsonl(log));
    Record record = compile_record(log, state);
    if (!o.record.empty()) write_file(o.record, record_to_string(record, fmt));

    ojson report;
    report["command"] = "simulate";
    ojson config = scenario_header(path, spec);
    config["seed"] = spec.seed;
    config["horizon"] = horizon.as_terms().to_string();
    config["log"] = o.log;
    config["record"] = o.record;
    report["config"] = config;
    const Money total = state.total_stock();
    report["summary"] = ojson{{"events", log.size()},
                              {"closed_terms", state.closed_terms},
                              {"total_stock", total.units()},
                              {"cumulative_issuance", state.cumulative_issuance.units()},
                              {"initial_total_stock", state.initial_total_stock.units()},
                              {"conserved", total - state.cumulative_issuance == state.initial_total_stock}};
    out << report.dump(2) << "\n";
    return kOk;
}

struct RecordOpts {
    std::string scenario, out, format;
    std::int64_t terms = 10;
    std::optional<std::uint64_t> seed;
};

int do_record(const RecordOpts& o, std::ostream& out) {
    const std::string path = resolve_scenario(o.scenario);
    ScenarioSpec spec = load_scenario(path);
    if (o.seed) spec.seed = *o.seed;
    if (o.terms < 0) throw UsageError("--terms must be non-negative");
    const RecordFormat fmt = parse_format(o.format, o.out);
    const Record record = retrace({}, spec, o.terms);
    const std::string text = record_to_string(record, fmt);
    if (o.out.empty()) {
        out << text;
    } else {
        write_file(o.out, text);
        ojson report;
        report["command"] = "record";
        ojson config = scenario_header(path, spec);
        config["seed"] = spec.seed;
        config["terms"] = o.terms;
        config["out"] = o.out;
        config["format"] = fmt == RecordFormat::Csv ? "csv" : "json";
        report["config"] = config;
        report["terms_written"] = record.terms();
        out << report.dump(2) << "\n";
    }
    return kOk;
}

struct VerifyOpts {
    std::string record;
};

int do_verify(const VerifyOpts& o, std::ostream& out) {
    std::vector<std::string> warnings;
    const Record record = read_record(o.record, IdentityPolicy::Warn, &warnings);
    const auto reports = verify_identities(record);
    std::size_t checks = 0, failures = 0;
    out << "verify record=" << o.record << " fingerprint=" << record.fingerprint << " terms=" << record.terms()
        << "\n";
    for (const auto& r : reports) {
        for (const auto& c : r.checks) {
            ++checks;
            if (!c.passed) {
                ++failures;
                out << "FAIL term " << r.term_index << " " << c.name << " discrepancy " << c.discrepancy << "\n";
            }
        }
    }
    out << (failures == 0 ? "ok" : "violated") << ": " << checks - failures << "/" << checks << " identities hold\n";
    return failures == 0 ? kOk : kDomainFailure;
}

struct FitOpts {
    std::string target, scenario;
    FitConfig config;
    std::optional<std::int64_t> prefix;
    bool strict = false;
};

int do_fit(const FitOpts& o, std::ostream& out, std::ostream& err) {
    const std::string path = resolve_scenario(o.scenario);
    const ScenarioSpec spec = load_scenario(path);
    std::vector<std::string> warnings;
    const Record target = read_record(o.target, IdentityPolicy::Warn, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    if (!target.fingerprint.empty() && target.fingerprint != spec.fingerprint())
        err << "warning: target fingerprint " << target.fingerprint << " differs from scenario "
            << spec.fingerprint() << "\n";

    FitConfig cfg = o.config;
    cfg.prefix_terms = o.prefix;
    if (cfg.budget <= 0) throw UsageError("--budget must be positive");
    if (cfg.starts <= 0) throw UsageError("--starts must be positive");
    const FitResult result = fit(target, spec, cfg);

    ojson report;
    report["command"] = "fit";
    ojson config = scenario_header(path, spec);
    config["target"] = o.target;
    config["seed"] = cfg.seed;
    config["budget"] = cfg.budget;
    config["tolerance"] = cfg.tolerance;
    config["starts"] = cfg.starts;
    config["prefix"] = o.prefix ? ojson(*o.prefix) : ojson(nullptr);
    config["initial_step"] = cfg.initial_step;
    config["search_radius"] = cfg.search_radius;
    config["terms"] = target.terms();
    report["config"] = config;
    report["result"] = to_json(result);
    out << report.dump(2) << "\n";
    return o.strict && !result.converged ? kDomainFailure : kOk;
}

struct AnticipateOpts {
    std::string scenario, dims, instruments, trajectory;
    int candidates = 5, replays = 32, shocks = 4, jobs = 1;
    std::int64_t horizon = 12;
    std::uint64_t seed = 0;
    double shock_scale = 1.0, bound = 0.2;
    std::string metric = "max";
    bool fit_candidates = false;
    std::int64_t fit_budget = 2000;
};

int do_anticipate(const AnticipateOpts& o, std::ostream& out) {
    const std::string path = resolve_scenario(o.scenario);
    const ScenarioSpec spec = load_scenario(path);
    if (o.candidates < 1) throw UsageError("--candidates must be at least 1");
    if (o.replays < 0) throw UsageError("--replays must be non-negative");
    if (o.horizon < 1) throw UsageError("--horizon must be at least 1 term");

    AnticipationConfig cfg;
    cfg.candidates = o.candidates;
    cfg.sampler.seed = o.seed;
    cfg.sampler.relative_bound = o.bound;
    cfg.sampler.instruments = split_list(o.instruments);
    cfg.robustness.seed = o.seed;
    cfg.robustness.replays = o.replays;
    cfg.robustness.shocks_per_replay = o.shocks;
    cfg.robustness.shock_scale = o.shock_scale;
    cfg.robustness.horizon_terms = o.horizon;
    cfg.robustness.metric = o.metric;
    cfg.robustness.jobs = o.jobs;
    if (!o.dims.empty()) cfg.robustness.dims = split_list(o.dims);
    divergence_metric(o.metric);  // reject unknown names before any work
    cfg.fit_candidates = o.fit_candidates;
    cfg.fit.seed = o.seed;
    cfg.fit.budget = o.fit_budget;
    cfg.fit.jobs = o.jobs;

    std::vector<Candidate> candidates;
    const RobustnessReport rep = anticipate(spec, cfg, &candidates);
    const Candidate& chosen = candidates[static_cast<std::size_t>(rep.selected)];

    ojson report;
    report["command"] = "anticipate";
    ojson config = scenario_header(path, spec);
    config["seed"] = o.seed;
    config["candidates"] = o.candidates;
    config["replays"] = o.replays;
    config["shocks_per_replay"] = o.shocks;
    config["shock_scale"] = o.shock_scale;
    config["horizon"] = o.horizon;
    config["relative_bound"] = o.bound;
    config["metric"] = o.metric;
    config["dims"] = cfg.robustness.dims;
    config["fit_candidates"] = o.fit_candidates;
    if (o.fit_candidates) config["fit_budget"] = o.fit_budget;
    config["trajectory"] = o.trajectory;
    report["config"] = config;
    report["report"] = to_json(rep);

    ojson traj = ojson::array();
    for (Eigen::Index t = 0; t < chosen.trajectory.terms(); ++t) {
        ojson row = ojson::array();
        for (Eigen::Index d = 0; d < chosen.trajectory.points.cols(); ++d) row.push_back(chosen.trajectory.points(t, d));
        traj.push_back(row);
    }
    report["selected_trajectory"] = traj;
    if (!o.trajectory.empty()) {
        std::ostringstream csv;
        write_trajectory_csv(chosen.trajectory, csv);
        write_file(o.trajectory, csv.str());
    }
    out << report.dump(2) << "\n";
    return kOk;
}

}  // namespace

std::string resolve_scenario(const std::string& name) {
    namespace fs = std::filesystem;
    if (fs::exists(name)) return name;
    if (const char* dir = std::getenv("MFE_SCENARIO_DIR")) {
        for (const auto& p : {fs::path(dir) / name, fs::path(dir) / (name + ".json")})
            if (fs::exists(p)) return p.string();
    }
    throw UsageError("scenario '" + name + "' not found (set MFE_SCENARIO_DIR to search a directory)");
}

ojson to_json(const InconsistencyAssignment& a) {
    ojson offsets = ojson::object(), gains = ojson::object();
    for (const auto& [id, m] : a.offsets) offsets[id] = m.units();
    for (const auto& [id, g] : a.gains) gains[id] = g.to_string();
    return ojson{{"offsets", offsets}, {"gains", gains}};
}

ojson to_json(const FitResult& r) {
    ojson trace = ojson::array();
    for (const auto& [k, e] : r.trace) trace.push_back(ojson::array({k, e}));
    return ojson{{"error", r.error},
                 {"evaluations", r.evaluations},
                 {"converged", r.converged},
                 {"best", to_json(r.best)},
                 {"trace", trace}};
}

ojson to_json(const PolicySchedule& s) {
    ojson j;
    j["multipliers"] = ojson::array();
    for (const auto& m : s.multipliers)
        j["multipliers"].push_back(
            {{"time", m.time.as_terms().to_string()}, {"channel", m.channel}, {"multiplier", m.multiplier.to_string()}});
    j["gains"] = ojson::array();
    for (const auto& g : s.gains)
        j["gains"].push_back({{"time", g.time.as_terms().to_string()}, {"agent", g.agent}, {"gain", g.gain.to_string()}});
    j["issuance"] = ojson::array();
    for (const auto& i : s.issuance)
        j["issuance"].push_back({{"time", i.time.as_terms().to_string()}, {"amount", i.amount.units()}});
    return j;
}

ojson to_json(const RobustnessReport& r) {
    ojson cands = ojson::array();
    for (const auto& c : r.candidates) {
        ojson j{{"id", c.id},
                {"score", c.robustness.score},
                {"mean_divergence", c.robustness.mean_divergence},
                {"divergences", c.robustness.divergences},
                {"schedule", to_json(c.schedule)}};
        if (c.fit_error) j["fit_error"] = *c.fit_error;
        cands.push_back(j);
    }
    return ojson{{"selected", r.selected}, {"candidates", cands}};
}

void write_trajectory_csv(const Trajectory& t, std::ostream& out) {
    out << "term";
    for (const auto& d : t.dims) out << "," << d;
    out << "\n";
    char buf[32];
    for (Eigen::Index r = 0; r < t.terms(); ++r) {
        out << r;
        for (Eigen::Index c = 0; c < t.points.cols(); ++c) {
            const auto res = std::to_chars(buf, buf + sizeof buf, t.points(r, c));
            out << "," << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << "\n";
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Asynchronous monetary flow equilibration: simulate, record, verify, fit, anticipate", "mfe"};
    app.require_subcommand(1);

    SimulateOpts so;
    auto* sim = app.add_subcommand("simulate", "run a scenario and report conservation");
    sim->add_option("--scenario", so.scenario, "scenario file or name")->required();
    sim->add_option("--horizon", so.horizon, "simulated time in terms (decimal or p/q)")->capture_default_str();
    sim->add_option("--seed", so.seed, "override the scenario seed");
    sim->add_option("--log", so.log, "write the event log (JSON lines)");
    sim->add_option("--record", so.record, "write the compiled record");
    sim->add_option("--format", so.format, "record format: csv or json (default from extension)");

    RecordOpts ro;
    auto* rec = app.add_subcommand("record", "compile a record of whole terms");
    rec->add_option("--scenario", ro.scenario, "scenario file or name")->required();
    rec->add_option("--terms", ro.terms, "number of terms")->capture_default_str();
    rec->add_option("--out", ro.out, "output path (standard output if omitted)");
    rec->add_option("--format", ro.format, "csv or json (default from extension)");
    rec->add_option("--seed", ro.seed, "override the scenario seed");

    VerifyOpts vo;
    auto* ver = app.add_subcommand("verify", "check every accounting identity of a record");
    ver->add_option("--record", vo.record, "record file (csv or json)")->required();

    FitOpts fo;
    std::int64_t prefix = -1;
    auto* fit_cmd = app.add_subcommand("fit", "retrieve initial inconsistencies that reproduce a record");
    fit_cmd->add_option("--target", fo.target, "record to reproduce")->required();
    fit_cmd->add_option("--scenario", fo.scenario, "scenario file or name")->required();
    fit_cmd->add_option("--budget", fo.config.budget, "simulation budget")->capture_default_str();
    fit_cmd->add_option("--tol", fo.config.tolerance, "normalized RMS tolerance")->capture_default_str();
    fit_cmd->add_option("--seed", fo.config.seed, "search seed")->capture_default_str();
    fit_cmd->add_option("--prefix", prefix, "fit only the first K terms");
    fit_cmd->add_option("--starts", fo.config.starts, "number of starts")->capture_default_str();
    fit_cmd->add_option("--step", fo.config.initial_step, "initial pattern step")->capture_default_str();
    fit_cmd->add_option("--radius", fo.config.search_radius, "random start radius")->capture_default_str();
    fit_cmd->add_option("--jobs", fo.config.jobs, "concurrent starts")->capture_default_str();
    fit_cmd->add_flag("--strict", fo.strict, "exit 1 if the fit does not converge");

    AnticipateOpts ao;
    auto* ant = app.add_subcommand("anticipate", "score candidate futures by robustness");
    ant->add_option("--scenario", ao.scenario, "scenario file or name")->required();
    ant->add_option("--candidates", ao.candidates, "number of candidates")->capture_default_str();
    ant->add_option("--replays", ao.replays, "shocked replays per candidate")->capture_default_str();
    ant->add_option("--horizon", ao.horizon, "terms per trajectory")->capture_default_str();
    ant->add_option("--seed", ao.seed, "sampler and replay seed")->capture_default_str();
    ant->add_option("--shocks", ao.shocks, "shocks per replay")->capture_default_str();
    ant->add_option("--shock-scale", ao.shock_scale, "factor on resampled shock sizes")->capture_default_str();
    ant->add_option("--bound", ao.bound, "relative multiplier perturbation bound")->capture_default_str();
    ant->add_option("--instruments", ao.instruments, "comma-separated channel ids to perturb");
    ant->add_option("--dims", ao.dims, "comma-separated phase dimensions");
    ant->add_option("--metric", ao.metric, "max, mean or final")->capture_default_str();
    ant->add_option("--trajectory", ao.trajectory, "write the selected trajectory as CSV");
    ant->add_option("--jobs", ao.jobs, "concurrent replays")->capture_default_str();
    ant->add_flag("--fit-candidates", ao.fit_candidates, "retrieve each candidate before scoring");
    ant->add_option("--fit-budget", ao.fit_budget, "budget per candidate fit")->capture_default_str();

    std::vector<const char*> argv{"mfe"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return kOk;
        err << app.help();
        return kUsage;
    }

    try {
        if (sim->parsed()) return do_simulate(so, out);
        if (rec->parsed()) return do_record(ro, out);
        if (ver->parsed()) return do_verify(vo, out);
        if (fit_cmd->parsed()) {
            if (prefix >= 0) fo.prefix = prefix;
            return do_fit(fo, out, err);
        }
        if (ant->parsed()) return do_anticipate(ao, out);
    } catch (const OverflowError& e) {
        err << "error: " << e.what() << "\n";
        return kDomainFailure;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

}  // namespace mfe::cli
