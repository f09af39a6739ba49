#include "mfe/anticipation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "mfe/error.hpp"
#include "mfe/metrics.hpp"
#include "mfe/philox.hpp"

namespace mfe {

std::vector<std::string> default_dims() {
    return {"notes_outstanding", "discount_rate", "government_securities_outstanding", "securities_interest_rate"};
}

Trajectory extract_trajectory(const Record& record, const std::vector<std::string>& dims) {
    Trajectory tr;
    tr.dims = dims;
    tr.points.resize(static_cast<Eigen::Index>(record.sheets.size()), static_cast<Eigen::Index>(dims.size()));
    for (std::size_t t = 0; t < record.sheets.size(); ++t) {
        const BalanceSheet& s = record.sheets[t];
        for (std::size_t d = 0; d < dims.size(); ++d) {
            const std::string& name = dims[d];
            double v;
            if (name == "notes_outstanding") {
                v = static_cast<double>(s.aggregates.notes_outstanding.units());
            } else if (name == "government_securities_outstanding") {
                v = static_cast<double>(s.aggregates.government_securities_outstanding.units());
            } else if (name == "discount_rate") {
                v = s.aggregates.discount_rate.to_double();
            } else if (name == "securities_interest_rate") {
                v = s.aggregates.securities_interest_rate.to_double();
            } else if (name == "base_money") {
                v = static_cast<double>(s.base_money.units());
            } else {
                auto it = std::find_if(s.figures.begin(), s.figures.end(),
                                       [&](const NamedFigure& f) { return f.name == name; });
                if (it == s.figures.end()) throw ValidationError("unknown phase dimension '" + name + "'");
                v = it->value.to_double();
            }
            tr.points(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) = v;
        }
    }
    // Empty records still have to reject bad names.
    if (record.sheets.empty()) {
        static const auto known = default_dims();
        for (const auto& name : dims)
            if (std::find(known.begin(), known.end(), name) == known.end() && name != "base_money")
                throw ValidationError("unknown phase dimension '" + name + "'");
    }
    return tr;
}

Candidate make_candidate(const ScenarioSpec& spec, int id, const PolicySchedule& schedule, std::int64_t horizon_terms,
                         const std::vector<std::string>& dims, const InconsistencyAssignment& initial) {
    const Simulation sim = simulate(spec, horizon_terms, initial, schedule, {}, true);
    return Candidate{id, schedule, extract_trajectory(sim.record, dims)};
}

std::vector<Candidate> generate_candidates(const ScenarioSpec& spec, int n, const SamplerConfig& config) {
    if (n < 1) throw ValidationError("need at least one candidate");
    if (config.relative_bound < 0.0) throw ValidationError("perturbation bound must be non-negative");

    std::vector<std::string> instruments = config.instruments;
    if (instruments.empty())
        for (const auto& c : spec.channels)
            if (c.tag == "tax" || c.tag == "discount" || c.tag == "interest") instruments.push_back(c.id);

    // Bounds are applied in permille so multipliers stay exact rationals.
    const auto bound = static_cast<std::int64_t>(std::llround(config.relative_bound * 1000.0));
    const std::int64_t last_term = std::max<std::int64_t>(1, config.horizon_terms - 1);

    std::vector<Candidate> out;
    out.reserve(static_cast<std::size_t>(n));
    out.push_back(make_candidate(spec, 0, {}, config.horizon_terms, config.dims, config.initial));
    for (int id = 1; id < n; ++id) {
        CounterRng rng(config.seed, fnv1a64(std::to_string(id), fnv1a64("candidate/")));
        PolicySchedule schedule;
        for (const auto& ch : instruments) {
            auto it = std::find_if(spec.channels.begin(), spec.channels.end(),
                                   [&](const ChannelSpec& c) { return c.id == ch; });
            if (it == spec.channels.end()) throw ValidationError("unknown instrument channel '" + ch + "'");
            for (int k = 0; k < std::max(1, config.changes); ++k) {
                const std::int64_t term = k == 0 ? 1 : rng.uniform_int(1, last_term);
                const std::int64_t permille = 1000 + rng.uniform_int(-bound, bound);
                schedule.multipliers.push_back({SimTime::from_ticks(term * spec.term_length.ticks()), ch,
                                                it->multiplier * Rational(std::max<std::int64_t>(0, permille), 1000)});
            }
        }
        std::stable_sort(schedule.multipliers.begin(), schedule.multipliers.end(),
                         [](const MultiplierSetting& a, const MultiplierSetting& b) { return a.time < b.time; });
        out.push_back(make_candidate(spec, id, schedule, config.horizon_terms, config.dims, config.initial));
    }
    return out;
}

DivergenceMetric divergence_metric(const std::string& name) {
    if (name == "max")
        return [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& s) {
            return max_divergence(a, b, s);
        };
    if (name == "mean")
        return [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& s) {
            return mean_divergence(a, b, s);
        };
    if (name == "final")
        return [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& s) {
            return final_divergence(a, b, s);
        };
    throw ValidationError("unknown divergence metric '" + name + "'");
}

Eigen::VectorXd default_scales(const Trajectory& base) { return range_scales(base.points); }

double divergence(const Trajectory& base, const Trajectory& perturbed, const Eigen::VectorXd& scales) {
    if (base.dims != perturbed.dims) throw ValidationError("trajectories differ in dimensions");
    try {
        return max_divergence(base.points, perturbed.points, scales);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
}

double divergence(const Trajectory& base, const Trajectory& perturbed) {
    return divergence(base, perturbed, default_scales(base));
}

namespace {

Money round_half_up(const Rational& x) { return Money((x + Rational(1, 2)).floor()); }

/// Magnitudes of the imbalances the agents acted on in an unshocked run.
std::vector<Money> imbalance_pool(const EventLog& log) {
    std::vector<Money> pool;
    for (const auto& ev : log)
        if (const auto* u = std::get_if<AgentUpdateEvent>(&ev.payload); u && !u->exempt)
            pool.push_back(round_half_up(u->deficit.abs()));
    return pool;
}

std::vector<ShockSpec> draw_shocks(const ScenarioSpec& spec, const std::vector<Money>& pool,
                                   const RobustnessConfig& config, int candidate, int replay) {
    std::vector<ShockSpec> shocks;
    const std::int64_t first = spec.term_length.ticks();
    const std::int64_t last = config.horizon_terms * spec.term_length.ticks() - 1;
    if (last < first || config.shocks_per_replay <= 0) return shocks;

    std::vector<std::string> inner = assignment_agents(spec);
    std::vector<std::string> all;
    for (const auto& a : spec.agents) all.push_back(a.id);
    if (all.size() < 2) return shocks;
    if (inner.empty()) inner = all;

    CounterRng rng(config.seed,
                   fnv1a64(std::to_string(candidate) + "/" + std::to_string(replay), fnv1a64("replay/")));
    auto pick = [&](const std::vector<std::string>& from) {
        return from[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(from.size()) - 1))];
    };
    for (int k = 0; k < config.shocks_per_replay; ++k) {
        ShockSpec s;
        s.time = SimTime::from_ticks(rng.uniform_int(first, last));
        s.agent = pick(inner);
        std::vector<std::string> others;
        for (const auto& id : inner)
            if (id != s.agent) others.push_back(id);
        if (others.empty())
            for (const auto& id : all)
                if (id != s.agent) others.push_back(id);
        s.counterparty = pick(others);
        const Money base =
            pool.empty() ? Money(0)
                         : pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
        s.amount = Money(std::llround(static_cast<double>(base.units()) * config.shock_scale));
        shocks.push_back(std::move(s));
    }
    std::stable_sort(shocks.begin(), shocks.end(), [](const ShockSpec& a, const ShockSpec& b) { return a.time < b.time; });
    return shocks;
}

/// Runs `count` independent tasks on up to `jobs` threads; task i writes slot i.
template <typename Task>
void parallel_for(int count, int jobs, Task task) {
    jobs = std::max(1, std::min(jobs, count));
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) task(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

Robustness robustness_score(const Candidate& candidate, const ScenarioSpec& spec, const RobustnessConfig& config) {
    if (config.replays < 0) throw ValidationError("replay count must be non-negative");
    Robustness r;
    if (config.replays == 0) return r;

    const DivergenceMetric metric = divergence_metric(config.metric);
    const Simulation quiet = simulate(spec, config.horizon_terms, config.initial, candidate.schedule, {}, true);
    const Trajectory reference = extract_trajectory(quiet.record, config.dims);
    const Eigen::VectorXd scales = config.scales ? *config.scales : default_scales(reference);
    const std::vector<Money> pool = imbalance_pool(quiet.log);

    r.divergences.assign(static_cast<std::size_t>(config.replays), 0.0);
    parallel_for(config.replays, config.jobs, [&](int m) {
        const auto shocks = draw_shocks(spec, pool, config, candidate.id, m);
        const Simulation shocked =
            simulate(spec, config.horizon_terms, config.initial, candidate.schedule, shocks, true);
        const Trajectory tr = extract_trajectory(shocked.record, config.dims);
        // A run that blew past the representable range is compared on the terms it completed.
        const Eigen::Index n = std::min(reference.terms(), tr.terms());
        r.divergences[static_cast<std::size_t>(m)] =
            metric(reference.points.topRows(n), tr.points.topRows(n), scales);
    });
    double sum = 0.0;
    for (double d : r.divergences) sum += d;
    r.mean_divergence = sum / static_cast<double>(r.divergences.size());
    r.score = 1.0 / (1.0 + r.mean_divergence);
    return r;
}

int select_most_robust(const std::vector<double>& scores) {
    if (scores.empty()) throw ValidationError("no candidates to select from");
    int best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

int select_most_robust(const RobustnessReport& report) {
    if (report.candidates.empty()) throw ValidationError("no candidates to select from");
    std::vector<double> scores;
    for (const auto& c : report.candidates) scores.push_back(c.robustness.score);
    return report.candidates[static_cast<std::size_t>(select_most_robust(scores))].id;
}

RobustnessReport score_candidates(const std::vector<Candidate>& candidates, const ScenarioSpec& spec,
                                  const RobustnessConfig& config) {
    RobustnessReport report;
    report.candidates.resize(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        report.candidates[i].id = candidates[i].id;
        report.candidates[i].schedule = candidates[i].schedule;
        report.candidates[i].robustness = robustness_score(candidates[i], spec, config);
    }
    report.selected = select_most_robust(report);
    return report;
}

RobustnessReport anticipate(const ScenarioSpec& spec, const AnticipationConfig& config,
                            std::vector<Candidate>* candidates_out) {
    SamplerConfig sampler = config.sampler;
    sampler.horizon_terms = config.robustness.horizon_terms;
    sampler.dims = config.robustness.dims;
    sampler.initial = config.robustness.initial;
    std::vector<Candidate> candidates = generate_candidates(spec, config.candidates, sampler);

    RobustnessConfig rc = config.robustness;
    if (!rc.scales) rc.scales = default_scales(candidates.front().trajectory);

    RobustnessReport report;
    report.candidates.resize(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Candidate& c = candidates[i];
        CandidateReport& out = report.candidates[i];
        out.id = c.id;
        out.schedule = c.schedule;
        RobustnessConfig own = rc;
        if (config.fit_candidates) {
            // Retrieve the movement behind this candidate's record before scoring it.
            ScenarioSpec cand_spec = spec;
            cand_spec.policy.append(c.schedule);
            const Record target = simulate(spec, rc.horizon_terms, rc.initial, c.schedule, {}, true).record;
            FitConfig fc = config.fit;
            fc.seed = config.fit.seed ^ fnv1a64(std::to_string(c.id), fnv1a64("fit-candidate/"));
            fc.gains = rc.initial.gains;
            const FitResult fr = fit(target, cand_spec, fc);
            out.fit_error = fr.error;
            own.initial = fr.best;
        }
        out.robustness = robustness_score(c, spec, own);
    }
    report.selected = select_most_robust(report);
    if (candidates_out) *candidates_out = std::move(candidates);
    return report;
}

}  // namespace mfe
