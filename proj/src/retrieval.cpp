#include "mfe/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "mfe/error.hpp"
#include "mfe/metrics.hpp"
#include "mfe/philox.hpp"

namespace mfe {

namespace {

bool is_exempt(Role r) { return r == Role::CentralBank; }

/// Channels an agent's offset is spread over: adjustable outgoing ones, or
/// every outgoing one if none is adjustable.
template <typename ChannelList, typename IsOutgoing>
std::vector<std::size_t> offset_channels(const ChannelList& channels, IsOutgoing outgoing) {
    std::vector<std::size_t> adj, all;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (!outgoing(channels[i])) continue;
        all.push_back(i);
        if (channels[i].adjustable) adj.push_back(i);
    }
    return adj.empty() ? all : adj;
}

/// Largest-remainder split of `amount` in proportion to `weights` (equal if
/// they are all zero); ties go to the lower index.
std::vector<std::int64_t> split(std::int64_t amount, const std::vector<std::int64_t>& weights) {
    const std::int64_t magnitude = amount < 0 ? -amount : amount;
    const std::int64_t sign = amount < 0 ? -1 : 1;
    std::vector<std::int64_t> alloc(weights.size(), 0);
    if (weights.empty() || magnitude == 0) return alloc;
    std::int64_t total = 0;
    for (auto w : weights) total += w;
    std::vector<Rational> rem(weights.size());
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const Rational quota = total == 0 ? Rational(magnitude, static_cast<std::int64_t>(weights.size()))
                                          : Rational(magnitude) * Rational(weights[i], total);
        alloc[i] = quota.floor();
        rem[i] = quota - Rational(alloc[i]);
        assigned += alloc[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::int64_t k = 0; k < magnitude - assigned; ++k) ++alloc[order[static_cast<std::size_t>(k)]];
    for (auto& a : alloc) a *= sign;
    return alloc;
}

}  // namespace

std::vector<std::string> assignment_agents(const ScenarioSpec& spec) {
    std::vector<std::string> ids;
    for (const auto& a : spec.agents)
        if (!is_exempt(a.role)) ids.push_back(a.id);
    return ids;
}

Money minimum_offset(const ScenarioSpec& spec, const std::string& agent) {
    const auto chans = offset_channels(spec.channels, [&](const ChannelSpec& c) { return c.source == agent; });
    Money w{0};
    for (auto i : chans) w += spec.channels[i].rate;
    return -w;
}

void apply_assignment(NetworkState& state, const InconsistencyAssignment& assignment) {
    for (const auto& [id, gain] : assignment.gains) {
        Agent& a = state.agents[state.agent_index(id)];
        if (a.continuity_exempt) throw ValidationError("gain override for exempt agent '" + id + "'");
        if (gain < Rational(0)) throw ValidationError("negative gain override for '" + id + "'");
        a.gain = gain;
    }
    for (const auto& [id, offset] : assignment.offsets) {
        const std::size_t ai = state.agent_index(id);
        if (state.agents[ai].continuity_exempt) throw ValidationError("offset for exempt agent '" + id + "'");
        if (offset == Money(0)) continue;
        const auto chans = offset_channels(state.channels, [&](const Channel& c) { return c.source == ai; });
        if (chans.empty()) throw ValidationError("agent '" + id + "' has no outgoing channel to carry an offset");
        std::vector<std::int64_t> weights;
        for (auto ci : chans) weights.push_back(state.channels[ci].rate.units());
        const auto deltas = split(offset.units(), weights);
        for (std::size_t k = 0; k < chans.size(); ++k) {
            Channel& c = state.channels[chans[k]];
            const Money r = c.rate + Money(deltas[k]);
            if (r < Money(0)) throw ValidationError("offset for '" + id + "' drives channel '" + c.id + "' negative");
            c.rate = r;
            c.last_settled_rate_at_source = c.effective_rate();
        }
    }
}

Simulation simulate(const ScenarioSpec& spec, std::int64_t n_terms, const InconsistencyAssignment& assignment,
                    const PolicySchedule& extra_policy, const std::vector<ShockSpec>& extra_shocks, bool keep_partial) {
    if (n_terms < 0) throw ValidationError("term count must be non-negative");
    Simulation sim{build_network(spec), {}, {}};
    if (!extra_policy.empty() || !extra_shocks.empty()) add_schedule(sim.state, extra_policy, extra_shocks);
    apply_assignment(sim.state, assignment);
    try {
        run(sim.state, SimTime::from_ticks(n_terms * sim.state.term_length.ticks()), sim.log);
    } catch (const OverflowError&) {
        if (!keep_partial) throw;
        sim.overflowed = true;
    }
    sim.record = compile_record(sim.log, sim.state);
    return sim;
}

Record retrace(const InconsistencyAssignment& assignment, const ScenarioSpec& spec, std::int64_t n_terms) {
    return simulate(spec, n_terms, assignment).record;
}

FigureMatrix figure_matrix(const Record& record) {
    FigureMatrix m;
    if (!record.sheets.empty()) {
        const BalanceSheet& first = record.sheets.front();
        for (const auto& a : first.agents)
            for (const char* f : {"opening_stock", "closing_stock", "inflow_total", "outflow_total"})
                m.names.push_back(a.id + "." + f);
        for (const char* f : {"notes_outstanding", "government_securities_outstanding", "discount_rate",
                              "securities_interest_rate"})
            m.names.push_back(f);
        for (const auto& f : first.figures) m.names.push_back("figure:" + f.name);
    }
    m.values.resize(static_cast<Eigen::Index>(record.sheets.size()), static_cast<Eigen::Index>(m.names.size()));
    for (std::size_t t = 0; t < record.sheets.size(); ++t) {
        const BalanceSheet& s = record.sheets[t];
        const std::size_t expected = s.agents.size() * 4 + 4 + s.figures.size();
        if (expected != m.names.size()) throw ValidationError("record sheets differ in shape");
        Eigen::Index col = 0;
        auto row = m.values.row(static_cast<Eigen::Index>(t));
        for (const auto& a : s.agents) {
            row(col++) = static_cast<double>(a.opening_stock.units());
            row(col++) = static_cast<double>(a.closing_stock.units());
            row(col++) = static_cast<double>(a.inflow_total.units());
            row(col++) = static_cast<double>(a.outflow_total.units());
        }
        row(col++) = static_cast<double>(s.aggregates.notes_outstanding.units());
        row(col++) = static_cast<double>(s.aggregates.government_securities_outstanding.units());
        row(col++) = s.aggregates.discount_rate.to_double();
        row(col++) = s.aggregates.securities_interest_rate.to_double();
        for (const auto& f : s.figures) row(col++) = f.value.to_double();
    }
    return m;
}

double reproduction_error(const Record& simulated, const Record& target, const FigureWeights& weights,
                          std::optional<std::int64_t> prefix_terms) {
    std::size_t terms = target.terms();
    if (prefix_terms) {
        if (*prefix_terms < 0) throw ValidationError("prefix must be non-negative");
        terms = static_cast<std::size_t>(*prefix_terms);
        if (simulated.terms() < terms || target.terms() < terms)
            throw ValidationError("records are shorter than the prefix");
    } else if (simulated.terms() != target.terms()) {
        throw ValidationError("records differ in term count");
    }
    const FigureMatrix sim = figure_matrix(simulated);
    const FigureMatrix tgt = figure_matrix(target);
    if (terms == 0) return 0.0;
    if (sim.names != tgt.names) throw ValidationError("records differ in agents or figures");
    Eigen::VectorXd w(static_cast<Eigen::Index>(tgt.names.size()));
    for (std::size_t i = 0; i < tgt.names.size(); ++i) {
        auto it = weights.find(tgt.names[i]);
        w(static_cast<Eigen::Index>(i)) = it == weights.end() ? 1.0 : it->second;
    }
    const auto n = static_cast<Eigen::Index>(terms);
    return normalized_rms(sim.values.topRows(n), tgt.values.topRows(n), w);
}

namespace {

struct StartOutcome {
    std::vector<std::int64_t> best;
    double error = std::numeric_limits<double>::infinity();
    std::int64_t evaluations = 0;
    std::vector<std::pair<std::int64_t, double>> improvements;  ///< local evaluation index, error
    bool reached = false;
};

class Objective {
public:
    Objective(const Record& target, const ScenarioSpec& spec, const FitConfig& config)
        : target_(target), spec_(spec), config_(config), agents_(assignment_agents(spec)) {
        for (const auto& id : agents_) {
            lower_.push_back(minimum_offset(spec, id).units());
            const bool has_out =
                std::any_of(spec.channels.begin(), spec.channels.end(), [&](const auto& c) { return c.source == id; });
            free_.push_back(has_out);
        }
        terms_ = config.prefix_terms ? std::min<std::int64_t>(*config.prefix_terms,
                                                              static_cast<std::int64_t>(target.terms()))
                                     : static_cast<std::int64_t>(target.terms());
    }

    std::size_t dims() const { return agents_.size(); }
    bool free(std::size_t i) const { return free_[i]; }
    std::int64_t lower(std::size_t i) const { return lower_[i]; }
    bool valid(const std::vector<std::int64_t>& x) const {
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] < lower_[i] || (!free_[i] && x[i] != 0)) return false;
        return true;
    }

    InconsistencyAssignment assignment(const std::vector<std::int64_t>& x) const {
        InconsistencyAssignment a;
        a.gains = config_.gains;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] != 0) a.offsets[agents_[i]] = Money(x[i]);
        return a;
    }

    double operator()(const std::vector<std::int64_t>& x) const {
        try {
            const Record sim = retrace(assignment(x), spec_, terms_);
            return reproduction_error(sim, target_, config_.weights, terms_);
        } catch (const OverflowError&) {
            return std::numeric_limits<double>::infinity();
        }
    }

private:
    const Record& target_;
    const ScenarioSpec& spec_;
    const FitConfig& config_;
    std::vector<std::string> agents_;
    std::vector<std::int64_t> lower_;
    std::vector<bool> free_;
    std::int64_t terms_ = 0;
};

std::vector<std::int64_t> start_point(const Objective& f, const FitConfig& config, int start) {
    std::vector<std::int64_t> x(f.dims(), 0);
    if (start == 0 && config.zero_first_start) return x;
    CounterRng rng(config.seed, fnv1a64(std::to_string(start), fnv1a64("fit/start/")));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!f.free(i)) continue;
        const std::int64_t lo = std::max(-config.search_radius, f.lower(i));
        const std::int64_t hi = std::max(lo, config.search_radius);
        x[i] = rng.uniform_int(lo, hi);
    }
    return x;
}

StartOutcome pattern_search(const Objective& f, const FitConfig& config, int start, std::int64_t budget) {
    StartOutcome out;
    if (budget <= 0) return out;
    std::vector<std::int64_t> x = start_point(f, config, start);
    out.best = x;
    out.error = f(x);
    out.evaluations = 1;
    out.improvements.emplace_back(1, out.error);
    std::vector<std::int64_t> steps(f.dims(), std::max<std::int64_t>(1, config.initial_step));
    for (std::size_t i = 0; i < steps.size(); ++i)
        if (!f.free(i)) steps[i] = 0;

    auto done = [&] {
        return out.error <= config.tolerance || out.evaluations >= budget ||
               std::all_of(steps.begin(), steps.end(), [](std::int64_t s) { return s < 1; });
    };
    while (!done()) {
        for (std::size_t i = 0; i < steps.size() && !done(); ++i) {
            if (steps[i] < 1) continue;
            bool improved = false;
            for (int dir : {+1, -1}) {
                if (out.evaluations >= budget) break;
                std::vector<std::int64_t> y = x;
                y[i] += dir * steps[i];
                if (!f.valid(y)) continue;
                const double e = f(y);
                ++out.evaluations;
                if (e < out.error) {
                    x = std::move(y);
                    out.error = e;
                    out.improvements.emplace_back(out.evaluations, e);
                    improved = true;
                    break;
                }
            }
            if (improved)
                steps[i] = std::min<std::int64_t>(steps[i] * 2, std::int64_t{1} << 40);
            else
                steps[i] /= 2;
        }
    }
    out.best = x;
    out.reached = out.error <= config.tolerance;
    return out;
}

}  // namespace

FitResult fit(const Record& target, const ScenarioSpec& spec, const FitConfig& config) {
    if (config.budget <= 0) throw ValidationError("fit budget must be positive");
    if (config.starts <= 0) throw ValidationError("fit needs at least one start");
    const Objective f(target, spec, config);

    const int starts = static_cast<int>(std::min<std::int64_t>(config.starts, config.budget));
    std::vector<std::int64_t> share(static_cast<std::size_t>(starts), config.budget / starts);
    share[0] += config.budget % starts;

    std::vector<StartOutcome> outcomes(static_cast<std::size_t>(starts));
    const int jobs = std::max(1, config.jobs);
    if (jobs == 1) {
        for (int s = 0; s < starts; ++s) {
            outcomes[static_cast<std::size_t>(s)] = pattern_search(f, config, s, share[static_cast<std::size_t>(s)]);
            if (outcomes[static_cast<std::size_t>(s)].reached) break;
        }
    } else {
        // Starts are claimed in index order; once one converges no later start is begun.
        std::atomic<int> next{0};
        std::atomic<int> first_reached{starts};
        auto worker = [&] {
            for (int s = next++; s < starts; s = next++) {
                if (s > first_reached.load()) break;
                auto& o = outcomes[static_cast<std::size_t>(s)];
                o = pattern_search(f, config, s, share[static_cast<std::size_t>(s)]);
                if (o.reached) {
                    int cur = first_reached.load();
                    while (s < cur && !first_reached.compare_exchange_weak(cur, s)) {
                    }
                }
            }
        };
        std::vector<std::thread> pool;
        for (int j = 0; j < std::min(jobs, starts); ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Merge in start order, exactly as a sequential run would have seen it.
    FitResult result;
    result.error = std::numeric_limits<double>::infinity();
    std::vector<std::int64_t> best;
    std::int64_t offset = 0;
    for (int s = 0; s < starts; ++s) {
        const StartOutcome& o = outcomes[static_cast<std::size_t>(s)];
        for (const auto& [k, e] : o.improvements) {
            if (e < result.error) {
                result.error = e;
                result.trace.emplace_back(offset + k, e);
                best = o.best;  // the start's final point is at least this good
            }
        }
        offset += o.evaluations;
        if (o.reached) break;
    }
    result.evaluations = offset;
    result.best = f.assignment(best.empty() ? std::vector<std::int64_t>(f.dims(), 0) : best);
    result.converged = result.error <= config.tolerance;
    return result;
}

}  // namespace mfe
