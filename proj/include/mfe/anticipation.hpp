#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfe/record.hpp"
#include "mfe/retrieval.hpp"
#include "mfe/scenario.hpp"

namespace mfe {

using PhaseVector = Eigen::VectorXd;

/// A path through phase space: one row per term, one column per dimension.
struct Trajectory {
    std::vector<std::string> dims;
    Eigen::MatrixXd points;

    Eigen::Index terms() const { return points.rows(); }
    PhaseVector at(Eigen::Index term) const { return points.row(term).transpose(); }
};

/// notes_outstanding, discount_rate, government_securities_outstanding,
/// securities_interest_rate.
std::vector<std::string> default_dims();

/// Dimensions are aggregate names or the record's own figure names. Throws
/// ValidationError on an unknown name.
Trajectory extract_trajectory(const Record& record, const std::vector<std::string>& dims);

struct Candidate {
    int id = 0;
    PolicySchedule schedule;
    Trajectory trajectory;
};

struct SamplerConfig {
    std::uint64_t seed = 0;
    std::int64_t horizon_terms = 12;
    std::vector<std::string> dims = default_dims();
    /// Channels whose multiplier is perturbed; empty means every channel tagged
    /// tax, discount or interest.
    std::vector<std::string> instruments;
    double relative_bound = 0.2;  ///< multiplier drawn from base * [1 - b, 1 + b]
    int changes = 1;              ///< settings per instrument, at term starts from term 1 on
    InconsistencyAssignment initial;
};

/// Candidate 0 is the unmodified continuation; the others carry seeded random
/// multiplier schedules. Nothing fires before the end of term 0, so all
/// candidates share their first phase point.
std::vector<Candidate> generate_candidates(const ScenarioSpec& spec, int n, const SamplerConfig& config);

/// Runs the scenario with `schedule` added and wraps the result as a candidate.
Candidate make_candidate(const ScenarioSpec& spec, int id, const PolicySchedule& schedule, std::int64_t horizon_terms,
                         const std::vector<std::string>& dims, const InconsistencyAssignment& initial = {});

/// Trajectory distance metrics, all over per-coordinate scaled Euclidean
/// distances between rows.
using DivergenceMetric = std::function<double(const Eigen::MatrixXd&, const Eigen::MatrixXd&, const Eigen::VectorXd&)>;

/// "max" (default), "mean" or "final". Throws ValidationError otherwise.
DivergenceMetric divergence_metric(const std::string& name);

/// Max-over-terms scaled distance.
double divergence(const Trajectory& base, const Trajectory& perturbed, const Eigen::VectorXd& scales);
double divergence(const Trajectory& base, const Trajectory& perturbed);  ///< default scales from `base`

Eigen::VectorXd default_scales(const Trajectory& base);

struct RobustnessConfig {
    int replays = 32;
    int shocks_per_replay = 4;
    double shock_scale = 1.0;
    std::uint64_t seed = 0;
    std::int64_t horizon_terms = 12;
    std::vector<std::string> dims = default_dims();
    std::string metric = "max";
    /// Coordinate scales; defaults to the range of the candidate's own unshocked trajectory.
    std::optional<Eigen::VectorXd> scales;
    InconsistencyAssignment initial;
    int jobs = 1;
};

struct Robustness {
    double score = 1.0;
    double mean_divergence = 0.0;
    std::vector<double> divergences;
};

/// Replays the candidate M times under seeded shocks whose sizes are resampled
/// from the magnitudes of its own unshocked run's per-event imbalances.
Robustness robustness_score(const Candidate& candidate, const ScenarioSpec& spec, const RobustnessConfig& config);

struct CandidateReport {
    int id = 0;
    PolicySchedule schedule;
    Robustness robustness;
    std::optional<double> fit_error;  ///< set when candidates were retrieved before scoring
};

struct RobustnessReport {
    std::vector<CandidateReport> candidates;
    int selected = 0;
};

/// Argmax score, lowest index on ties. Throws ValidationError if empty.
int select_most_robust(const RobustnessReport& report);
int select_most_robust(const std::vector<double>& scores);

struct AnticipationConfig {
    int candidates = 5;
    SamplerConfig sampler;
    RobustnessConfig robustness;
    bool fit_candidates = false;
    FitConfig fit;
};

/// generate, optionally retrieve each candidate, score, select. Scales default
/// to the range of candidate 0's trajectory so all candidates are measured alike.
RobustnessReport anticipate(const ScenarioSpec& spec, const AnticipationConfig& config,
                            std::vector<Candidate>* candidates_out = nullptr);

/// Scores an already built candidate set (ids must be 0..n-1 in order).
RobustnessReport score_candidates(const std::vector<Candidate>& candidates, const ScenarioSpec& spec,
                                  const RobustnessConfig& config);

}  // namespace mfe
