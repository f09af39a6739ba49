#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfe/anticipation.hpp"
#include "mfe/retrieval.hpp"

namespace mfe::cli {

/// Exit codes: 0 success, 1 domain failure, 2 usage or input error.
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

nlohmann::ordered_json to_json(const InconsistencyAssignment& a);
nlohmann::ordered_json to_json(const FitResult& r);
nlohmann::ordered_json to_json(const PolicySchedule& s);
nlohmann::ordered_json to_json(const RobustnessReport& r);

/// One row per term: term, then one column per dimension.
void write_trajectory_csv(const Trajectory& t, std::ostream& out);

/// A path that exists is used as is; otherwise `<dir>/<name>` and
/// `<dir>/<name>.json` are tried under $MFE_SCENARIO_DIR.
std::string resolve_scenario(const std::string& name);

}  // namespace mfe::cli
