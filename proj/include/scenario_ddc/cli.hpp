#pragma once

#include <iosfwd>

namespace scenario_ddc {

/// Entry point of the scenario-ddc tool. Exit codes: 0 success, 1 invalid
/// input or usage, 2 solver failure, 3 infeasible synthesis.
int cli_main(int argc, char** argv);

/// Same, with explicit streams (used by the tests).
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace scenario_ddc
