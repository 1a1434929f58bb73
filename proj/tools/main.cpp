#include "scenario_ddc/cli.hpp"

int main(int argc, char** argv) { return scenario_ddc::cli_main(argc, argv); }
