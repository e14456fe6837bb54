#include "knock/cli.hpp"

int main(int argc, char** argv) { return knock::run_cli(argc, argv); }
