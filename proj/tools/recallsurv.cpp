#include "recallsurv/cli.hpp"

int main(int argc, char** argv) { return recallsurv::run_cli(argc, argv); }
