#include "stabreg/cli.hpp"

int main(int argc, char** argv) { return stabreg::run_cli(argc, argv); }
