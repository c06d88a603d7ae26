#include "deepbose/cli.hpp"

int main(int argc, char** argv) { return deepbose::run_cli(argc, argv); }
