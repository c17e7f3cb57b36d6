#include "odgt/cli.hpp"

int main(int argc, char** argv) { return odgt::cli_main(argc, argv); }
