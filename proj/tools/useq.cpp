#include "useq/cli.hpp"

int main(int argc, char** argv) { return useq::run(argc, argv); }
