#include "mrwave/cli.hpp"

int main(int argc, char** argv) { return mrwave::run(argc, argv); }
