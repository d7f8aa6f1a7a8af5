#include "grand/harness.hpp"

int main(int argc, char** argv) { return grand::cli_main(argc, argv); }
