#include "safmn/cli/app.hpp"

int main(int argc, char** argv) { return safmn::cli::main(argc, argv); }
