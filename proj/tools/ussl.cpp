#include "ussl/cli/commands.hpp"

int main(int argc, char** argv) { return ussl::cli::main(argc, argv); }
