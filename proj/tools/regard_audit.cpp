#include "regard_audit/cli.hpp"

int main(int argc, char** argv) { return regard_audit::cli::run(argc, argv); }
