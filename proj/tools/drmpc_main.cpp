#include <drmpc/cli.hpp>

int main(int argc, char** argv) { return drmpc::cli::cli_run(argc, argv); }
