#include "hloc/cli_app.hpp"

int main(int argc, char** argv) { return hloc::run_cli(argc, argv); }
