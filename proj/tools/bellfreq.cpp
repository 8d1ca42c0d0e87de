#include "cli_app.hpp"

int main(int argc, char** argv) { return bellfreq::cli::run(argc, argv); }
