#include "cdn/cli/app.hpp"

int main(int argc, char** argv) { return cdn::cli::run(argc, argv); }
