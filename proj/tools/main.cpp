#include "rydjc/io/cli.hpp"

int main(int argc, char** argv) { return rydjc::io::cli_main(argc, argv); }
