#include "conserva/commands.hpp"

int main(int argc, char** argv) { return conserva::run_cli(argc, argv); }
