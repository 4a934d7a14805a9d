#include "badger/cli.hpp"

int main(int argc, char** argv) { return badger::cli::dispatch(argc, argv); }
