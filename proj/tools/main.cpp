#include "twopass/cli.hpp"

int main(int argc, char** argv) { return twopass::dispatch(argc, argv); }
