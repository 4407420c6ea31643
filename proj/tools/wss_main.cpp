#include "wss/io/pipeline.hpp"

int main(int argc, char** argv) { return wss::run_cli(argc, argv); }
