#include <string>
#include <vector>

#include "semattn/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return semattn::cli::run(args);
}
