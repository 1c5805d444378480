#include <string>
#include <vector>

#include "voteboost/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return voteboost::run_cli(args);
}
