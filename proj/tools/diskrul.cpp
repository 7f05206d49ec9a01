#include <string>
#include <vector>

#include "diskrul/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return diskrul::run_cli(args);
}
