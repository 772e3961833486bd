#include <string>
#include <vector>

#include "seng/train.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return seng::harness::run_training_cli(args);
}
