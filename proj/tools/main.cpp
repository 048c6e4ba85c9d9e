#include "commands.hpp"

int main(int argc, char** argv) {
    return rollalign::cli::run(argc, argv);
}
