#include "qxfer/cli.hpp"

int main(int argc, char** argv) {
    return qxfer::run_cli(argc, argv);
}
