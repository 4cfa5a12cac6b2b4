#include "trojanrec/harness.hpp"

int main(int argc, char** argv) { return trojanrec::harness::cli(argc, argv); }
