// Deterministic stand-in for the GPU model runners.
// usage: synmix_stub_adapter <role> <request.json> <output_dir>

#include <iostream>

#include "synmix/stub.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: synmix_stub_adapter <segmenter|generator|annotator|detector> "
                 "<request.json> <output_dir>\n";
    return 2;
  }
  return synmix::stub::run(argv[1], argv[2], argv[3]);
}
