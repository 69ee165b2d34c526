// Writes a synthetic raw dataset in a published schema, for trying the
// pipeline without the original downloads.

#include "dgsp/adapters.hpp"
#include "dgsp/error.hpp"
#include "dgsp/surrogate.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic raw dataset with the published counts", "dgsp_surrogate"};
  std::string kind;
  std::string out;
  std::uint64_t seed = 0;
  app.add_option("--kind", kind, "WikiMath, Chickenpox, PedalMe, MontevideoBus or MetraLa")->required();
  app.add_option("--out", out, "Output JSON path")->required();
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto doc = dgsp::surrogate::raw_document(dgsp::parse_dataset_kind(kind), seed);
    std::ofstream file(out);
    if (!file) {
      std::cerr << "cannot write " << out << '\n';
      return 2;
    }
    file << doc.dump() << '\n';
  } catch (const dgsp::Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
