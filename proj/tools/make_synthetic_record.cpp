// Writes the raw synthetic bench record (one CSV per channel) and its ground
// truth into the given directory.
#include <filesystem>
#include <fstream>
#include <iostream>

#include "motorfit/synthetic_record.hpp"

int main(int argc, char** argv) {
    using namespace motorfit;
    if (argc != 2) {
        std::cerr << "usage: make_synthetic_record <output-dir>\n";
        return 2;
    }
    const std::filesystem::path dir(argv[1]);
    std::filesystem::create_directories(dir);
    const auto recipe = default_synthetic_recipe();
    const auto files = generate_synthetic_record(recipe);
    for (std::size_t c = 0; c < files.size(); ++c) {
        std::ofstream out(dir / (std::string(kSyntheticChannels[c]) + ".csv"), std::ios::binary);
        write_trace_csv(out, files[c]);
    }
    std::ofstream(dir / "truth.json") << recipe_json(recipe).dump(2) << "\n";
    return 0;
}
