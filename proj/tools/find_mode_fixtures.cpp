// Searches the gain/saturation grid of the third-order servo loop for one
// configuration per closed-loop mode and writes them as JSON.
#include <fstream>
#include <iostream>

#include "motorfit/mode_fixtures.hpp"

int main(int argc, char** argv) {
    using namespace motorfit;
    const auto set = search_mode_fixtures(third_order_servo_plant(), ModeGrid{});
    const std::string text = to_json(set).dump(2) + "\n";
    for (const auto& f : set.fixtures)
        std::cerr << to_string(f.expected) << ": kp=" << f.kp << " kv=" << f.kv << " sat=" << f.sat << "\n";
    if (set.fixtures.size() != std::size(kAllModes)) std::cerr << "warning: not every mode was found\n";
    if (argc > 1) {
        std::ofstream(argv[1]) << text;
    } else {
        std::cout << text;
    }
    return set.fixtures.size() == std::size(kAllModes) ? 0 : 1;
}
