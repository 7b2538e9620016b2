// Writes the small demo network and dataset shipped in data/.
//   make-demo <out-dir>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

#include "relu_regions/network.hpp"

namespace rr = relu_regions;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make-demo <out-dir>\n";
    return 2;
  }
  const std::filesystem::path dir(argv[1]);
  std::filesystem::create_directories(dir);

  const int d = 4;
  const rr::Network net = rr::random_gaussian_network(d, {8}, 3, 2125);
  std::ofstream(dir / "demo_net.json") << rr::serialize_network(net) << "\n";

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::ofstream points(dir / "demo_points.csv");
  points << "# label,x1,...,x4; labels are the network's own predictions\n";
  points << std::setprecision(17);
  for (int i = 0; i < 10; ++i) {
    rr::Vector x(d);
    for (int j = 0; j < d; ++j) x(j) = unit(rng);
    points << rr::classify(net, x);
    for (int j = 0; j < d; ++j) points << "," << x(j);
    points << "\n";
  }
  std::cout << "wrote " << (dir / "demo_net.json").string() << " and "
            << (dir / "demo_points.csv").string() << "\n";
  return 0;
}
