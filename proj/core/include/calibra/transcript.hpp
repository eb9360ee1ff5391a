#pragma once

#include <string>
#include <vector>

namespace calibra {

// One observed online round: the sampled grid prediction and realized label
// for the context the adversary presented.
struct OnlineRound {
  int t = 0;        // 1-based round index
  int context = 0;  // index into Transcript::context_ids
  double p = 0.0;   // prediction, a grid value
  double y = 0.0;   // realized label
};

struct Transcript {
  int m = 0;
  std::vector<double> grid;
  std::vector<std::string> context_ids;
  std::vector<OnlineRound> rounds;
};

}  // namespace calibra
