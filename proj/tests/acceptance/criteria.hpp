#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace fovrec::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

std::vector<Criterion>& registry();

struct Registrar {
  Registrar(int id, std::string title, std::function<Outcome()> run) {
    registry().push_back({id, std::move(title), std::move(run)});
  }
};

// printf-free detail builder.
template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream s;
  s.precision(6);
  (s << ... << args);
  return s.str();
}

}  // namespace fovrec::acceptance
