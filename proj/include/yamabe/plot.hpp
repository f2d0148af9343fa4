#pragma once

// Minimal static line plots written as SVG.

#include <iosfwd>
#include <string>
#include <vector>

namespace yamabe {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

class Plot {
 public:
  Plot(std::string title, std::string xlabel, std::string ylabel);

  void add(Series s) { series_.push_back(std::move(s)); }
  void write_svg(std::ostream& out) const;

 private:
  std::string title_;
  std::string xlabel_;
  std::string ylabel_;
  std::vector<Series> series_;
};

}  // namespace yamabe
