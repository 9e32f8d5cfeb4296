#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gacg::harness {

class PlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Label a metrics file is grouped under: the run directory name, skipping a
// trailing "seed<N>" level so seeds of one run share a label.
std::string run_label(const std::string& csv_path);

// Renders capture_rate against step as an SVG 1.1 document: one mean
// polyline per run label and, where a label has several files, a min/max
// band across them. Nothing is written when any input is unusable.
void emit_plots(const std::vector<std::string>& csv_paths, const std::string& out_svg);

}  // namespace gacg::harness
