#ifndef SHIFTBOUND_PLOT_H_
#define SHIFTBOUND_PLOT_H_

#include <filesystem>
#include <string>

#include "shiftbound/experiment.h"

namespace shiftbound {

// One panel per experiment. Each method is a glyph group: the mean interval
// as a bar plus lower and upper box glyphs over replicates. Naive and true
// values are horizontal lines; the truth line is drawn only when known.
// Output depends only on the bundle. Throws EmptyBundle.
std::string RenderPlot(const ResultBundle& bundle);
void EmitPlot(const ResultBundle& bundle, const std::filesystem::path& path);

}  // namespace shiftbound

#endif  // SHIFTBOUND_PLOT_H_
