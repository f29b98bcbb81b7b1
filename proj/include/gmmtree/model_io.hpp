#pragma once

#include "gmmtree/engine.hpp"
#include "gmmtree/gmm.hpp"

#include <string>

namespace gmmtree {

/// JSON document {d, L, weights, means, covariances, config, trace}.
/// Covariances are stored as row-major lower triangles. Reals are printed
/// with 17 significant digits, so save → load reproduces every bit. Timings
/// are left out of the trace, so equal runs give byte-identical documents.
std::string model_to_json(const MixtureModel& model, const TrainTrace* trace = nullptr);
void save_model(const std::string& path, const MixtureModel& model, const TrainTrace* trace = nullptr);

/// Throws FormatError on malformed documents.
MixtureModel model_from_json(const std::string& text);
MixtureModel load_model(const std::string& path);

/// 17 significant digits, enough to read back the same double.
std::string format_real(double v);

}  // namespace gmmtree
