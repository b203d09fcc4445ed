#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>

#include "keydetect/classifiers.hpp"
#include "keydetect/detectors.hpp"
#include "keydetect/forest.hpp"
#include "keydetect/linear_svm.hpp"
#include "keydetect/ocsvm.hpp"

namespace keydetect {

using AnyModel = std::variant<StatDetectorModel, OcSvmModel, NnClassifier, ForestModel, LinearSvmModel>;

// "stat-detector", "ocsvm", "nn", "forest" or "linear-svm".
std::string model_kind(const AnyModel& model);

// Versioned text layout: a "KEYDETECT-MODEL 1" line, a "kind" line, the
// kind-specific records, then "end". Numbers use shortest round-trip form,
// so read(write(m)) reproduces every float field exactly. Field order is
// documented in docs/formats.md.
void write_model(std::ostream& out, const AnyModel& model);
AnyModel read_model(std::istream& in);  // FormatError on any defect

void save_model(const std::filesystem::path& path, const AnyModel& model);
AnyModel load_model(const std::filesystem::path& path);

}  // namespace keydetect
