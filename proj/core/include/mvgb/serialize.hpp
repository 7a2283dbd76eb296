#pragma once

#include <string>

#include "mvgb/boosting.hpp"
#include "mvgb/dataset.hpp"
#include "mvgb/simlab.hpp"
#include "mvgb/tree.hpp"

namespace mvgb {

// JSON interchange for fitted models and the small auxiliary records.
// Every file embeds kFormatVersion (types.hpp); readers reject other
// versions with a DataError. Numbers are written with shortest round-trip
// precision, so a value survives save/load bitwise and identical models
// produce identical files.

std::string tree_to_json(const Tree& t);
Tree tree_from_json(const std::string& text);

std::string scaling_to_json(const ScalingParams& p);
ScalingParams scaling_from_json(const std::string& text);

std::string foldplan_to_json(const FoldPlan& f);
FoldPlan foldplan_from_json(const std::string& text);

// Scenario files may omit keys (defaults apply) and may omit format_version;
// a present but different version is rejected.
std::string config_to_json(const ScenarioConfig& cfg);
ScenarioConfig config_from_json(const std::string& text);

// The model file carries everything the interpretation tools need: params,
// column names, initial means and covariance, final covariance, training
// curve, every step record with its tree and full raw-discrepancy matrix,
// and the column scaling applied before fitting (empty when the model was
// fit on raw data). Fitting-time residual state is not stored.
struct LoadedModel {
  MvModel model;
  ScalingParams scaling;
};

std::string model_to_json(const MvModel& m, const ScalingParams& scaling);
LoadedModel model_from_json(const std::string& text);

void save_model(const std::string& path, const MvModel& m,
                const ScalingParams& scaling);
LoadedModel load_model(const std::string& path);

std::string read_text_file(const std::string& path);   // DataError if unreadable
void write_text_file(const std::string& path, const std::string& text);

}  // namespace mvgb
