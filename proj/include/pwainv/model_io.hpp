#pragma once

#include <json.hpp>
#include <memory>
#include <optional>
#include <string>

#include "pwainv/error.hpp"
#include "pwainv/printhead.hpp"

namespace pwainv {

using Json = nlohmann::json;

// Scalars, flat row-major arrays and nested row arrays are all accepted; rows/cols < 0
// take the shape from the document.
Mat mat_from_json(const Json& j, long rows = -1, long cols = -1);
Vec vec_from_json(const Json& j, long size = -1);
Json mat_to_json(const Mat& m);
Json vec_to_json(const Vec& v);

ZpkModel zpk_from_json(const Json& j);
Json zpk_to_json(const ZpkModel& zpk);
FeedbackParams feedback_from_json(const Json& j, FeedbackParams base = {});
Json feedback_to_json(const FeedbackParams& p);
ReferenceProfile reference_profile_from_json(const Json& j, ReferenceProfile base = {});
Json reference_profile_to_json(const ReferenceProfile& p);

// `base_dir` resolves relative CSV paths inside the document.
PwaModel model_from_json(const Json& j, const std::string& base_dir = "");
// Schedules without a stored description are written as tabulated (finite horizon) or
// constant (no horizon) data.
Json model_to_json(const PwaModel& model);

struct LoadedModel {
  std::shared_ptr<const PwaModel> model;
  std::optional<int> inverse_mu;  // set for documents with role "inverse"
};

LoadedModel load_model_file(const std::string& path);
Json inverse_to_json(const InversePwaModel& inv);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

BenchConfig bench_config_from_json(const Json& j, BenchConfig base = default_bench_config());
Json bench_config_to_json(const BenchConfig& cfg);

Json to_json(const RelativeDegreeReport& r);
Json to_json(const AssumptionReport& r);
Json to_json(const Decoupling& d);
Json to_json(const StableInversionReport& r);
Json to_json(const Error& e);

}  // namespace pwainv
