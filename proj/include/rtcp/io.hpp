#pragma once

// File formats: headerless response-time CSVs, JSON result bundles, and
// aligned-text result tables.

#include "rtcp/estimation.hpp"
#include "rtcp/posterior.hpp"
#include "rtcp/selection.hpp"
#include "rtcp/simulation.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rtcp::io {

using nlohmann::json;

// Rows are respondents, columns items. Blank lines are skipped. With
// raw_seconds the natural log is applied at ingest and entries must be
// positive. Throws ErrorKind::parse with row/column on malformed cells and
// ErrorKind::data on non-finite values.
RtMatrix parse_rt_csv(std::istream& in, bool raw_seconds = false);
RtMatrix read_rt_csv(const std::filesystem::path& path, bool raw_seconds = false);

// %.17g, so values round-trip exactly.
std::string format_double(double value);
void write_matrix_csv(const std::filesystem::path& path, const RowMatrix& values);

void write_text(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);

struct Provenance {
  std::string tool = "rtcp";
  std::string version;
  std::string command;
  std::string config_hash;  // FNV-1a 64 of the canonical config JSON
  std::uint64_t seed = 0;
  std::string timestamp;    // UTC, ISO 8601; SOURCE_DATE_EPOCH when set
  json config;
};

std::string version();
Provenance make_provenance(const std::string& command, const json& config, std::uint64_t seed);
json to_json(const Provenance& p);
// "# key: value" lines heading every text output.
std::string provenance_header(const Provenance& p);

// ---- fit bundle -----------------------------------------------------------

struct FitReport {
  explicit FitReport(FitResult result) : fit(std::move(result)) {}

  FitResult fit;
  WaldTestResult wald;
  std::optional<LrtResult> lrt_psi1;
  std::optional<LrtResult> lrt_psi3;
  ProbabilityInterval no_change;
  double ci_level = 0.95;
  std::vector<PosteriorRow> posterior;
  double threshold = 0.5;
  double credible_alpha = 0.05;
};

std::string item_table(const FitReport& report);
std::string structural_table(const FitReport& report);
std::string posterior_summary_table(const FitReport& report);
std::string modal_distribution_table(const FitReport& report);
std::string prior_posterior_table(const FitReport& report);
// One row per respondent with a header; probabilities in support order.
std::string posterior_csv(const FitReport& report);
json fit_json(const FitReport& report, const Provenance& provenance);

// The slice of a saved fit bundle that plot data need.
struct SavedPosterior {
  int n_items = 0;
  int boundary = 0;
  std::vector<int> mode;
  std::vector<double> p_change;
};
SavedPosterior load_posterior(const json& bundle);

// ---- plot data ------------------------------------------------------------

// Mean log RT and mean seconds per item for unchanged and changed groups.
std::string figure1_csv(const RtMatrix& data, const SavedPosterior& post, double threshold);
// Mean RT by item offset j - tau_hat across classified changers, offset 0
// being the last baseline item. Changers whose mode is J have no location
// and are skipped. Header only when there are no changers.
std::string figure2_csv(const RtMatrix& data, const SavedPosterior& post, double threshold);

// ---- simulation -----------------------------------------------------------

json condition_json(const SimCondition& c);
SimCondition condition_from_json(const json& j);
json truth_json(const SimCondition& condition, const TrueParams& truth);
json recovery_json(const RecoveryReport& report);
// Long format: quantity,statistic,value rows, bias and RMSE per parameter,
// then the MAE of the modal and mean change-point.
std::string recovery_csv(const RecoveryReport& report);
// Condition rows with MAE(mode/mean) and bias/RMSE of psi1..psi3.
std::string structural_recovery_table(const std::vector<RecoveryReport>& reports);
// Items as rows, conditions as column pairs (bias, RMSE); "---" where the
// parameter does not exist for that condition. block: beta, alpha, gamma,
// sigma.
std::string item_recovery_table(const std::vector<RecoveryReport>& reports, const std::string& block);

// ---- selection ------------------------------------------------------------

std::string selection_table(const SelectionResult& result);
json selection_json(const SelectionResult& result, const Provenance& provenance);

}  // namespace rtcp::io
