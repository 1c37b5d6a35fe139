#include "rtcp/io.hpp"

#include "rtcp/error.hpp"
#include "rtcp/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#ifndef RTCP_VERSION
#define RTCP_VERSION "0.0.0"
#endif

namespace rtcp::io {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Aligned plain-text table: leading label columns left-aligned, the rest
// right-aligned.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header, std::size_t label_columns = 1)
      : header_(std::move(header)), label_columns_(label_columns) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  void rule() { rows_.emplace_back(); }

  std::string render() const {
    std::vector<std::size_t> width(header_.size(), 0);
    auto measure = [&](const std::vector<std::string>& row) {
      for (std::size_t k = 0; k < row.size() && k < width.size(); ++k) width[k] = std::max(width[k], row[k].size());
    };
    measure(header_);
    for (const auto& row : rows_) measure(row);
    std::size_t total = 0;
    for (auto w : width) total += w;
    total += 2 * (width.size() - 1);
    const std::string line(total, '-');
    auto emit = [&](const std::vector<std::string>& row) {
      std::string out;
      for (std::size_t k = 0; k < width.size(); ++k) {
        const std::string& cell = k < row.size() ? row[k] : std::string();
        if (k > 0) out += "  ";
        out += k < label_columns_ ? fmt::format("{:<{}}", cell, width[k]) : fmt::format("{:>{}}", cell, width[k]);
      }
      while (!out.empty() && out.back() == ' ') out.pop_back();
      return out + "\n";
    };
    std::string out = line + "\n" + emit(header_) + line + "\n";
    for (const auto& row : rows_) out += row.empty() ? line + "\n" : emit(row);
    return out + line + "\n";
  }

 private:
  std::vector<std::string> header_;
  std::size_t label_columns_;
  std::vector<std::vector<std::string>> rows_;
};

std::string fixed(double v, int digits = 3) {
  if (!std::isfinite(v)) return "n/a";
  std::string s = fmt::format("{:.{}f}", v, digits);
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);  // no "-0.000"
  return s;
}

std::string with_se(double est, double se) { return fmt::format("{} ({})", fixed(est), fixed(se)); }

// APA style: no leading zero, "<.001" below the display resolution.
std::string p_value(double p) {
  if (!std::isfinite(p)) return "n/a";
  if (p < 0.001) return "<.001";
  std::string s = fmt::format("{:.3f}", p);
  if (s.starts_with("0")) s.erase(0, 1);
  return s;
}

std::string stars(double p) {
  if (!std::isfinite(p)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string iso_timestamp() {
  std::time_t t;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(epoch, epoch + std::char_traits<char>::length(epoch), v);
    if (ec != std::errc() || *ptr != '\0') throw Error(ErrorKind::config, "SOURCE_DATE_EPOCH is not an integer");
    t = static_cast<std::time_t>(v);
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string threshold_label(double t) {
  std::string s = fmt::format("{:.2f}", t);
  if (s.starts_with("0")) s.erase(0, 1);
  return s;
}

}  // namespace

// ---- files ----------------------------------------------------------------

RtMatrix parse_rt_csv(std::istream& in, bool raw_seconds) {
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    int col = 0;
    for (;;) {
      ++col;
      const auto comma = line.find(',', start);
      const std::string cell = trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                                     : comma - start));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec == std::errc::invalid_argument || ptr != cell.data() + cell.size()) {
        throw Error(ErrorKind::parse, fmt::format("line {}, column {}: cannot parse '{}' as a number", line_no, col, cell));
      }
      if (ec == std::errc::result_out_of_range || !std::isfinite(v)) {
        throw Error(ErrorKind::data, fmt::format("line {}, column {}: value '{}' is not finite", line_no, col, cell));
      }
      if (raw_seconds) {
        if (!(v > 0.0)) {
          throw Error(ErrorKind::data,
                      fmt::format("line {}, column {}: response time {} must be positive to take logs", line_no, col, v));
        }
        v = std::log(v);
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw Error(ErrorKind::parse,
                  fmt::format("line {}: expected {} columns, found {}", line_no, width, row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::parse, "input contains no data rows");
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return RtMatrix(std::move(m), raw_seconds);
}

RtMatrix read_rt_csv(const std::filesystem::path& path, bool raw_seconds) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
  try {
    return parse_rt_csv(in, raw_seconds);
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string format_double(double value) { return fmt::format("{:.17g}", value); }

void write_text(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::io, fmt::format("cannot create '{}': {}", path.parent_path().string(), ec.message()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, fmt::format("cannot write '{}'", path.string()));
  out << contents;
  if (!out) throw Error(ErrorKind::io, fmt::format("write to '{}' failed", path.string()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_matrix_csv(const std::filesystem::path& path, const RowMatrix& values) {
  std::string out;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(values(i, j));
    }
    out += '\n';
  }
  write_text(path, out);
}

// ---- provenance -----------------------------------------------------------

std::string version() { return RTCP_VERSION; }

Provenance make_provenance(const std::string& command, const json& config, std::uint64_t seed) {
  Provenance p;
  p.version = version();
  p.command = command;
  p.config = config;
  p.config_hash = fmt::format("{:016x}", fnv1a(config.dump()));
  p.seed = seed;
  p.timestamp = iso_timestamp();
  return p;
}

json to_json(const Provenance& p) {
  return {{"tool", p.tool},       {"version", p.version}, {"command", p.command}, {"config_hash", p.config_hash},
          {"seed", p.seed},       {"timestamp", p.timestamp}, {"config", p.config}};
}

std::string provenance_header(const Provenance& p) {
  return fmt::format("# {} {} {}\n# config_hash: {}\n# seed: {}\n# timestamp: {}\n", p.tool, p.version, p.command,
                     p.config_hash, p.seed, p.timestamp);
}

// ---- fit bundle -----------------------------------------------------------

std::string item_table(const FitReport& report) {
  const auto& config = report.fit.config;
  const ParamLayout layout(config);
  const auto& th = report.fit.theta_hat;
  const auto& se = report.fit.standard_errors;
  std::map<int, const WaldTest*> tests;
  for (const auto& t : report.wald.tests) tests[t.item] = &t;

  TextTable table({"Item", "beta", "alpha", "gamma", "sigma"});
  for (int j = 1; j <= config.n_items(); ++j) {
    if (j == config.first_gamma_item()) table.rule();
    std::string gamma = "---";
    if (config.has_gamma(j)) {
      const int r = layout.gamma(j);
      gamma = with_se(th[r], se[r]);
      if (auto it = tests.find(j); it != tests.end() && it->second->defined) gamma += stars(it->second->p_holm);
    }
    const double log_sigma = th[layout.log_sigma(j)];
    const double sigma = std::exp(log_sigma);
    table.add({fmt::format("RT{}", j), with_se(th[layout.beta(j)], se[layout.beta(j)]),
               with_se(th[layout.alpha(j)], se[layout.alpha(j)]), gamma,
               with_se(sigma, sigma * se[layout.log_sigma(j)])});
  }
  std::string out = "Item parameter estimates (log response-time scale), standard errors in parentheses\n";
  out += table.render();
  out += fmt::format(
      "Items RT1-RT{} precede the earliest admissible change-point and carry no gamma (---).\n"
      "Stars: one-sided Wald tests of gamma_j < 0, Holm-adjusted over {} items: * p<.05, ** p<.01, *** p<.001.\n"
      "sigma standard errors by the delta method from log sigma.\n",
      config.first_gamma_item() - 1, config.n_free_gamma());
  return out;
}

std::string structural_table(const FitReport& report) {
  const ParamLayout layout(report.fit.config);
  const auto& th = report.fit.theta_hat;
  const auto& se = report.fit.standard_errors;
  TextTable table({"Parameter", "Interpretation", "Est.", "SE", "z", "p", "chi2(1)", "p(LRT)"}, 2);
  auto row = [&](const char* name, const char* meaning, int index, const std::optional<LrtResult>& lrt) {
    const double z = th[index] / se[index];
    const double p = 2.0 * normal_cdf(-std::abs(z));
    table.add({name, meaning, fixed(th[index]), fixed(se[index]), fixed(z), p_value(p),
               lrt ? fixed(lrt->statistic) : "---", lrt ? p_value(lrt->p_value) : "---"});
  };
  row("psi1", "CP-location", layout.psi1(), report.lrt_psi1);
  row("psi2", "No-CP log-odds", layout.psi2(), std::nullopt);
  row("psi3", "Speed x no-CP", layout.psi3(), report.lrt_psi3);
  std::string out = "Change-point structural parameters: Wald and likelihood-ratio tests of psi = 0\n";
  out += table.render();
  out += fmt::format("P(no CP | xi = 0) = {}, {:g}% CI [{}, {}] (delta method)\n", fixed(report.no_change.estimate),
                     100.0 * report.ci_level, fixed(report.no_change.lower), fixed(report.no_change.upper));
  out += "psi2 = 0 corresponds to P(no CP) = 0.50 and is not tested by likelihood ratio.\n";
  return out;
}

std::string posterior_summary_table(const FitReport& report) {
  const auto& config = report.fit.config;
  const auto& rows = report.posterior;
  std::vector<double> p_change, entropy, means, changer_means;
  long modal_j = 0, changed = 0;
  for (const auto& r : rows) {
    p_change.push_back(r.p_change);
    entropy.push_back(r.entropy_normalized);
    means.push_back(r.mean);
    if (r.mode == config.last_tau()) ++modal_j;
    if (classify(r, report.threshold) == Classification::changed) {
      ++changed;
      changer_means.push_back(r.mean);
    }
  }
  std::set<double> thresholds = {0.5, 0.8, report.threshold};
  TextTable table({"Metric", "Value"});
  table.add({"Sample size N", fmt::format("{}", rows.size())});
  table.add({"Number of items J", fmt::format("{}", config.n_items())});
  table.add({"Boundary c", fmt::format("{}", config.boundary())});
  table.add({"Earliest admissible change-point", fmt::format("item {}", config.first_tau())});
  table.rule();
  table.add({"Mean P(tau < J | y)", fixed(mean_of(p_change))});
  table.add({"Median P(tau < J | y)", fixed(median_of(p_change))});
  for (double t : thresholds) {
    const auto n = std::count_if(p_change.begin(), p_change.end(), [&](double p) { return p >= t; });
    table.add({fmt::format("Respondents with P(tau < J | y) >= {}", threshold_label(t)), fmt::format("{}", n)});
  }
  table.rule();
  table.add({"Proportion with modal tau = J (no change)",
             fixed(rows.empty() ? std::nan("") : static_cast<double>(modal_j) / static_cast<double>(rows.size()))});
  table.add({"Mean posterior mean E[tau | y]", fixed(mean_of(means), 2)});
  table.add({"Mean posterior mean among classified changers", fixed(mean_of(changer_means), 2)});
  table.rule();
  table.add({"Mean normalised posterior entropy", fixed(mean_of(entropy))});
  table.add({"Median normalised posterior entropy", fixed(median_of(entropy))});
  table.rule();
  table.add({"Classified as changed", fmt::format("{}", changed)});
  table.add({"Classified as no change", fmt::format("{}", static_cast<long>(rows.size()) - changed)});
  return fmt::format("Posterior summary of respondent change-points; classified as changed if P(tau < J | y) >= {}\n",
                     threshold_label(report.threshold)) +
         table.render();
}

std::string modal_distribution_table(const FitReport& report) {
  std::map<int, long> counts;
  for (const auto& r : report.posterior) ++counts[r.mode];
  TextTable table({"Modal tau", "Frequency"});
  for (const auto& [tau, n] : counts) table.add({fmt::format("{}", tau), fmt::format("{}", n)});
  table.rule();
  table.add({"Total", fmt::format("{}", report.posterior.size())});
  return fmt::format("Distribution of the modal posterior change-point (tau = {} is no change)\n",
                     report.fit.config.last_tau()) +
         table.render();
}

std::string prior_posterior_table(const FitReport& report) {
  const auto cmp = compare_prior_posterior(report.posterior, report.fit.theta_hat, report.fit.config);
  TextTable table({"tau", "Prior", "Avg. posterior"});
  double prior_total = 0.0, post_total = 0.0;
  for (std::size_t t = 0; t < cmp.prior.size(); ++t) {
    table.add({fmt::format("{}", cmp.first_tau + static_cast<int>(t)), fixed(cmp.prior[t], 4),
               fixed(cmp.average_posterior[t], 4)});
    prior_total += cmp.prior[t];
    post_total += cmp.average_posterior[t];
  }
  table.rule();
  table.add({"Total", fixed(prior_total, 4), fixed(post_total, 4)});
  return "Model-implied prior at xi = 0 and average posterior over change-point locations\n" + table.render();
}

std::string posterior_csv(const FitReport& report) {
  const auto& config = report.fit.config;
  std::string out = "respondent,p_change,mode,mean,entropy_normalized,changed,credible_set";
  for (int tau = config.first_tau(); tau <= config.last_tau(); ++tau) out += fmt::format(",p_tau_{}", tau);
  out += '\n';
  for (std::size_t i = 0; i < report.posterior.size(); ++i) {
    const auto& r = report.posterior[i];
    std::string set;
    for (int tau : credible_set(r, report.credible_alpha)) set += (set.empty() ? "" : " ") + std::to_string(tau);
    out += fmt::format("{},{},{},{},{},{},{}", i + 1, format_double(r.p_change), r.mode, format_double(r.mean),
                       format_double(r.entropy_normalized),
                       classify(r, report.threshold) == Classification::changed ? 1 : 0, set);
    for (double p : r.probs) out += "," + format_double(p);
    out += '\n';
  }
  return out;
}

json fit_json(const FitReport& report, const Provenance& provenance) {
  const auto& f = report.fit;
  const ParamLayout layout(f.config);
  json params = json::array();
  for (int r = 0; r < layout.dim(); ++r) {
    params.push_back({{"name", layout.name(r)},
                      {"estimate", number(f.theta_hat[r])},
                      {"se", number(f.standard_errors[r])},
                      {"free", f.free.empty() || f.free[static_cast<std::size_t>(r)]}});
  }
  json wald = json::array();
  for (const auto& t : report.wald.tests) {
    wald.push_back({{"item", t.item},
                    {"estimate", number(t.estimate)},
                    {"se", number(t.standard_error)},
                    {"z", number(t.z)},
                    {"p_raw", number(t.p_raw)},
                    {"p_holm", number(t.p_holm)},
                    {"defined", t.defined}});
  }
  auto lrt = [](const std::optional<LrtResult>& l) -> json {
    if (!l) return nullptr;
    return {{"statistic", number(l->statistic)},
            {"p_value", number(l->p_value)},
            {"constrained_loglik", number(l->constrained_loglik)},
            {"unconstrained_loglik", number(l->unconstrained_loglik)},
            {"constrained_converged", l->constrained_converged}};
  };
  json posterior = json::array();
  for (std::size_t i = 0; i < report.posterior.size(); ++i) {
    const auto& r = report.posterior[i];
    posterior.push_back({{"respondent", i + 1},
                         {"probs", r.probs},
                         {"mode", r.mode},
                         {"mean", r.mean},
                         {"p_change", r.p_change},
                         {"entropy_normalized", r.entropy_normalized},
                         {"changed", classify(r, report.threshold) == Classification::changed},
                         {"credible_set", credible_set(r, report.credible_alpha)}});
  }
  return {{"provenance", to_json(provenance)},
          {"model", {{"n_items", f.config.n_items()}, {"boundary", f.config.boundary()}, {"n_respondents", f.n_respondents}}},
          {"quadrature",
           {{"rule", to_string(f.quadrature.rule)}, {"points", f.quadrature.points}, {"half_width", f.quadrature.half_width}}},
          {"fit",
           {{"loglik", number(f.loglik)},
            {"stage1_loglik", number(f.stage1_loglik)},
            {"converged", f.converged},
            {"iterations", f.n_iterations},
            {"evaluations", f.n_evaluations},
            {"gradient_norm", number(f.gradient_norm)},
            {"status", f.status}}},
          {"parameters", params},
          {"wald_gamma", wald},
          {"lrt", {{"psi1", lrt(report.lrt_psi1)}, {"psi3", lrt(report.lrt_psi3)}}},
          {"no_change_probability",
           {{"estimate", number(report.no_change.estimate)},
            {"lower", number(report.no_change.lower)},
            {"upper", number(report.no_change.upper)},
            {"se", number(report.no_change.standard_error)},
            {"level", report.ci_level}}},
          {"threshold", report.threshold},
          {"credible_alpha", report.credible_alpha},
          {"posterior", posterior}};
}

SavedPosterior load_posterior(const json& bundle) {
  try {
    SavedPosterior out;
    out.n_items = bundle.at("model").at("n_items").get<int>();
    out.boundary = bundle.at("model").at("boundary").get<int>();
    for (const auto& row : bundle.at("posterior")) {
      out.mode.push_back(row.at("mode").get<int>());
      out.p_change.push_back(row.at("p_change").get<double>());
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, fmt::format("result bundle is missing fields: {}", e.what()));
  }
}

// ---- plot data ------------------------------------------------------------

namespace {

void check_plot_inputs(const RtMatrix& data, const SavedPosterior& post) {
  if (data.n_items() != post.n_items || static_cast<std::size_t>(data.n_respondents()) != post.mode.size()) {
    throw Error(ErrorKind::config, fmt::format("data are {}x{} but the bundle describes {}x{}", data.n_respondents(),
                                               data.n_items(), post.mode.size(), post.n_items));
  }
}

std::string mean_cell(double sum, long n) { return n > 0 ? format_double(sum / static_cast<double>(n)) : "NA"; }

}  // namespace

std::string figure1_csv(const RtMatrix& data, const SavedPosterior& post, double threshold) {
  check_plot_inputs(data, post);
  std::string out = "item,mean_log_rt_unchanged,mean_log_rt_changed,mean_rt_unchanged,mean_rt_changed,n_unchanged,n_changed\n";
  for (int j = 0; j < data.n_items(); ++j) {
    double log_sum[2] = {0, 0}, raw_sum[2] = {0, 0};
    long n[2] = {0, 0};
    for (long i = 0; i < data.n_respondents(); ++i) {
      const int g = post.p_change[static_cast<std::size_t>(i)] >= threshold ? 1 : 0;
      const double y = data.values()(i, j);
      log_sum[g] += y;
      raw_sum[g] += std::exp(y);
      ++n[g];
    }
    out += fmt::format("{},{},{},{},{},{},{}\n", j + 1, mean_cell(log_sum[0], n[0]), mean_cell(log_sum[1], n[1]),
                       mean_cell(raw_sum[0], n[0]), mean_cell(raw_sum[1], n[1]), n[0], n[1]);
  }
  return out;
}

std::string figure2_csv(const RtMatrix& data, const SavedPosterior& post, double threshold) {
  check_plot_inputs(data, post);
  struct Acc {
    double log_sum = 0.0, raw_sum = 0.0;
    long n = 0;
  };
  std::map<int, Acc> by_offset;
  for (long i = 0; i < data.n_respondents(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (post.p_change[k] < threshold || post.mode[k] >= post.n_items) continue;
    for (int j = 1; j <= data.n_items(); ++j) {
      auto& acc = by_offset[j - post.mode[k]];
      const double y = data.values()(i, j - 1);
      acc.log_sum += y;
      acc.raw_sum += std::exp(y);
      ++acc.n;
    }
  }
  std::string out = "offset,mean_log_rt,mean_rt,n\n";
  for (const auto& [offset, acc] : by_offset) {
    out += fmt::format("{},{},{},{}\n", offset, mean_cell(acc.log_sum, acc.n), mean_cell(acc.raw_sum, acc.n), acc.n);
  }
  return out;
}

// ---- simulation -----------------------------------------------------------

json condition_json(const SimCondition& c) {
  return {{"N", c.n_respondents}, {"J", c.n_items},     {"c", c.boundary},
          {"pi", c.prevalence},   {"psi1", c.psi1},     {"psi2", c.psi2()},
          {"psi3", c.psi3},       {"replications", c.replications}, {"seed", c.seed}};
}

SimCondition condition_from_json(const json& j) {
  try {
    SimCondition c;
    c.n_respondents = j.at("N").get<long>();
    c.n_items = j.at("J").get<int>();
    c.boundary = j.at("c").get<int>();
    c.prevalence = j.at("pi").get<double>();
    c.psi1 = j.value("psi1", c.psi1);
    c.psi3 = j.value("psi3", c.psi3);
    c.replications = j.value("replications", c.replications);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, fmt::format("invalid condition: {}", e.what()));
  }
}

json truth_json(const SimCondition& condition, const TrueParams& truth) {
  const ModelConfig config = condition.config();
  const ParamLayout layout(config);
  json params = json::array();
  for (int r = 0; r < layout.dim(); ++r) params.push_back({{"name", layout.name(r)}, {"value", truth.theta[r]}});
  return {{"condition", condition_json(condition)}, {"parameters", params}, {"xi", truth.xi}, {"tau", truth.tau}};
}

json recovery_json(const RecoveryReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) cells.push_back({{"name", c.name}, {"bias", number(c.bias)}, {"rmse", number(c.rmse)}});
  json reps = json::array();
  for (const auto& r : report.records) {
    reps.push_back({{"replication", r.replication},
                    {"failed", r.failed},
                    {"converged", r.converged},
                    {"error", r.error},
                    {"mae_mode", number(r.mae_mode)},
                    {"mae_mean", number(r.mae_mean)}});
  }
  return {{"condition", condition_json(report.condition)},
          {"n_used", report.n_used},
          {"n_failed", report.n_failed},
          {"n_nonconverged", report.n_nonconverged},
          {"mae_mode", number(report.mae_mode)},
          {"mae_mean", number(report.mae_mean)},
          {"cells", cells},
          {"replications", reps}};
}

std::string recovery_csv(const RecoveryReport& report) {
  std::string out = "quantity,statistic,value\n";
  for (const auto& c : report.cells) {
    out += fmt::format("{},bias,{}\n{},rmse,{}\n", c.name, format_double(c.bias), c.name, format_double(c.rmse));
  }
  out += fmt::format("tau_mode,mae,{}\ntau_mean,mae,{}\n", format_double(report.mae_mode), format_double(report.mae_mean));
  return out;
}

namespace {

std::string condition_label(const SimCondition& c, bool vary_size) {
  if (vary_size) return fmt::format("N={}, J={} (c={})", c.n_respondents, c.n_items, c.boundary);
  return fmt::format("c={}, pi={:.2f}", c.boundary, c.prevalence);
}

bool sizes_vary(const std::vector<RecoveryReport>& reports) {
  for (const auto& r : reports) {
    if (r.condition.n_respondents != reports.front().condition.n_respondents ||
        r.condition.n_items != reports.front().condition.n_items) {
      return true;
    }
  }
  return false;
}

}  // namespace

std::string structural_recovery_table(const std::vector<RecoveryReport>& reports) {
  if (reports.empty()) return {};
  const bool vary = sizes_vary(reports);
  TextTable table({"Condition", "MAE Mode", "MAE Mean", "psi1 Bias", "psi1 RMSE", "psi2 Bias", "psi2 RMSE",
                   "psi3 Bias", "psi3 RMSE", "Reps"});
  for (const auto& r : reports) {
    table.add({condition_label(r.condition, vary), fixed(r.mae_mode), fixed(r.mae_mean), fixed(r.cell("psi1").bias),
               fixed(r.cell("psi1").rmse), fixed(r.cell("psi2").bias), fixed(r.cell("psi2").rmse),
               fixed(r.cell("psi3").bias), fixed(r.cell("psi3").rmse),
               fmt::format("{}/{}", r.n_used, r.condition.replications)});
  }
  std::string out = "Change-point recovery and structural parameters";
  if (!vary) {
    out += fmt::format(" (N={}, J={})", reports.front().condition.n_respondents, reports.front().condition.n_items);
  }
  return out + "\n" + table.render() +
         fmt::format("True psi1 = {}, psi3 = {}; psi2 = log((1 - pi) / pi).\n", reports.front().condition.psi1,
                     reports.front().condition.psi3);
}

std::string item_recovery_table(const std::vector<RecoveryReport>& reports, const std::string& block) {
  if (block != "beta" && block != "alpha" && block != "gamma" && block != "sigma") {
    throw Error(ErrorKind::domain, fmt::format("unknown parameter block '{}'", block));
  }
  if (reports.empty()) return {};
  const bool vary = sizes_vary(reports);
  std::vector<std::string> header = {"Item"};
  int max_items = 0;
  for (const auto& r : reports) {
    header.push_back(condition_label(r.condition, vary) + " Bias");
    header.push_back("RMSE");
    max_items = std::max(max_items, r.condition.n_items);
  }
  TextTable table(header);
  for (int j = 1; j <= max_items; ++j) {
    std::vector<std::string> row = {fmt::format("{}", j)};
    for (const auto& r : reports) {
      const bool exists = j <= r.condition.n_items && (block != "gamma" || j >= r.condition.boundary + 2);
      if (!exists) {
        row.insert(row.end(), {"---", "---"});
        continue;
      }
      const auto& cell = r.cell(fmt::format("{}[{}]", block, j));
      row.push_back(fixed(cell.bias));
      row.push_back(fixed(cell.rmse));
    }
    table.add(std::move(row));
  }
  return fmt::format("Recovery of {} by item: bias and RMSE over replications\n", block) + table.render();
}

// ---- selection ------------------------------------------------------------

std::string selection_table(const SelectionResult& result) {
  TextTable table({"c", "loglik", "d", "AIC", "BIC", "ICL", "Entropy", "Status"});
  for (const auto& c : result.candidates) {
    if (c.failed) {
      table.add({fmt::format("{}", c.boundary), "---", "---", "---", "---", "---", "---", "failed"});
      continue;
    }
    table.add({fmt::format("{}", c.boundary), fixed(c.loglik, 2), fmt::format("{}", c.n_params), fixed(c.aic, 2),
               fixed(c.bic, 2), fixed(c.icl, 2), fixed(c.entropy_total, 2),
               c.converged ? "converged" : "not converged"});
  }
  return "Boundary selection by information criteria (smaller is better)\n" + table.render() +
         fmt::format("Selected c: AIC {}, BIC {}, ICL {}\n", result.selected_aic, result.selected_bic,
                     result.selected_icl);
}

json selection_json(const SelectionResult& result, const Provenance& provenance) {
  json cands = json::array();
  for (const auto& c : result.candidates) {
    cands.push_back({{"c", c.boundary},
                     {"failed", c.failed},
                     {"error", c.error},
                     {"loglik", number(c.loglik)},
                     {"n_params", c.n_params},
                     {"aic", number(c.aic)},
                     {"bic", number(c.bic)},
                     {"icl", number(c.icl)},
                     {"entropy_total", number(c.entropy_total)},
                     {"converged", c.converged}});
  }
  return {{"provenance", to_json(provenance)},
          {"candidates", cands},
          {"selected", {{"aic", result.selected_aic}, {"bic", result.selected_bic}, {"icl", result.selected_icl}}}};
}

}  // namespace rtcp::io
