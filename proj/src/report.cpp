#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "uvhl/error.hpp"
#include "uvhl/eval.hpp"

namespace uvhl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::string tie_break_name(TieBreak t) { return t == TieBreak::kClass0 ? "class0" : "class1"; }

}  // namespace

ordered_json config_to_json(const CvConfig& c) {
  ordered_json j;
  j["folds"] = c.folds;
  j["repeats"] = c.repeats;
  j["seed"] = c.seed;
  j["groups"] = c.groups;
  j["k_nn"] = c.k_nn ? ordered_json(*c.k_nn) : ordered_json(nullptr);
  j["k_pool"] = c.k_pool;
  j["inner_folds"] = c.inner_folds;
  j["train_per_class"] = c.train_per_class ? ordered_json(*c.train_per_class) : ordered_json(nullptr);
  j["method"] = method_name(c.uvhl.method);
  j["lambda_u"] = c.uvhl.lambda_u;
  j["lambda_r"] = c.uvhl.lambda_r;
  j["mc_passes"] = c.uvhl.mc_passes;
  j["tie_break"] = tie_break_name(c.uvhl.tie_break);
  j["mlp"] = {{"hidden", c.uvhl.mlp.hidden},
              {"dropout", c.uvhl.mlp.dropout},
              {"learning_rate", c.uvhl.mlp.learning_rate},
              {"epochs", c.uvhl.mlp.epochs},
              {"batch_size", c.uvhl.mlp.batch_size}};
  return j;
}

ordered_json report_to_json(const EvalReport& r) {
  ordered_json j;
  j["schema"] = "uvhl-eval-report";
  j["schema_version"] = kReportSchemaVersion;
  j["config"] = config_to_json(r.config);
  j["dataset"] = {{"cases", r.n_cases}, {"labeled", r.n_labeled}};
  ordered_json folds = ordered_json::array();
  for (const auto& f : r.folds) {
    ordered_json fj;
    fj["repeat"] = f.repeat;
    fj["fold"] = f.fold;
    fj["k_nn"] = f.k_nn;
    fj["n_train"] = f.n_train;
    fj["n_test"] = f.n_test;
    fj["confusion"] = {{"TP", f.cm.tp}, {"FN", f.cm.fn}, {"FP", f.cm.fp}, {"TN", f.cm.tn}};
    ordered_json mj;
    for (std::size_t m = 0; m < kMetricNames.size(); ++m) mj[std::string(kMetricNames[m])] = optional_json(f.metrics.values[m]);
    fj["metrics"] = std::move(mj);
    fj["weights"] = {{"min", f.weight_min}, {"max", f.weight_max}, {"mean", f.weight_mean}};
    folds.push_back(std::move(fj));
  }
  j["folds"] = std::move(folds);
  ordered_json sj;
  for (std::size_t m = 0; m < kMetricNames.size(); ++m)
    sj[std::string(kMetricNames[m])] = {{"mean", r.summary[m].mean}, {"std", r.summary[m].std}, {"count", r.summary[m].count}};
  j["summary"] = std::move(sj);
  return j;
}

EvalReport report_from_json(const json& j) {
  try {
    if (j.at("schema") != "uvhl-eval-report") throw SchemaError("not an evaluation report");
    if (j.at("schema_version").get<int>() != kReportSchemaVersion)
      throw SchemaError("unsupported report schema version " + j.at("schema_version").dump());
    EvalReport r;
    const auto& c = j.at("config");
    r.config.folds = c.at("folds");
    r.config.repeats = c.at("repeats");
    r.config.seed = c.at("seed");
    r.config.groups = c.at("groups").get<std::vector<std::string>>();
    if (!c.at("k_nn").is_null()) r.config.k_nn = c.at("k_nn").get<int>();
    r.config.k_pool = c.at("k_pool").get<std::vector<int>>();
    r.config.inner_folds = c.at("inner_folds");
    if (!c.at("train_per_class").is_null()) r.config.train_per_class = c.at("train_per_class").get<int>();
    const auto method = parse_method(c.at("method").get<std::string>());
    if (!method) throw SchemaError("unknown method in report");
    r.config.uvhl.method = *method;
    r.config.uvhl.lambda_u = c.at("lambda_u");
    r.config.uvhl.lambda_r = c.at("lambda_r");
    r.config.uvhl.mc_passes = c.at("mc_passes");
    r.config.uvhl.tie_break = c.at("tie_break") == "class1" ? TieBreak::kClass1 : TieBreak::kClass0;
    const auto& mlp = c.at("mlp");
    r.config.uvhl.mlp.hidden = mlp.at("hidden").get<std::vector<int>>();
    r.config.uvhl.mlp.dropout = mlp.at("dropout");
    r.config.uvhl.mlp.learning_rate = mlp.at("learning_rate");
    r.config.uvhl.mlp.epochs = mlp.at("epochs");
    r.config.uvhl.mlp.batch_size = mlp.at("batch_size");
    r.n_cases = j.at("dataset").at("cases");
    r.n_labeled = j.at("dataset").at("labeled");
    for (const auto& fj : j.at("folds")) {
      FoldResult f;
      f.repeat = fj.at("repeat");
      f.fold = fj.at("fold");
      f.k_nn = fj.at("k_nn");
      f.n_train = fj.at("n_train");
      f.n_test = fj.at("n_test");
      const auto& cm = fj.at("confusion");
      f.cm = {cm.at("TP"), cm.at("FN"), cm.at("FP"), cm.at("TN")};
      for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
        const auto& v = fj.at("metrics").at(std::string(kMetricNames[m]));
        if (!v.is_null()) f.metrics.values[m] = v.get<double>();
      }
      f.weight_min = fj.at("weights").at("min");
      f.weight_max = fj.at("weights").at("max");
      f.weight_mean = fj.at("weights").at("mean");
      r.folds.push_back(std::move(f));
    }
    for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
      const auto& s = j.at("summary").at(std::string(kMetricNames[m]));
      r.summary[m] = {s.at("mean"), s.at("std"), s.at("count")};
    }
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed report: ") + e.what());
  }
}

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "row,repeat,fold,k_nn,TP,FN,FP,TN";
  for (auto name : kMetricNames) out << ',' << name;
  out << '\n';
  for (const auto& f : r.folds) {
    out << "fold," << f.repeat << ',' << f.fold << ',' << f.k_nn << ',' << f.cm.tp << ',' << f.cm.fn
        << ',' << f.cm.fp << ',' << f.cm.tn;
    for (const auto& v : f.metrics.values) out << ',' << (v ? fmt(*v) : std::string("NA"));
    out << '\n';
  }
  out << "mean,,,,,,,";
  for (const auto& s : r.summary) out << ',' << (s.count ? fmt(s.mean) : std::string("NA"));
  out << "\nstd,,,,,,,";
  for (const auto& s : r.summary) out << ',' << (s.count ? fmt(s.std) : std::string("NA"));
  out << '\n';
  return out.str();
}

std::string ablation_to_csv(std::span<const AblationRow> rows) {
  std::ostringstream out;
  out << "name";
  for (auto name : kMetricNames) out << ',' << name << "_mean," << name << "_std";
  out << ",ACC_p_value\n";
  for (const auto& row : rows) {
    out << row.name;
    for (const auto& s : row.report.summary)
      out << ',' << (s.count ? fmt(s.mean) : "NA") << ',' << (s.count ? fmt(s.std) : "NA");
    out << ',' << (row.acc_p_value ? fmt(*row.acc_p_value) : "NA") << '\n';
  }
  return out.str();
}

std::string render_summary_table(std::span<const std::string> names, std::span<const EvalReport> reports) {
  if (names.size() != reports.size()) throw ArgumentError("render_summary_table: name count mismatch");
  std::ostringstream out;
  out << "| run |";
  for (auto m : kMetricNames) out << ' ' << m << " |";
  out << "\n|---|";
  for (std::size_t m = 0; m < kMetricNames.size(); ++m) out << "---|";
  out << '\n';
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out << "| " << names[i] << " |";
    for (const auto& s : reports[i].summary)
      out << ' ' << (s.count ? fmt(s.mean, "%.5f") + " ± " + fmt(s.std, "%.4f") : std::string("NA")) << " |";
    out << '\n';
  }
  return out.str();
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_metric_svg(std::span<const std::string> names, std::span<const EvalReport> reports) {
  if (names.size() != reports.size()) throw ArgumentError("render_metric_svg: name count mismatch");
  static constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                             "#59a14f", "#edc948", "#b07aa1", "#ff9da7"};
  const double width = 760.0;
  const double height = 380.0;
  const double left = 50.0;
  const double right = 20.0;
  const double top = 20.0;
  const double bottom = 70.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const double group_w = plot_w / static_cast<double>(kMetricNames.size());
  const double bar_w = reports.empty() ? 0.0 : 0.8 * group_w / static_cast<double>(reports.size());
  auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    out << "<line x1=\"" << left << "\" x2=\"" << width - right << "\" y1=\"" << fmt(y_of(v), "%.2f")
        << "\" y2=\"" << fmt(y_of(v), "%.2f") << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << fmt(y_of(v) + 4, "%.2f") << "\" text-anchor=\"end\">"
        << fmt(v, "%.1f") << "</text>\n";
  }
  for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
    const double gx = left + group_w * static_cast<double>(m) + 0.1 * group_w;
    for (std::size_t r = 0; r < reports.size(); ++r) {
      const auto& s = reports[r].summary[m];
      if (!s.count) continue;
      const double x = gx + bar_w * static_cast<double>(r);
      const double y = y_of(s.mean);
      out << "<rect x=\"" << fmt(x, "%.2f") << "\" y=\"" << fmt(y, "%.2f") << "\" width=\""
          << fmt(bar_w * 0.9, "%.2f") << "\" height=\"" << fmt(top + plot_h - y, "%.2f") << "\" fill=\""
          << kPalette[r % 8] << "\"/>\n";
      const double cx = x + bar_w * 0.45;
      out << "<line x1=\"" << fmt(cx, "%.2f") << "\" x2=\"" << fmt(cx, "%.2f") << "\" y1=\""
          << fmt(y_of(s.mean - s.std), "%.2f") << "\" y2=\"" << fmt(y_of(s.mean + s.std), "%.2f")
          << "\" stroke=\"black\"/>\n";
    }
    out << "<text x=\"" << fmt(left + group_w * (static_cast<double>(m) + 0.5), "%.2f") << "\" y=\""
        << top + plot_h + 16 << "\" text-anchor=\"middle\">" << kMetricNames[m] << "</text>\n";
  }
  for (std::size_t r = 0; r < reports.size(); ++r) {
    const double x = left + 150.0 * static_cast<double>(r % 4);
    const double y = top + plot_h + 36 + 16 * static_cast<double>(r / 4);
    out << "<rect x=\"" << x << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[r % 8]
        << "\"/>\n<text x=\"" << x + 14 << "\" y=\"" << y << "\">" << xml_escape(names[r]) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace uvhl
