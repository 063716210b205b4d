#include "probekit/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "probekit/errors.hpp"

namespace probekit {

namespace {

using json = nlohmann::json;

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_real(*v) : std::string(); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  const json& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

// ---- CSV ----

std::string csv(const SweepReport& r) {
  std::ostringstream os;
  os << "layer_id,step,model_tag,task,value,n_train,n_test,n_excluded,status\n";
  for (const auto& c : r.cells) {
    os << c.layer_id << ',' << c.step << ',' << to_string(c.model_tag) << ',' << task_name(c.task)
       << ',' << fmt_opt(c.value) << ',' << c.n_train << ',' << c.n_test << ',' << c.n_excluded
       << ',' << c.status << '\n';
  }
  return os.str();
}

std::string csv(const ControlReport& r) {
  std::ostringstream os;
  os << "layer_id,step,task,trained,random,gap\n";
  for (const auto& c : r.cells) {
    os << c.layer_id << ',' << c.step << ',' << task_name(c.task) << ',' << fmt_opt(c.trained)
       << ',' << fmt_opt(c.random) << ',' << fmt_opt(c.gap) << '\n';
  }
  return os.str();
}

std::string csv(const EmergenceCurve& r) {
  std::ostringstream os;
  os << "layer_id,model_tag,task,step,value,n_excluded\n";
  for (const auto& p : r.points) {
    os << r.layer_id << ',' << to_string(r.model_tag) << ',' << task_name(r.task) << ',' << p.step
       << ',' << fmt_opt(p.value) << ',' << p.n_excluded << '\n';
  }
  return os.str();
}

std::string csv(const StudyReport& r) {
  std::ostringstream os;
  os << "sample_id,variant,dx,dy,attempts,degenerate,aborted,effect,null_baseline,final_loss\n";
  for (const auto& x : r.records) {
    os << x.sample_id << ',' << x.variant << ',' << x.translation.dx << ',' << x.translation.dy
       << ',' << x.attempts << ',' << (x.degenerate ? 1 : 0) << ',' << (x.aborted ? 1 : 0) << ','
       << fmt_real(x.effect) << ',' << fmt_real(x.null_baseline) << ',' << fmt_real(x.final_loss)
       << '\n';
  }
  return os.str();
}

// ---- JSON ----

json config_json(const TrainConfig& cfg) { return json::parse(train_config_to_json(cfg)); }

json body(const SweepReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"layer_id", c.layer_id},
                     {"step", c.step},
                     {"model_tag", to_string(c.model_tag)},
                     {"task", task_name(c.task)},
                     {"value", opt_json(c.value)},
                     {"n_train", c.n_train},
                     {"n_test", c.n_test},
                     {"n_excluded", c.n_excluded},
                     {"status", c.status}});
  }
  return {{"format_version", r.format_version},
          {"config", config_json(r.config)},
          {"cells", cells},
          {"decoder_side_mean", opt_json(r.decoder_side_mean())}};
}

json body(const ControlReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"layer_id", c.layer_id},
                     {"step", c.step},
                     {"task", task_name(c.task)},
                     {"trained", opt_json(c.trained)},
                     {"random", opt_json(c.random)},
                     {"gap", opt_json(c.gap)}});
  }
  return {{"format_version", r.format_version},
          {"config", config_json(r.config)},
          {"trained_tag", to_string(r.trained_tag)},
          {"random_tag", to_string(r.random_tag)},
          {"cells", cells}};
}

json body(const EmergenceCurve& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    points.push_back({{"step", p.step}, {"value", opt_json(p.value)}, {"n_excluded", p.n_excluded}});
  }
  return {{"format_version", r.format_version},
          {"config", config_json(r.config)},
          {"layer_id", r.layer_id},
          {"model_tag", to_string(r.model_tag)},
          {"task", task_name(r.task)},
          {"points", points}};
}

json body(const StudyReport& r) {
  json records = json::array();
  for (const auto& x : r.records) {
    records.push_back({{"sample_id", x.sample_id},
                       {"variant", x.variant},
                       {"dx", x.translation.dx},
                       {"dy", x.translation.dy},
                       {"attempts", x.attempts},
                       {"degenerate", x.degenerate},
                       {"aborted", x.aborted},
                       {"effect", x.effect},
                       {"null_baseline", x.null_baseline},
                       {"final_loss", x.final_loss}});
  }
  return {{"format_version", r.format_version},
          {"mode", to_string(r.mode)},
          {"spec", json::parse(intervention_spec_to_json(r.spec))},
          {"model_tag", to_string(r.model_tag)},
          {"n_variants", r.n_variants},
          {"records", records},
          {"median_effect", opt_json(r.median_effect)},
          {"median_null", opt_json(r.median_null)},
          {"n_degenerate", r.n_degenerate}};
}

SweepReport sweep_from(const json& j) {
  SweepReport r;
  r.format_version = j.at("format_version").get<int>();
  r.config = train_config_from_json(j.at("config").dump());
  for (const auto& c : j.at("cells")) {
    SweepCell s;
    s.layer_id = c.at("layer_id").get<std::string>();
    s.step = c.at("step").get<int>();
    s.model_tag = model_tag_from_string(c.at("model_tag").get<std::string>());
    s.task = probe_task_from_string(c.at("task").get<std::string>());
    s.value = opt_from(c, "value");
    s.n_train = c.at("n_train").get<std::size_t>();
    s.n_test = c.at("n_test").get<std::size_t>();
    s.n_excluded = c.at("n_excluded").get<std::size_t>();
    s.status = c.at("status").get<std::string>();
    r.cells.push_back(std::move(s));
  }
  return r;
}

ControlReport control_from(const json& j) {
  ControlReport r;
  r.format_version = j.at("format_version").get<int>();
  r.config = train_config_from_json(j.at("config").dump());
  r.trained_tag = model_tag_from_string(j.at("trained_tag").get<std::string>());
  r.random_tag = model_tag_from_string(j.at("random_tag").get<std::string>());
  for (const auto& c : j.at("cells")) {
    ControlCell s;
    s.layer_id = c.at("layer_id").get<std::string>();
    s.step = c.at("step").get<int>();
    s.task = probe_task_from_string(c.at("task").get<std::string>());
    s.trained = opt_from(c, "trained");
    s.random = opt_from(c, "random");
    s.gap = opt_from(c, "gap");
    r.cells.push_back(std::move(s));
  }
  return r;
}

EmergenceCurve emergence_from(const json& j) {
  EmergenceCurve r;
  r.format_version = j.at("format_version").get<int>();
  r.config = train_config_from_json(j.at("config").dump());
  r.layer_id = j.at("layer_id").get<std::string>();
  r.model_tag = model_tag_from_string(j.at("model_tag").get<std::string>());
  r.task = probe_task_from_string(j.at("task").get<std::string>());
  for (const auto& p : j.at("points")) {
    r.points.push_back({p.at("step").get<int>(), opt_from(p, "value"),
                        p.at("n_excluded").get<std::size_t>()});
  }
  return r;
}

StudyReport study_from(const json& j) {
  StudyReport r;
  r.format_version = j.at("format_version").get<int>();
  r.mode = study_mode_from_string(j.at("mode").get<std::string>());
  r.spec = intervention_spec_from_json(j.at("spec").dump());
  r.model_tag = model_tag_from_string(j.at("model_tag").get<std::string>());
  r.n_variants = j.at("n_variants").get<std::size_t>();
  for (const auto& x : j.at("records")) {
    StudyRecord s;
    s.sample_id = x.at("sample_id").get<std::string>();
    s.variant = x.at("variant").get<int>();
    s.translation = {x.at("dx").get<int>(), x.at("dy").get<int>()};
    s.attempts = x.at("attempts").get<int>();
    s.degenerate = x.at("degenerate").get<bool>();
    s.aborted = x.at("aborted").get<bool>();
    s.effect = x.at("effect").get<double>();
    s.null_baseline = x.at("null_baseline").get<double>();
    s.final_loss = x.at("final_loss").get<double>();
    r.records.push_back(std::move(s));
  }
  r.median_effect = opt_from(j, "median_effect");
  r.median_null = opt_from(j, "median_null");
  r.n_degenerate = j.at("n_degenerate").get<std::size_t>();
  return r;
}

}  // namespace

std::string_view to_string(ReportFormat f) { return f == ReportFormat::csv ? "csv" : "json"; }

ReportFormat report_format_from_string(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw ValidationError("unknown report format '" + std::string(s) + "'");
}

std::string_view report_type(const Report& report) {
  constexpr std::string_view kNames[] = {"sweep", "control", "emergence", "study"};
  return kNames[report.index()];
}

std::string render_report(const Report& report, ReportFormat format) {
  if (format == ReportFormat::csv) {
    std::string out = "# schema_version=" + std::to_string(kReportSchemaVersion) +
                      " report_type=" + std::string(report_type(report)) + "\n";
    out += std::visit([](const auto& r) { return csv(r); }, report);
    return out;
  }
  json j = std::visit([](const auto& r) { return body(r); }, report);
  j["report_type"] = report_type(report);
  j["schema_version"] = kReportSchemaVersion;
  return j.dump(2) + "\n";
}

Report report_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("report is not valid JSON: ") + e.what(), 0);
  }
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kReportSchemaVersion) {
      throw FormatError("unsupported report schema_version " + std::to_string(version), 0);
    }
    const std::string type = j.at("report_type").get<std::string>();
    if (type == "sweep") return sweep_from(j);
    if (type == "control") return control_from(j);
    if (type == "emergence") return emergence_from(j);
    if (type == "study") return study_from(j);
    throw FormatError("unknown report_type '" + type + "'", 0);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what(), 0);
  } catch (const ValidationError& e) {
    throw FormatError(std::string("malformed report: ") + e.what(), 0);
  }
}

void export_report(const Report& report, ReportFormat format, const std::filesystem::path& path) {
  const std::string text = render_report(report, format);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write report '" + path.string() + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

Report import_report(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open report '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return report_from_json(ss.str());
}

}  // namespace probekit
