#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "probekit/dataset.hpp"
#include "probekit/dump_io.hpp"
#include "probekit/errors.hpp"
#include "probekit/fixture.hpp"
#include "probekit/intervention.hpp"
#include "probekit/probe.hpp"
#include "probekit/report.hpp"
#include "probekit/study.hpp"
#include "probekit/sweep.hpp"

namespace fs = std::filesystem;

namespace probekit::cli {

namespace {

struct Common {
  std::string manifest;
  std::vector<std::string> layers;
  std::vector<int> steps;
  std::string task = "saliency";
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string model_tag;
  std::size_t workers = 1;
};

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ProbeTask parse_task(const std::string& s) { return probe_task_from_string(s); }

std::optional<ModelTag> parse_tag(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return model_tag_from_string(s);
}

TrainConfig train_config(const Common& c) {
  TrainConfig cfg = c.config.empty() ? TrainConfig{} : train_config_from_json(read_text(c.config));
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

ManifestDataset open_manifest(const std::string& path) {
  if (path.empty()) throw ValidationError("--manifest is required");
  return ManifestDataset(load_manifest(path));
}

fs::path out_dir(const Common& c) {
  if (c.out.empty()) throw ValidationError("--out is required");
  fs::path dir = c.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + c.out + "': " + ec.message());
  return dir;
}

void write_both(const Report& report, const fs::path& dir, const std::string& stem) {
  export_report(report, ReportFormat::json, dir / (stem + ".json"));
  export_report(report, ReportFormat::csv, dir / (stem + ".csv"));
}

void add_common(CLI::App* app, Common& c, bool layers, bool steps) {
  app->add_option("--manifest", c.manifest, "Dataset manifest JSON");
  if (layers) app->add_option("--layer", c.layers, "Layer id (repeatable)");
  if (steps) app->add_option("--step", c.steps, "Sampling step (repeatable)");
  app->add_option("--task", c.task, "saliency or depth")->check(CLI::IsMember({"saliency", "depth"}));
  app->add_option("--seed", c.seed, "Seed override");
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--model-tag", c.model_tag, "Model tag to select");
  app->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

int cmd_synth(const Common& c, bool control, std::ostream& out) {
  FixtureConfig cfg = c.config.empty() ? FixtureConfig{} : fixture_config_from_json(read_text(c.config));
  if (c.seed) cfg.seed = *c.seed;
  if (control) {
    cfg.planted = PlantedTask::none;
  } else if (c.config.empty()) {
    cfg.planted = parse_task(c.task) == ProbeTask::classifier ? PlantedTask::classifier
                                                              : PlantedTask::regressor;
  }
  if (!c.model_tag.empty()) cfg.model_tag = model_tag_from_string(c.model_tag);
  cfg.validate();
  const fs::path dir = out_dir(c);
  const DatasetManifest m = synthesize_fixture(cfg, dir);
  out << "wrote " << m.samples.size() << " samples to " << (dir / "manifest.json").string() << '\n';
  return kExitOk;
}

int cmd_train(const Common& c, std::ostream& out) {
  if (c.layers.size() != 1 || c.steps.size() != 1) {
    throw ValidationError("train needs exactly one --layer and one --step");
  }
  const ManifestDataset data = open_manifest(c.manifest);
  const ProbeTask task = parse_task(c.task);
  const TrainConfig cfg = train_config(c);
  const fs::path dir = out_dir(c);
  SweepOptions so;
  so.layers = c.layers;
  so.steps = c.steps;
  so.model_tag = parse_tag(c.model_tag);
  so.checkpoint_dir = dir / "probes";
  SweepResult r = run_probe_sweep(data, task, cfg, so);
  if (r.report.cells.empty() || r.report.cells.front().status == "missing") {
    throw ValidationError("cell " + c.layers.front() + " step " + std::to_string(c.steps.front()) +
                          " is not covered by the manifest");
  }
  write_both(r.report, dir, "train");
  for (const auto& cell : r.report.cells) {
    out << cell.layer_id << " step " << cell.step << " " << to_string(cell.model_tag) << ": "
        << (task == ProbeTask::classifier ? "dice " : "rmse ")
        << (cell.value ? std::to_string(*cell.value) : std::string("n/a")) << '\n';
  }
  return kExitOk;
}

int cmd_sweep(const Common& c, std::ostream& out, std::ostream& err) {
  const ManifestDataset data = open_manifest(c.manifest);
  const ProbeTask task = parse_task(c.task);
  const TrainConfig cfg = train_config(c);
  const fs::path dir = out_dir(c);
  SweepOptions so;
  if (!c.layers.empty()) so.layers = c.layers;
  if (!c.steps.empty()) so.steps = c.steps;
  so.model_tag = parse_tag(c.model_tag);
  so.workers = c.workers;
  so.checkpoint_dir = dir / "probes";
  const SweepResult r = run_probe_sweep(data, task, cfg, so);
  print_warnings(r.warnings, err);
  write_both(r.report, dir, "sweep");
  out << r.report.cells.size() << " cells written to " << (dir / "sweep.csv").string() << '\n';
  return kExitOk;
}

int cmd_control(const Common& c, const std::string& random_manifest, std::ostream& out) {
  const ManifestDataset trained = open_manifest(c.manifest);
  if (random_manifest.empty()) throw ValidationError("--random-manifest is required");
  const ManifestDataset random(load_manifest(random_manifest));
  const ProbeTask task = parse_task(c.task);
  const TrainConfig cfg = train_config(c);
  const fs::path dir = out_dir(c);
  ControlOptions co;
  if (!c.layers.empty()) co.layers = c.layers;
  if (!c.steps.empty()) co.steps = c.steps;
  co.workers = c.workers;
  const ControlReport r = run_control(trained, random, task, cfg, co);
  write_both(r, dir, "control");
  out << r.cells.size() << " control cells written to " << (dir / "control.csv").string() << '\n';
  return kExitOk;
}

int cmd_emerge(const Common& c, std::ostream& out) {
  if (c.layers.size() != 1) throw ValidationError("emerge needs exactly one --layer");
  const ManifestDataset data = open_manifest(c.manifest);
  const ProbeTask task = parse_task(c.task);
  const TrainConfig cfg = train_config(c);
  const fs::path dir = out_dir(c);
  EmergenceOptions eo;
  eo.model_tag = parse_tag(c.model_tag);
  eo.workers = c.workers;
  const EmergenceCurve curve = emergence_curve(data, c.layers.front(), task, cfg, eo);
  write_both(curve, dir, "emergence");
  for (const auto& p : curve.points) {
    out << "step " << p.step << ": " << (p.value ? std::to_string(*p.value) : std::string("null"))
        << '\n';
  }
  return kExitOk;
}

struct InterveneArgs {
  std::string probes;
  std::string train_config;
  std::string resumed;
  std::size_t variants = 5;
};

int cmd_intervene(const Common& c, const InterveneArgs& a, std::ostream& out, std::ostream& err) {
  const ManifestDataset data = open_manifest(c.manifest);
  const ProbeTask task = parse_task(c.task);
  const fs::path dir = out_dir(c);

  InterventionSpec spec = default_intervention_spec(task, data.layer_ids(), data.total_steps());
  if (!c.config.empty()) {
    const InterventionSpec given = intervention_spec_from_json(read_text(c.config));
    if (given.task != task) throw ValidationError("--config task disagrees with --task");
    if (!given.layer_policy.empty()) spec.layer_policy = given.layer_policy;
    if (!given.step_policy.empty()) spec.step_policy = given.step_policy;
    spec.options = given.options;
    spec.seed = given.seed;
  }
  if (!c.layers.empty()) spec.layer_policy = c.layers;
  if (!c.steps.empty()) spec.step_policy = c.steps;
  if (c.seed) spec.seed = *c.seed;

  StudyOptions so;
  so.spec = spec;
  so.n_variants = a.variants;
  so.output_dir = dir / "intervened";
  if (!a.resumed.empty()) so.resumed_dir = fs::path(a.resumed);
  so.model_tag = parse_tag(c.model_tag);
  so.workers = c.workers;

  std::map<CellKey, LinearProbe> probes;
  const auto tags = data.model_tags();
  if (!so.model_tag && tags.size() != 1) {
    throw ValidationError("dataset does not carry exactly one model tag; pass --model-tag");
  }
  const ModelTag tag = so.model_tag ? *so.model_tag : tags.front();
  if (!a.probes.empty()) {
    if (!fs::is_directory(a.probes)) throw IoError("probe directory '" + a.probes + "' not found");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.probes)) {
      if (e.path().extension() == ".apkd") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      LoadedProbe lp = load_probe(f);
      if (lp.probe.task != task) continue;
      probes.insert_or_assign(CellKey{lp.probe.layer_id, lp.probe.step, tag}, std::move(lp.probe));
    }
  } else {
    TrainConfig cfg = a.train_config.empty() ? TrainConfig{}
                                             : train_config_from_json(read_text(a.train_config));
    SweepOptions sw;
    sw.layers = spec.layer_policy;
    sw.steps = spec.step_policy;
    sw.model_tag = tag;
    sw.workers = c.workers;
    SweepResult r = run_probe_sweep(data, task, cfg, sw);
    print_warnings(r.warnings, err);
    probes = std::move(r.probes);
  }

  const StudyReport report = run_intervention_study(data, probes, so);
  write_both(report, dir, "study");
  out << report.records.size() << " interventions (" << to_string(report.mode) << " mode)";
  if (report.median_effect) {
    out << ", median effect " << *report.median_effect << ", median null " << *report.median_null;
  }
  out << '\n';
  return kExitOk;
}

int cmd_report(const std::string& in, const std::string& format, const std::string& path,
               std::ostream& out) {
  if (in.empty()) throw ValidationError("--in is required");
  const Report r = import_report(in);
  const ReportFormat f = report_format_from_string(format);
  if (path.empty()) {
    out << render_report(r, f);
  } else {
    export_report(r, f, path);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linear probing and activation intervention toolkit", "probekit"};
  app.require_subcommand(1);

  Common c;
  bool control = false;
  std::string random_manifest;
  InterveneArgs iv;
  std::string report_in, report_format = "csv", report_out;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic fixture dataset");
  add_common(synth, c, false, false);
  synth->add_flag("--control", control, "Random-control fixture (no planted signal)");

  auto* train = app.add_subcommand("train", "Train and evaluate one (layer, step) probe");
  add_common(train, c, true, true);

  auto* sweep = app.add_subcommand("sweep", "Probe every layer x step cell");
  add_common(sweep, c, true, true);

  auto* ctl = app.add_subcommand("control", "Compare against a randomized-model dataset");
  add_common(ctl, c, true, true);
  ctl->add_option("--random-manifest", random_manifest, "Manifest of the control dataset");

  auto* emerge = app.add_subcommand("emerge", "Per-step metric series for one layer");
  add_common(emerge, c, true, false);

  auto* intervene = app.add_subcommand("intervene", "Run an intervention study");
  add_common(intervene, c, true, true);
  intervene->add_option("--probes", iv.probes, "Directory of probe checkpoints");
  intervene->add_option("--train-config", iv.train_config, "Train config when training probes");
  intervene->add_option("--resumed", iv.resumed, "Directory of labels from resumed generation");
  intervene->add_option("--variants", iv.variants, "Modified labels per test sample");

  auto* report = app.add_subcommand("report", "Re-export a JSON report");
  report->add_option("--in", report_in, "Report JSON");
  report->add_option("--format", report_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--out", report_out, "Output file (stdout if omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    if (*synth) return cmd_synth(c, control, out);
    if (*train) return cmd_train(c, out);
    if (*sweep) return cmd_sweep(c, out, err);
    if (*ctl) return cmd_control(c, random_manifest, out);
    if (*emerge) return cmd_emerge(c, out);
    if (*intervene) return cmd_intervene(c, iv, out, err);
    if (*report) return cmd_report(report_in, report_format, report_out, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace probekit::cli
