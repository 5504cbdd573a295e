#include "pgp/cli.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pgp/cross_validation.hpp"
#include "pgp/error.hpp"
#include "pgp/ingestion.hpp"
#include "pgp/metrics.hpp"
#include "pgp/report.hpp"
#include "pgp/serialization.hpp"
#include "pgp/synth.hpp"
#include "text_util.hpp"

namespace pgp {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct SynthArgs {
  SynthConfig config;
  fs::path output = "cohort_raw.csv";
  fs::path schema = "schema.json";
};

struct PreprocessArgs {
  fs::path input;
  fs::path schema;
  fs::path out_dir = "preprocessed";
  int min_visits = 11;
  double max_missing = 0.825;
};

struct EvaluateArgs {
  fs::path input;
  fs::path schema;
  fs::path out_dir = "results";
  std::vector<std::string> models = {"pgp-ar"};
  int folds = 10;
  std::uint64_t seed = 0;
  double pca_ratio = 0.95;
  int restarts = 5;
  int max_iterations = 200;
  int jobs = 1;
  bool ar_include_cs = true;
  bool save_models = false;
};

struct ReportArgs {
  fs::path metrics;
  fs::path output;
};

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

Schema load_schema(const fs::path& path) {
  if (path.empty()) throw InputError("--schema is required");
  if (!fs::exists(path)) throw InputError("schema file not found: " + path.string());
  return Schema::load(path);
}

Json histogram_json(const VisitHistogram& h) {
  Json counts;
  for (const auto& [visits, patients] : h.counts) counts[std::to_string(visits)] = patients;
  Json j;
  j["counts"] = std::move(counts);
  j["defined"] = h.defined;
  if (h.defined) {
    j["mean"] = h.mean;
    j["sd"] = h.sd;
    j["q1"] = h.q1;
    j["median"] = h.median;
    j["q3"] = h.q3;
  }
  return j;
}

// Key-value config that replays the run through `pgp --config`.
std::string evaluate_config_text(const EvaluateArgs& a) {
  std::ostringstream s;
  s << "[evaluate]\n";
  s << "input = \"" << a.input.string() << "\"\n";
  s << "schema = \"" << a.schema.string() << "\"\n";
  s << "out-dir = \"" << a.out_dir.string() << "\"\n";
  s << "models = [";
  for (std::size_t i = 0; i < a.models.size(); ++i) s << (i ? ", " : "") << '"' << a.models[i] << '"';
  s << "]\n";
  s << "folds = " << a.folds << "\n";
  s << "seed = " << a.seed << "\n";
  s << "pca-ratio = " << text::format_double(a.pca_ratio) << "\n";
  s << "restarts = " << a.restarts << "\n";
  s << "max-iterations = " << a.max_iterations << "\n";
  s << "jobs = " << a.jobs << "\n";
  s << "ar-include-cs = " << (a.ar_include_cs ? "true" : "false") << "\n";
  s << "save-models = " << (a.save_models ? "true" : "false") << "\n";
  return s.str();
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto records = generate(a.config);
  const Schema schema = synth_schema(a.config);
  if (a.output.has_parent_path()) fs::create_directories(a.output.parent_path());
  if (a.schema.has_parent_path()) fs::create_directories(a.schema.parent_path());
  write_csv(a.output, records, schema);
  schema.save(a.schema);
  out << "wrote " << records.size() << " patients to " << a.output.string() << " (schema "
      << a.schema.string() << ")\n";
  return 0;
}

int cmd_preprocess(const PreprocessArgs& a, std::ostream& out) {
  const Schema schema = load_schema(a.schema);
  std::vector<std::string> warnings;
  const auto records = parse_csv(a.input, schema, &warnings);
  // Forward-filling is deferred to evaluation, where fallbacks come from the
  // training fold; the cohort file keeps the missing cells.
  const CohortSelection selection = select_cohort(records, a.min_visits, a.max_missing);

  fs::create_directories(a.out_dir);
  write_csv(a.out_dir / "cohort.csv", selection.records, schema);
  schema.save(a.out_dir / "schema.json");

  const auto& r = selection.report;
  Json report;
  report["input_patients"] = r.input;
  report["kept"] = r.kept;
  report["dropped_visit_count_only"] = r.dropped_visits;
  report["dropped_missing_only"] = r.dropped_missing;
  report["dropped_both"] = r.dropped_both;
  report["min_visits"] = r.min_visits;
  report["max_missing"] = r.max_missing;
  report["visit_histogram_input"] = histogram_json(visit_histogram(records));
  report["visit_histogram_cohort"] = histogram_json(visit_histogram(selection.records));
  report["warnings"] = warnings;
  write_text(a.out_dir / "selection_report.json", report.dump(2) + "\n");

  std::ostringstream hist;
  hist << "visits,patients\n";
  for (const auto& [visits, patients] : visit_histogram(records).counts) {
    hist << visits << ',' << patients << '\n';
  }
  write_text(a.out_dir / "visit_histogram.csv", hist.str());

  Json manifest;
  manifest["tool"] = "pgp";
  manifest["version"] = kVersion;
  manifest["command"] = "preprocess";
  manifest["config"] = {{"input", a.input.string()},     {"schema", a.schema.string()},
                        {"out_dir", a.out_dir.string()}, {"min_visits", a.min_visits},
                        {"max_missing", a.max_missing}};
  write_text(a.out_dir / "manifest.json", manifest.dump(2) + "\n");

  out << "selected " << r.kept << " of " << r.input << " patients -> "
      << (a.out_dir / "cohort.csv").string() << '\n';
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const Schema schema = load_schema(a.schema);
  if (!fs::exists(a.input)) throw InputError("cohort file not found: " + a.input.string());
  const auto records = parse_csv(a.input, schema);

  CvConfig config;
  config.models.clear();
  for (const auto& m : a.models) {
    const ModelKind kind = model_kind_from_string(m);
    if (std::find(config.models.begin(), config.models.end(), kind) == config.models.end()) {
      config.models.push_back(kind);
    }
  }
  config.folds = a.folds;
  config.seed = a.seed;
  config.pipeline.pca_ratio = a.pca_ratio;
  config.ar_include_cs = a.ar_include_cs;
  config.restarts = a.restarts;
  config.max_iterations = a.max_iterations;
  config.jobs = a.jobs;
  config.keep_models = a.save_models;

  const CvResult result = run_cross_validation(records, config);
  const ConversionStats conversions = conversion_stats(records);
  write_reports(a.out_dir, result, conversions);

  if (a.save_models) {
    for (const auto& fold : result.folds) {
      for (const auto& [variant, model] : fold.models) {
        save_bundle(a.out_dir / ("model_" + std::string(to_string(variant)) + "_fold" +
                                 std::to_string(fold.fold) + ".json"),
                    fold.pipeline, model);
      }
    }
  }

  Json manifest;
  manifest["tool"] = "pgp";
  manifest["version"] = kVersion;
  manifest["command"] = "evaluate";
  manifest["config"] = {{"input", a.input.string()},
                        {"schema", a.schema.string()},
                        {"out_dir", a.out_dir.string()},
                        {"models", a.models},
                        {"folds", a.folds},
                        {"seed", a.seed},
                        {"pca_ratio", a.pca_ratio},
                        {"restarts", a.restarts},
                        {"max_iterations", a.max_iterations},
                        {"jobs", a.jobs},
                        {"ar_include_cs", a.ar_include_cs},
                        {"save_models", a.save_models}};
  manifest["replay"] = "pgp --config run_config.toml evaluate";
  Json jitter = Json::array();
  for (const auto& f : result.fits) {
    if (f.jitter > 0.0) {
      jitter.push_back({{"fold", f.fold}, {"variant", to_string(f.variant)}, {"jitter", f.jitter}});
    }
  }
  manifest["jitter_events"] = std::move(jitter);
  manifest["patients"] = records.size();
  write_text(a.out_dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(a.out_dir / "run_config.toml", evaluate_config_text(a));

  out << render_table(metrics_document(result, conversions));
  return 0;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  std::ifstream in(a.metrics);
  if (!in) throw InputError("cannot open metrics file " + a.metrics.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(a.metrics.string() + ": " + e.what());
  }
  if (doc.value("schema_version", 0) != kMetricsSchemaVersion) {
    throw InputError("unsupported metrics schema version");
  }
  const std::string table = render_table(doc);
  if (!a.output.empty()) write_text(a.output, table);
  out << table;
  return 0;
}

}  // namespace

void tune_allocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Population and personalized Gaussian process forecasting of longitudinal visits"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Key-value config file; flags override it");
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic longitudinal cohort CSV");
  s->add_option("--output", synth.output, "Cohort CSV to write")->capture_default_str();
  s->add_option("--schema", synth.schema, "Schema file to write")->capture_default_str();
  s->add_option("--patients", synth.config.n_patients, "Number of patients")->capture_default_str();
  s->add_option("--seed", synth.config.seed, "Random seed")->capture_default_str();
  s->add_option("--feature-dim", synth.config.feature_dim, "Feature columns")->capture_default_str();
  s->add_option("--visit-mean", synth.config.visit_mean)->capture_default_str();
  s->add_option("--visit-sd", synth.config.visit_sd)->capture_default_str();
  s->add_option("--min-visits", synth.config.min_visits)->capture_default_str();
  s->add_option("--max-visits", synth.config.max_visits)->capture_default_str();
  s->add_option("--drift-mean", synth.config.drift_mean)->capture_default_str();
  s->add_option("--drift-sd", synth.config.drift_sd)->capture_default_str();
  s->add_option("--smooth-amplitude", synth.config.smooth_amplitude)->capture_default_str();
  s->add_option("--offset-scale", synth.config.offset_scale, "Per-patient heterogeneity")
      ->capture_default_str();
  s->add_option("--deviation-slope", synth.config.deviation_slope)->capture_default_str();
  s->add_option("--noise-scale", synth.config.noise_scale)->capture_default_str();
  s->add_option("--feature-noise", synth.config.feature_noise)->capture_default_str();
  s->add_option("--missing-rate", synth.config.missing_rate)->capture_default_str();

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Parse a visit CSV and select the study cohort");
  p->add_option("--input", pre.input, "Visit CSV")->required();
  p->add_option("--schema", pre.schema, "Schema file")->required();
  p->add_option("--out-dir", pre.out_dir)->capture_default_str();
  p->add_option("--min-visits", pre.min_visits, "Minimum visits to keep a patient")->capture_default_str();
  p->add_option("--max-missing", pre.max_missing, "Maximum missing feature fraction")
      ->capture_default_str();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Patient-independent cross-validation");
  e->add_option("--input", ev.input, "Cohort CSV")->required();
  e->add_option("--schema", ev.schema, "Schema file")->required();
  e->add_option("--out-dir", ev.out_dir)->capture_default_str();
  e->add_option("--models", ev.models, "Any of gp, gp-ar, pgp, pgp-ar, or all")
      ->delimiter(',')
      ->capture_default_str();
  e->add_option("--folds", ev.folds)->capture_default_str();
  e->add_option("--seed", ev.seed)->capture_default_str();
  e->add_option("--pca-ratio", ev.pca_ratio)->capture_default_str();
  e->add_option("--restarts", ev.restarts, "Optimizer restarts per fit")->capture_default_str();
  e->add_option("--max-iterations", ev.max_iterations)->capture_default_str();
  e->add_option("--jobs", ev.jobs, "Folds evaluated in parallel")->capture_default_str();
  e->add_option("--ar-include-cs", ev.ar_include_cs, "Feed CS back as an auto-regressive input")
      ->capture_default_str();
  e->add_flag("--save-models", ev.save_models, "Write per-fold model bundles");

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Render a metrics.json as a table");
  r->add_option("--metrics", rep.metrics, "metrics.json from evaluate")->required();
  r->add_option("--output", rep.output, "Also write the table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    std::ostringstream usage_out;
    std::ostringstream usage_err;
    const int code = app.exit(ex, usage_out, usage_err);
    out << usage_out.str();
    err << usage_err.str();
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s) return cmd_synth(synth, out);
    if (*p) return cmd_preprocess(pre, out);
    if (*e) {
      if (ev.models.size() == 1 && ev.models.front() == "all") {
        ev.models = {"gp", "gp-ar", "pgp", "pgp-ar"};
      }
      return cmd_evaluate(ev, out);
    }
    if (*r) return cmd_report(rep, out);
  } catch (const NumericalError& ex) {
    err << "numerical error: " << ex.what() << '\n';
    return 1;
  } catch (const FitError& ex) {
    err << "fit error: " << ex.what() << '\n';
    return 1;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    err << "runtime error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace pgp
