#include "pgp/cross_validation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "pgp/error.hpp"
#include "pgp/personalized_gp.hpp"

namespace pgp {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, int fold, Variant variant) {
  return splitmix64(splitmix64(seed) ^ (static_cast<std::uint64_t>(fold) << 8) ^
                    static_cast<std::uint64_t>(variant == Variant::auto_regressive));
}

bool wants(const CvConfig& config, ModelKind kind) {
  return std::find(config.models.begin(), config.models.end(), kind) != config.models.end();
}

std::vector<double> finite_only(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) {
    if (std::isfinite(x)) out.push_back(x);
  }
  return out;
}

}  // namespace

FoldPlan make_folds(std::vector<std::string> patient_ids, int k, std::uint64_t seed) {
  if (k < 2) throw InputError("make_folds: need at least two folds");
  std::sort(patient_ids.begin(), patient_ids.end(), patient_id_less);
  if (std::adjacent_find(patient_ids.begin(), patient_ids.end()) != patient_ids.end()) {
    throw InputError("make_folds: duplicate patient id");
  }
  if (static_cast<int>(patient_ids.size()) < k) {
    throw InputError("make_folds: " + std::to_string(patient_ids.size()) +
                     " patients cannot fill " + std::to_string(k) + " folds");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(patient_ids.begin(), patient_ids.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < patient_ids.size(); ++i) {
    const int f = static_cast<int>(i % static_cast<std::size_t>(k));
    plan.assignment[patient_ids[i]] = f;
    plan.folds[static_cast<std::size_t>(f)].push_back(patient_ids[i]);
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end(), patient_id_less);
  return plan;
}

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gp: return "gp";
    case ModelKind::gp_ar: return "gp-ar";
    case ModelKind::pgp: return "pgp";
    case ModelKind::pgp_ar: return "pgp-ar";
  }
  return "?";
}

const char* display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::gp: return "GP";
    case ModelKind::gp_ar: return "GP(AR)";
    case ModelKind::pgp: return "pGP";
    case ModelKind::pgp_ar: return "pGP(AR)";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  for (ModelKind k : kAllModels) {
    if (name == to_string(k)) return k;
  }
  throw InputError("unknown model variant '" + name + "' (expected gp, gp-ar, pgp, pgp-ar)");
}

Variant variant_of(ModelKind kind) {
  return kind == ModelKind::gp || kind == ModelKind::pgp ? Variant::standard
                                                         : Variant::auto_regressive;
}

bool is_personalized(ModelKind kind) { return kind == ModelKind::pgp || kind == ModelKind::pgp_ar; }

const ModelResult& CvResult::model(ModelKind kind) const {
  for (const auto& m : models) {
    if (m.kind == kind) return m;
  }
  throw InputError(std::string("model ") + to_string(kind) + " was not evaluated");
}

FoldResult evaluate_fold(const std::vector<PatientRecord>& records, const FoldPlan& plan, int fold,
                         const CvConfig& config) {
  FoldResult result;
  result.fold = fold;
  std::vector<PatientRecord> train;
  std::vector<const PatientRecord*> test;
  for (const auto& r : records) {
    const auto it = plan.assignment.find(r.patient_id);
    if (it == plan.assignment.end()) throw InputError("patient " + r.patient_id + " has no fold");
    if (it->second == fold) {
      test.push_back(&r);
      result.test_ids.push_back(r.patient_id);
    } else {
      train.push_back(r);
      result.training_ids.push_back(r.patient_id);
    }
  }

  result.pipeline = FeaturePipeline::fit(train, config.pipeline);
  std::vector<PreparedPatient> train_prepared;
  train_prepared.reserve(train.size());
  for (const auto& r : train) train_prepared.push_back(result.pipeline.prepare(r));

  for (Variant variant : {Variant::standard, Variant::auto_regressive}) {
    const ModelKind population_kind = variant == Variant::standard ? ModelKind::gp : ModelKind::gp_ar;
    const ModelKind personal_kind = variant == Variant::standard ? ModelKind::pgp : ModelKind::pgp_ar;
    const bool want_population = wants(config, population_kind);
    const bool want_personal = wants(config, personal_kind);
    if (!want_population && !want_personal) continue;

    PairOptions options;
    options.variant = variant;
    options.ar_include_cs = config.ar_include_cs;
    TrainingSet set = build_pairs(train_prepared, options);
    for (auto& w : set.warnings) result.warnings.push_back(w);

    FitConfig fit_config;
    fit_config.restarts = config.restarts;
    fit_config.max_iterations = config.max_iterations;
    fit_config.seed = derive_seed(config.seed, fold, variant);
    const PopulationModel& model =
        result.models.insert_or_assign(variant, fit(std::move(set), fit_config)).first->second;

    FitSummary summary;
    summary.fold = fold;
    summary.variant = variant;
    summary.params = model.params();
    summary.nlml = model.fit_report().nlml;
    summary.jitter = model.jitter();
    summary.rows = model.training_set().rows();
    summary.input_dim = model.input_dim();
    summary.pca_components = result.pipeline.pca().retained;
    result.fits.push_back(summary);

    for (const PatientRecord* raw : test) {
      const PreparedPatient prepared = result.pipeline.prepare(*raw);
      const PatientPairs pairs = make_patient_pairs(prepared, options);
      const PatientRun run = run_patient(model, pairs);
      if (run.warning) {
        result.warnings.push_back(*run.warning);
        continue;
      }
      for (std::size_t t = 0; t < run.population.size(); ++t) {
        const Visit& next = raw->visits[t + 1];
        for (const auto& [kind, preds, wanted] :
             {std::tuple{population_kind, &run.population, want_population},
              std::tuple{personal_kind, &run.personalized, want_personal}}) {
          if (!wanted) continue;
          const Prediction& p = (*preds)[t];
          PredictionPoint point;
          point.patient_id = raw->patient_id;
          point.visit = raw->visits[t].visit_index;
          point.fold = fold;
          for (int k = 0; k < kNumTargets; ++k) {
            point.pred(k) = result.pipeline.target_to_clinical(p.mean(k), k);
            point.truth(k) = next.targets(k);
            point.observed[static_cast<std::size_t>(k)] = next.target_present(k);
          }
          point.variance = p.variance(0);
          result.points[kind].push_back(point);
        }
      }
    }
  }
  return result;
}

FoldMetrics fold_metrics(const std::vector<PredictionPoint>& points) {
  FoldMetrics m;
  m.predictions = points.size();
  std::vector<int> pred_labels;
  std::vector<int> true_labels;
  for (int k = 0; k < kNumTargets; ++k) {
    std::vector<double> pred;
    std::vector<double> truth;
    for (const auto& p : points) {
      if (!p.observed[static_cast<std::size_t>(k)]) continue;
      pred.push_back(p.pred(k));
      truth.push_back(p.truth(k));
      if (k == kCsIndex) {
        pred_labels.push_back(cs_discretize(p.pred(k)));
        true_labels.push_back(static_cast<int>(p.truth(k)));
      }
    }
    const auto ku = static_cast<std::size_t>(k);
    m.mae[ku] = pred.empty() ? std::nan("") : mae(pred, truth);
    if (pred.size() >= 2) {
      const IccResult icc = icc31(pred, truth);
      m.icc[ku] = icc.value;
      m.icc_defined[ku] = icc.defined;
    } else {
      m.icc[ku] = std::nan("");
      m.icc_defined[ku] = false;
    }
  }
  m.accuracy = accuracy(confusion(pred_labels, true_labels));
  return m;
}

std::vector<PatientErrors> patient_errors(const std::vector<PredictionPoint>& baseline,
                                          const std::vector<PredictionPoint>& candidate) {
  if (baseline.size() != candidate.size()) {
    throw InputError("patient_errors: models were evaluated on different prediction sets");
  }
  std::vector<PatientErrors> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    const auto& b = baseline[i];
    const auto& c = candidate[i];
    if (b.patient_id != c.patient_id || b.visit != c.visit) {
      throw InputError("patient_errors: prediction points do not line up");
    }
    auto [it, inserted] = index.try_emplace(b.patient_id, out.size());
    if (inserted) out.push_back(PatientErrors{b.patient_id, {}, {}});
    auto& pe = out[it->second];
    for (int k = 0; k < kNumTargets; ++k) {
      if (!b.observed[static_cast<std::size_t>(k)]) continue;
      pe.baseline[static_cast<std::size_t>(k)].push_back(std::abs(b.pred(k) - b.truth(k)));
      pe.candidate[static_cast<std::size_t>(k)].push_back(std::abs(c.pred(k) - c.truth(k)));
    }
  }
  return out;
}

CvResult run_cross_validation(const std::vector<PatientRecord>& records, const CvConfig& config) {
  if (config.models.empty()) throw InputError("no model variants requested");
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.patient_id);

  CvResult result;
  result.config = config;
  result.plan = make_folds(ids, config.folds, config.seed);

  std::vector<FoldResult> folds(static_cast<std::size_t>(config.folds));
  std::vector<std::exception_ptr> errors(folds.size());
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (int f = next++; f < config.folds; f = next++) {
      try {
        folds[static_cast<std::size_t>(f)] = evaluate_fold(records, result.plan, f, config);
      } catch (...) {
        errors[static_cast<std::size_t>(f)] = std::current_exception();
      }
    }
  };
  const int jobs = std::clamp(config.jobs, 1, config.folds);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (const auto& fr : folds) {
    for (const auto& s : fr.fits) result.fits.push_back(s);
    for (const auto& w : fr.warnings) result.warnings.push_back("fold " + std::to_string(fr.fold) + ": " + w);
  }
  if (config.keep_models) result.folds = folds;

  for (ModelKind kind : kAllModels) {
    if (!wants(config, kind)) continue;
    ModelResult mr;
    mr.kind = kind;
    std::array<std::vector<double>, kNumTargets> maes;
    std::array<std::vector<double>, kNumTargets> iccs;
    std::vector<double> accs;
    std::vector<int> pred_labels;
    std::vector<int> true_labels;
    for (const auto& fr : folds) {
      const auto it = fr.points.find(kind);
      const std::vector<PredictionPoint> empty;
      const auto& pts = it == fr.points.end() ? empty : it->second;
      mr.points.insert(mr.points.end(), pts.begin(), pts.end());
      const FoldMetrics fm = fold_metrics(pts);
      mr.per_fold.push_back(fm);
      for (std::size_t k = 0; k < kNumTargets; ++k) {
        maes[k].push_back(fm.mae[k]);
        if (fm.icc_defined[k]) iccs[k].push_back(fm.icc[k]);
      }
      accs.push_back(fm.accuracy);
      for (const auto& p : pts) {
        if (!p.observed[kCsIndex]) continue;
        pred_labels.push_back(cs_discretize(p.pred(kCsIndex)));
        true_labels.push_back(static_cast<int>(p.truth(kCsIndex)));
      }
    }
    for (std::size_t k = 0; k < kNumTargets; ++k) {
      mr.mae[k] = mean_sd(finite_only(maes[k]));
      mr.icc[k] = mean_sd(finite_only(iccs[k]));
    }
    mr.accuracy = mean_sd(finite_only(accs));
    mr.confusion = confusion(pred_labels, true_labels);
    result.models.push_back(std::move(mr));
  }

  const std::array<std::pair<ModelKind, ModelKind>, 4> pairs = {
      std::pair{ModelKind::gp_ar, ModelKind::gp}, std::pair{ModelKind::pgp, ModelKind::gp},
      std::pair{ModelKind::pgp_ar, ModelKind::gp_ar}, std::pair{ModelKind::pgp_ar, ModelKind::pgp}};
  for (const auto& [candidate, baseline] : pairs) {
    if (!wants(config, candidate) || !wants(config, baseline)) continue;
    const ModelResult& c = result.model(candidate);
    const ModelResult& b = result.model(baseline);
    Comparison cmp;
    cmp.candidate = candidate;
    cmp.baseline = baseline;
    for (std::size_t k = 0; k < kNumTargets; ++k) {
      std::vector<double> cv;
      std::vector<double> bv;
      for (std::size_t f = 0; f < c.per_fold.size(); ++f) {
        if (std::isfinite(c.per_fold[f].mae[k]) && std::isfinite(b.per_fold[f].mae[k])) {
          cv.push_back(c.per_fold[f].mae[k]);
          bv.push_back(b.per_fold[f].mae[k]);
        }
      }
      if (cv.size() >= 2) cmp.mae_test[k] = paired_t_test(cv, bv);
    }
    std::vector<double> ca;
    std::vector<double> ba;
    for (std::size_t f = 0; f < c.per_fold.size(); ++f) {
      if (std::isfinite(c.per_fold[f].accuracy) && std::isfinite(b.per_fold[f].accuracy)) {
        ca.push_back(c.per_fold[f].accuracy);
        ba.push_back(b.per_fold[f].accuracy);
      }
    }
    if (ca.size() >= 2) cmp.accuracy_test = paired_t_test(ca, ba);
    cmp.per_patient = per_patient_report(patient_errors(b.points, c.points));
    result.comparisons.push_back(std::move(cmp));
  }
  return result;
}

}  // namespace pgp
