#include "pgp/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pgp/error.hpp"
#include "text_util.hpp"

namespace pgp {
namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kIccNote =
    "ICC(3,1) is the Shrout-Fleiss two-way mixed, single-measure consistency coefficient; "
    "it ignores a constant offset between prediction and truth, so it is not an absolute-agreement "
    "measure.";
constexpr const char* kCsNote =
    "CS accuracy discretizes the regression output by rounding half away from zero and clamping to "
    "{0,1,2}.";

Json mean_sd_json(const MeanSd& m) { return Json{{"mean", m.mean}, {"sd", m.sd}, {"count", m.count}}; }

Json t_test_json(const PairedTTest& t) {
  return Json{{"t", t.t}, {"p_value", t.p_value}, {"dof", t.dof}, {"mean_difference", t.mean_difference}};
}

Json per_target(const auto& fn) {
  Json j;
  for (int k = 0; k < kNumTargets; ++k) j[kTargetNames[static_cast<std::size_t>(k)]] = fn(k);
  return j;
}

std::string fixed(double v, int digits = 2) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double number(const nlohmann::ordered_json& j) {
  return j.is_number() ? j.get<double>() : std::nan("");
}

std::string cell(const nlohmann::ordered_json& ms) {
  return fixed(number(ms.at("mean"))) + " +/- " + fixed(number(ms.at("sd")));
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

}  // namespace

nlohmann::ordered_json metrics_document(const CvResult& result, const ConversionStats& conversions) {
  Json doc;
  doc["schema_version"] = kMetricsSchemaVersion;
  doc["targets"] = Json(std::vector<std::string>(kTargetNames.begin(), kTargetNames.end()));

  Json models = Json::array();
  for (const auto& m : result.models) {
    Json jm;
    jm["name"] = to_string(m.kind);
    jm["display"] = display_name(m.kind);
    jm["predictions"] = m.points.size();
    jm["mae"] = per_target([&](int k) { return mean_sd_json(m.mae[static_cast<std::size_t>(k)]); });
    jm["icc31"] = per_target([&](int k) { return mean_sd_json(m.icc[static_cast<std::size_t>(k)]); });
    jm["accuracy"] = mean_sd_json(m.accuracy);
    Json folds = Json::array();
    for (std::size_t f = 0; f < m.per_fold.size(); ++f) {
      const auto& fm = m.per_fold[f];
      Json jf;
      jf["fold"] = f;
      jf["predictions"] = fm.predictions;
      jf["mae"] = per_target([&](int k) { return fm.mae[static_cast<std::size_t>(k)]; });
      jf["icc31"] = per_target([&](int k) {
        return fm.icc_defined[static_cast<std::size_t>(k)] ? Json(fm.icc[static_cast<std::size_t>(k)]) : Json(nullptr);
      });
      jf["accuracy"] = fm.accuracy;
      folds.push_back(std::move(jf));
    }
    jm["per_fold"] = std::move(folds);
    Json cm = Json::array();
    for (const auto& row : m.confusion) cm.push_back(Json(std::vector<long>(row.begin(), row.end())));
    jm["confusion"] = std::move(cm);
    models.push_back(std::move(jm));
  }
  doc["models"] = std::move(models);

  Json comparisons = Json::array();
  for (const auto& c : result.comparisons) {
    Json jc;
    jc["candidate"] = to_string(c.candidate);
    jc["baseline"] = to_string(c.baseline);
    jc["mae_paired_t_test"] = per_target([&](int k) { return t_test_json(c.mae_test[static_cast<std::size_t>(k)]); });
    jc["accuracy_paired_t_test"] = t_test_json(c.accuracy_test);
    const double acc_c = result.model(c.candidate).accuracy.mean;
    const double acc_b = result.model(c.baseline).accuracy.mean;
    jc["accuracy_gain"] = Json{{"absolute", acc_c - acc_b},
                               {"relative", acc_b != 0.0 ? (acc_c - acc_b) / acc_b : std::nan("")}};
    jc["fraction_patients_improved"] =
        per_target([&](int k) { return c.per_patient.fraction_improved[static_cast<std::size_t>(k)]; });
    comparisons.push_back(std::move(jc));
  }
  doc["comparisons"] = std::move(comparisons);

  Json conv;
  Json counts;
  for (Transition t : kTransitions) counts[to_string(t)] = conversions.counts.at(t);
  conv["counts"] = std::move(counts);
  for (const auto& [name, deltas] : {std::pair{"CN->MCI", &conversions.cn_to_mci_delta},
                                     std::pair{"MCI->AD", &conversions.mci_to_ad_delta}}) {
    Json jd;
    for (std::size_t s = 0; s < 3; ++s) jd[kTargetNames[s]] = mean_sd_json((*deltas)[s]);
    conv["delta"][name] = std::move(jd);
  }
  doc["conversions"] = std::move(conv);

  Json folds;
  folds["k"] = result.plan.k;
  folds["seed"] = result.plan.seed;
  Json assignment;
  for (const auto& fold : result.plan.folds) {
    for (const auto& id : fold) assignment[id] = result.plan.assignment.at(id);
  }
  folds["assignment"] = std::move(assignment);
  doc["folds"] = std::move(folds);

  Json fits = Json::array();
  for (const auto& f : result.fits) {
    fits.push_back(Json{{"fold", f.fold},
                        {"variant", to_string(f.variant)},
                        {"signal_variance", f.params.signal_variance()},
                        {"lengthscale", f.params.lengthscale()},
                        {"noise_variance", f.params.noise_variance()},
                        {"nlml", f.nlml},
                        {"jitter", f.jitter},
                        {"rows", f.rows},
                        {"input_dim", f.input_dim},
                        {"pca_components", f.pca_components}});
  }
  doc["fits"] = std::move(fits);
  doc["warnings"] = result.warnings;
  doc["notes"] = Json::array({kIccNote, kCsNote});
  return doc;
}

std::string render_table(const nlohmann::ordered_json& doc) {
  std::ostringstream out;
  constexpr std::size_t w0 = 9;
  constexpr std::size_t w = 15;
  out << pad("Model", w0);
  for (const char* metric : {"MAE", "ICC(3,1)"}) {
    for (const char* t : kTargetNames) out << pad(std::string(metric) + " " + t, w);
  }
  out << "ACC CS\n";
  for (const auto& m : doc.at("models")) {
    out << pad(m.at("display").get<std::string>(), w0);
    for (const char* metric : {"mae", "icc31"}) {
      for (const char* t : kTargetNames) out << pad(cell(m.at(metric).at(t)), w);
    }
    out << cell(m.at("accuracy")) << '\n';
  }
  out << "\nmean +/- SD over folds\n";

  if (!doc.at("comparisons").empty()) {
    out << "\nPaired t-tests on per-fold MAE (p-values)\n";
    for (const auto& c : doc.at("comparisons")) {
      out << "  " << c.at("candidate").get<std::string>() << " vs " << c.at("baseline").get<std::string>()
          << ":";
      for (const char* t : kTargetNames) {
        out << ' ' << t << "=" << fixed(number(c.at("mae_paired_t_test").at(t).at("p_value")), 4);
      }
      out << "  ACC gain " << fixed(100.0 * number(c.at("accuracy_gain").at("absolute")), 1)
          << " points (" << fixed(100.0 * number(c.at("accuracy_gain").at("relative")), 1)
          << "% relative); patients improved:";
      for (const char* t : kTargetNames) {
        out << ' ' << t << "=" << fixed(number(c.at("fraction_patients_improved").at(t)), 2);
      }
      out << '\n';
    }
  }

  const auto& conv = doc.at("conversions");
  out << "\nClinical status conversions:";
  for (const auto& [name, count] : conv.at("counts").items()) out << ' ' << name << "=" << count.get<long>();
  out << '\n';
  for (const auto& [name, deltas] : conv.at("delta").items()) {
    out << "  delta at " << name << ':';
    for (const auto& [score, ms] : deltas.items()) out << ' ' << score << "=" << cell(ms);
    out << '\n';
  }

  out << '\n';
  for (const auto& note : doc.at("notes")) out << "Note: " << note.get<std::string>() << '\n';
  return out.str();
}

void write_reports(const std::filesystem::path& dir, const CvResult& result,
                   const ConversionStats& conversions) {
  std::filesystem::create_directories(dir);
  const Json doc = metrics_document(result, conversions);
  write_file(dir / "metrics.json", doc.dump(2) + "\n");
  write_file(dir / "metrics.txt", render_table(doc));

  for (const auto& m : result.models) {
    std::ostringstream cm;
    cm << "true,pred_CN,pred_MCI,pred_AD\n";
    constexpr std::array<const char*, 3> labels = {"CN", "MCI", "AD"};
    for (std::size_t i = 0; i < 3; ++i) {
      cm << labels[i];
      for (long v : m.confusion[i]) cm << ',' << v;
      cm << '\n';
    }
    write_file(dir / (std::string("confusion_") + to_string(m.kind) + ".csv"), cm.str());

    std::ostringstream pred;
    pred << "fold,patient_id,visit";
    for (const char* t : kTargetNames) pred << ",pred_" << t << ",true_" << t;
    pred << ",variance\n";
    for (const auto& p : m.points) {
      pred << p.fold << ',' << p.patient_id << ',' << p.visit;
      for (int k = 0; k < kNumTargets; ++k) {
        pred << ',' << text::format_double(p.pred(k)) << ','
             << (p.observed[static_cast<std::size_t>(k)] ? text::format_double(p.truth(k)) : "");
      }
      pred << ',' << text::format_double(p.variance) << '\n';
    }
    write_file(dir / (std::string("predictions_") + to_string(m.kind) + ".csv"), pred.str());
  }

  for (const auto& c : result.comparisons) {
    std::ostringstream pp;
    pp << "target,rank,patient_id," << to_string(c.baseline) << "_mae," << to_string(c.candidate)
       << "_mae,improvement\n";
    for (std::size_t k = 0; k < kNumTargets; ++k) {
      std::size_t rank = 0;
      for (const auto& row : c.per_patient.rows[k]) {
        pp << kTargetNames[k] << ',' << ++rank << ',' << row.patient_id << ','
           << text::format_double(row.baseline_mae) << ',' << text::format_double(row.candidate_mae)
           << ',' << text::format_double(row.improvement) << '\n';
      }
    }
    write_file(dir / (std::string("per_patient_") + to_string(c.candidate) + "_vs_" +
                      to_string(c.baseline) + ".csv"),
               pp.str());
  }

  std::ostringstream conv;
  conv << "transition,count\n";
  for (Transition t : kTransitions) conv << to_string(t) << ',' << conversions.counts.at(t) << '\n';
  write_file(dir / "conversions.csv", conv.str());
}

}  // namespace pgp
