#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mitosyn/classifier/loss.hpp"
#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"
#include "mitosyn/dataset/folds.hpp"
#include "mitosyn/dataset/mixing.hpp"
#include "mitosyn/generator/generator.hpp"
#include "mitosyn/metrics/metrics.hpp"
#include "mitosyn/orchestration/experiment.hpp"
#include "mitosyn/orchestration/report.hpp"
#include "mitosyn/toy/toy.hpp"

namespace py = pybind11;
using namespace mitosyn;

namespace {

metrics::ScoredSet scored(std::vector<double> probabilities, std::vector<int> labels) {
  return {std::move(probabilities), std::move(labels)};
}

py::dict report_dict(const metrics::MetricsReport& r) {
  py::dict d;
  for (const auto& name : metrics::metric_names()) d[py::str(name)] = metrics::metric_value(r, name);
  d["threshold"] = r.threshold;
  return d;
}

metrics::MetricsReport report_from(const py::dict& d) {
  metrics::MetricsReport r;
  r.auroc = d["auroc"].cast<double>();
  r.balanced_accuracy = d["balanced_accuracy"].cast<double>();
  if (d.contains("sensitivity")) r.sensitivity = d["sensitivity"].cast<double>();
  if (d.contains("specificity")) r.specificity = d["specificity"].cast<double>();
  if (d.contains("accuracy")) r.accuracy = d["accuracy"].cast<double>();
  return r;
}

metrics::SdConvention convention(const std::string& name) {
  if (name == "population") return metrics::SdConvention::population;
  if (name == "sample") return metrics::SdConvention::sample;
  throw ValidationError("convention must be population or sample");
}

}  // namespace

PYBIND11_MODULE(mitosyn, m) {
  m.doc() = "Synthetic balancing experiments for mitosis patch classification";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  // dataset
  py::class_<dataset::PatchRecord>(m, "PatchRecord")
      .def_readonly("id", &dataset::PatchRecord::id)
      .def_property_readonly("image_ref", [](const dataset::PatchRecord& r) { return r.image_ref.string(); })
      .def_readonly("label", &dataset::PatchRecord::label)
      .def_readonly("domain", &dataset::PatchRecord::domain)
      .def_property_readonly("provenance", [](const dataset::PatchRecord& r) { return std::string(dataset::to_string(r.provenance)); })
      .def_readonly("origin_fold", &dataset::PatchRecord::origin_fold);

  py::class_<dataset::Manifest>(m, "Manifest")
      .def_property_readonly("records", &dataset::Manifest::records)
      .def("__len__", &dataset::Manifest::size)
      .def("count_label", &dataset::Manifest::count_label, py::arg("label"))
      .def("count_provenance", [](const dataset::Manifest& mf, const std::string& p) {
        return mf.count_provenance(p == "synthetic" ? dataset::Provenance::synthetic : dataset::Provenance::real);
      }, py::arg("provenance"))
      .def("counts_consistent", &dataset::Manifest::counts_consistent);

  m.def("load_manifest", &dataset::load_manifest, py::arg("path"), "Read and validate a manifest CSV");

  py::class_<dataset::FoldPlan>(m, "FoldPlan")
      .def_property_readonly("k", &dataset::FoldPlan::k)
      .def_property_readonly("seed", &dataset::FoldPlan::seed)
      .def_property_readonly("entries", &dataset::FoldPlan::entries)
      .def("fold_of", &dataset::FoldPlan::fold_of, py::arg("id"))
      .def("ids_in_fold", &dataset::FoldPlan::ids_in_fold, py::arg("fold"))
      .def("__eq__", &dataset::FoldPlan::operator==);

  m.def("stratified_kfold", &dataset::stratified_kfold, py::arg("manifest"), py::arg("k") = 5, py::arg("seed") = 0);
  m.def("write_fold_plan", &dataset::write_fold_plan, py::arg("path"), py::arg("plan"));

  // metrics
  m.def("auroc", [](std::vector<double> p, std::vector<int> y) { return metrics::auroc(scored(std::move(p), std::move(y))); },
        py::arg("probabilities"), py::arg("labels"));
  m.def("evaluate", [](std::vector<double> p, std::vector<int> y, double threshold) {
    return report_dict(metrics::evaluate(scored(std::move(p), std::move(y)), threshold));
  }, py::arg("probabilities"), py::arg("labels"), py::arg("threshold") = 0.5, "Metrics in percent");
  m.def("balanced_accuracy", [](double sens, double spec) { return metrics::balanced_accuracy(sens, spec); },
        py::arg("sensitivity"), py::arg("specificity"));

  py::class_<metrics::FoldSummary>(m, "FoldSummary")
      .def_readonly("values", &metrics::FoldSummary::values)
      .def_readonly("mean", &metrics::FoldSummary::mean)
      .def_readonly("sd", &metrics::FoldSummary::sd)
      .def("consistent", &metrics::FoldSummary::consistent)
      .def("to_csv", &metrics::FoldSummary::to_csv)
      .def("__str__", &metrics::format_mean_sd);

  m.def("aggregate_folds", [](std::vector<double> values, const std::string& conv) {
    return metrics::aggregate_folds(values, convention(conv));
  }, py::arg("values"), py::arg("convention") = "population");
  m.def("format_mean_sd", &metrics::format_mean_sd, py::arg("summary"));
  m.def("format_fixed2", &metrics::format_fixed2, py::arg("value"));
  m.def("ensemble_average", &metrics::ensemble_average, py::arg("probability_lists"));
  m.def("select_submission", [](const std::vector<std::pair<std::string, py::dict>>& rows) {
    std::vector<std::pair<std::string, metrics::MetricsReport>> c;
    for (const auto& [name, d] : rows) c.emplace_back(name, report_from(d));
    return metrics::select_submission(c);
  }, py::arg("candidates"), "Candidates are (name, {'auroc':..., 'balanced_accuracy':...}) pairs");

  // classifier numerics
  m.def("sigmoid", &classifier::sigmoid, py::arg("logit"));
  m.def("bce_with_logits", &classifier::bce_with_logits, py::arg("logit"), py::arg("target"));
  m.def("bce_with_logits_grad", &classifier::bce_with_logits_grad, py::arg("logit"), py::arg("target"));
  m.def("cosine_restart_lr", &classifier::cosine_restart_lr, py::arg("epoch_position"), py::arg("base_lr"),
        py::arg("period") = 5.0, py::arg("floor_lr") = 0.0);

  // generator
  py::class_<generator::NoiseSchedule>(m, "NoiseSchedule")
      .def_readonly("beta", &generator::NoiseSchedule::beta)
      .def_readonly("alpha", &generator::NoiseSchedule::alpha)
      .def_readonly("alpha_bar", &generator::NoiseSchedule::alpha_bar)
      .def_property_readonly("steps", &generator::NoiseSchedule::steps)
      .def("valid", &generator::NoiseSchedule::valid);
  m.def("build_noise_schedule", &generator::build_noise_schedule, py::arg("steps"), py::arg("beta_start"),
        py::arg("beta_end"));
  m.def("forward_diffuse", &generator::forward_diffuse, py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("schedule"));
  m.def("pool_quota", [](std::size_t total, int folds) {
    generator::SynthPoolSpec spec;
    spec.folds = folds;
    return spec.quota(total);
  }, py::arg("total"), py::arg("folds") = 5);

  // toy data and orchestration
  m.def("make_toy_dataset", [](const std::filesystem::path& out, std::size_t count, double fraction, std::uint64_t seed) {
    return toy::make_toy_dataset(out, {count, fraction, 9, seed});
  }, py::arg("out_dir"), py::arg("count") = 500, py::arg("positive_fraction") = 0.15, py::arg("seed") = 2025);

  m.def("set_determinism", &orchestration::set_determinism, py::arg("seed"));

  m.def("run_experiment", [](const std::filesystem::path& config_path, std::optional<std::string> output_dir,
                             std::optional<std::uint64_t> seed) {
    const std::string text = read_file(config_path);
    KvConfig kv = KvConfig::parse(text);
    if (seed) kv.set("experiment.seed", std::to_string(*seed));
    auto config = orchestration::ExperimentConfig::from_kv(kv, config_path.parent_path());
    if (output_dir) config.output_dir = *output_dir;
    py::gil_scoped_release release;
    return orchestration::run_cv_experiment(config, text).summaries;
  }, py::arg("config_path"), py::arg("output_dir") = py::none(), py::arg("seed") = py::none(),
     "Runs a k-fold experiment and returns the per-metric fold summaries");

  m.def("load_run_summaries", [](const std::filesystem::path& dir) { return orchestration::RunArtifacts::load(dir).summaries; },
        py::arg("run_dir"));

  m.def("render_report", &orchestration::render_report, py::arg("rows"));

  m.def("package_submission", [](const std::vector<std::filesystem::path>& checkpoints, const std::filesystem::path& input_dir,
                                 double threshold, std::optional<std::filesystem::path> out) {
    std::vector<classifier::FoldCheckpoint> cks;
    for (const auto& p : checkpoints) cks.push_back(classifier::FoldCheckpoint::load(p));
    const auto result = orchestration::package_submission(cks, input_dir, threshold);
    if (out) orchestration::write_package(*out, result);
    std::vector<std::tuple<std::string, double, int>> rows;
    for (const auto& r : result.rows) rows.emplace_back(r.id, r.probability, r.label);
    return py::make_tuple(rows, result.errors);
  }, py::arg("checkpoints"), py::arg("input_dir"), py::arg("threshold") = 0.5, py::arg("out") = py::none(),
     "Returns (rows, errors); rows are (id, probability, label) sorted by id");
}
