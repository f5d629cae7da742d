#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fedsim/detmetrics.hpp"
#include "fedsim/fedavg.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/wire.hpp"

namespace py = pybind11;
using namespace fedsim;

PYBIND11_MODULE(_fedsim, m) {
    m.doc() = "Federated-averaging simulator and detection-metrics toolkit";

    // model core
    py::class_<TensorSpec>(m, "TensorSpec")
        .def(py::init<std::string, std::vector<std::size_t>>(), py::arg("name"), py::arg("shape"))
        .def_readwrite("name", &TensorSpec::name)
        .def_readwrite("shape", &TensorSpec::shape);

    py::class_<ParamVector>(m, "ParamVector")
        .def(py::init<>())
        .def_readwrite("layout", &ParamVector::layout)
        .def_readwrite("values", &ParamVector::values)
        .def("__eq__", [](const ParamVector& a, const ParamVector& b) { return a == b; })
        .def("__len__", [](const ParamVector& p) { return p.values.size(); });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<std::size_t, std::size_t, double, std::uint64_t>(), py::arg("local_epochs"),
             py::arg("batch_size"), py::arg("learning_rate"), py::arg("seed"))
        .def_readwrite("local_epochs", &TrainConfig::local_epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("seed", &TrainConfig::seed);

    py::class_<LabeledDataset>(m, "LabeledDataset")
        .def(py::init<>())
        .def_readwrite("features", &LabeledDataset::features)
        .def_readwrite("labels", &LabeledDataset::labels)
        .def_readwrite("feature_dim", &LabeledDataset::feature_dim)
        .def_readwrite("num_classes", &LabeledDataset::num_classes)
        .def("__len__", [](const LabeledDataset& d) { return d.size(); });

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("params", &TrainResult::params)
        .def_readonly("final_loss", &TrainResult::final_loss);

    m.def("classifier_layout", &classifier_layout, py::arg("feature_dim"), py::arg("num_classes"));
    m.def("init_params", &init_params, py::arg("layout"), py::arg("seed"));
    m.def("zeros_like", &zeros_like, py::arg("layout"));
    m.def("loss", &loss, py::arg("params"), py::arg("data"));
    m.def("loss_gradient", &loss_gradient, py::arg("params"), py::arg("data"));
    m.def("local_train", &local_train, py::arg("start"), py::arg("data"), py::arg("config"),
          py::arg("epoch_offset") = 0);
    m.def("evaluate_accuracy", &evaluate_accuracy, py::arg("params"), py::arg("data"));

    // partitioning
    py::enum_<PartitionMode>(m, "PartitionMode")
        .value("iid", PartitionMode::iid)
        .value("label_skew", PartitionMode::label_skew);

    py::class_<Shard>(m, "Shard")
        .def_readonly("client_id", &Shard::client_id)
        .def_readonly("indices", &Shard::indices);

    m.def("default_class_weights", &default_class_weights);
    m.def("synth_dataset", &synth_dataset, py::arg("n"), py::arg("num_classes"),
          py::arg("class_weights"), py::arg("seed"));
    m.def("partition_iid", &partition_iid, py::arg("data"), py::arg("clients"), py::arg("seed"));
    m.def("partition_label_skew", &partition_label_skew, py::arg("data"), py::arg("clients"),
          py::arg("shards_per_client"), py::arg("seed"));
    m.def("shard_stats", &shard_stats, py::arg("data"), py::arg("shards"));
    m.def("subset", &subset, py::arg("data"), py::arg("indices"));

    // federated averaging
    py::class_<ClientUpdate>(m, "ClientUpdate")
        .def(py::init<>())
        .def(py::init([](std::uint64_t id, std::uint64_t n, ParamVector p, double metric) {
                 return ClientUpdate{id, n, std::move(p), metric};
             }),
             py::arg("client_id"), py::arg("sample_count"), py::arg("params"),
             py::arg("local_metric") = 0.0)
        .def_readwrite("client_id", &ClientUpdate::client_id)
        .def_readwrite("sample_count", &ClientUpdate::sample_count)
        .def_readwrite("params", &ClientUpdate::params)
        .def_readwrite("local_metric", &ClientUpdate::local_metric);

    py::class_<GlobalModel>(m, "GlobalModel")
        .def_readonly("round", &GlobalModel::round)
        .def_readonly("params", &GlobalModel::params)
        .def_readonly("metric", &GlobalModel::metric);

    py::class_<RoundReport>(m, "RoundReport")
        .def_readonly("round", &RoundReport::round)
        .def_readonly("global_metric", &RoundReport::global_metric)
        .def_readonly("per_client_metrics", &RoundReport::per_client_metrics)
        .def_readonly("reached_target", &RoundReport::reached_target);

    py::class_<ClientState>(m, "ClientState")
        .def(py::init([](std::uint64_t id, LabeledDataset data, TrainConfig config) {
                 return ClientState{id, std::move(data), config};
             }),
             py::arg("client_id"), py::arg("data"), py::arg("config"))
        .def_readwrite("client_id", &ClientState::client_id)
        .def_readwrite("data", &ClientState::data)
        .def_readwrite("config", &ClientState::config);

    py::class_<RunResult>(m, "RunResult")
        .def_readonly("reports", &RunResult::reports)
        .def_readonly("final_model", &RunResult::final_model)
        .def_readonly("reached_target", &RunResult::reached_target)
        .def("rounds_completed", &RunResult::rounds_completed);

    m.def("aggregate", &aggregate, py::arg("updates"));
    m.def("run_until_target", &run_until_target, py::arg("clients"), py::arg("eval_set"),
          py::arg("initial"), py::arg("target_metric"), py::arg("max_rounds"));

    // experiment harness
    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("clients", &ExperimentConfig::clients)
        .def_readwrite("local_epochs", &ExperimentConfig::local_epochs)
        .def_readwrite("batch_size", &ExperimentConfig::batch_size)
        .def_readwrite("learning_rate", &ExperimentConfig::learning_rate)
        .def_readwrite("target_metric", &ExperimentConfig::target_metric)
        .def_readwrite("max_rounds", &ExperimentConfig::max_rounds)
        .def_readwrite("partition", &ExperimentConfig::partition)
        .def_readwrite("shards_per_client", &ExperimentConfig::shards_per_client)
        .def_readwrite("dataset_size", &ExperimentConfig::dataset_size)
        .def_readwrite("num_classes", &ExperimentConfig::num_classes)
        .def_readwrite("eval_size", &ExperimentConfig::eval_size)
        .def_readwrite("seed", &ExperimentConfig::seed);

    py::class_<SweepRow>(m, "SweepRow")
        .def_readonly("local_epochs", &SweepRow::local_epochs)
        .def_readonly("rounds", &SweepRow::rounds)
        .def_readonly("reached_target", &SweepRow::reached_target);

    m.def("simulate", &simulate, py::arg("config"));
    m.def("sweep_local_epochs", &sweep_local_epochs, py::arg("config"), py::arg("e_values"));
    m.def("round_reports_csv", &round_reports_csv, py::arg("reports"));
    m.def("sweep_csv", &sweep_csv, py::arg("rows"), py::arg("model_name") = kModelName);

    // detection metrics
    py::class_<Box>(m, "Box")
        .def(py::init<>())
        .def(py::init([](int cls, double cx, double cy, double w, double h) {
                 return Box{cls, cx, cy, w, h};
             }),
             py::arg("class_id"), py::arg("cx"), py::arg("cy"), py::arg("w"), py::arg("h"))
        .def_readwrite("class_id", &Box::class_id)
        .def_readwrite("cx", &Box::cx)
        .def_readwrite("cy", &Box::cy)
        .def_readwrite("w", &Box::w)
        .def_readwrite("h", &Box::h);

    py::class_<Detection>(m, "Detection")
        .def(py::init<>())
        .def(py::init([](Box box, double confidence) { return Detection{box, confidence}; }),
             py::arg("box"), py::arg("confidence"))
        .def_readwrite("box", &Detection::box)
        .def_readwrite("confidence", &Detection::confidence);

    py::class_<Scene>(m, "Scene")
        .def(py::init<>())
        .def(py::init([](std::vector<Detection> preds, std::vector<Box> gts) {
                 return Scene{std::move(preds), std::move(gts)};
             }),
             py::arg("preds"), py::arg("gts"))
        .def_readwrite("preds", &Scene::preds)
        .def_readwrite("gts", &Scene::gts);

    py::class_<ClassCounts>(m, "ClassCounts")
        .def_readonly("num_gt", &ClassCounts::num_gt)
        .def_readonly("tp", &ClassCounts::tp)
        .def_readonly("fp", &ClassCounts::fp)
        .def("fn", &ClassCounts::fn);

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("per_class_ap", &EvalReport::per_class_ap)
        .def_readonly("counts", &EvalReport::counts)
        .def_readonly("map", &EvalReport::map)
        .def_readonly("precision", &EvalReport::precision)
        .def_readonly("recall", &EvalReport::recall)
        .def_readonly("f1", &EvalReport::f1)
        .def_readonly("macro_f1", &EvalReport::macro_f1);

    m.def("iou", &iou, py::arg("a"), py::arg("b"));
    m.def("nms", &nms, py::arg("detections"), py::arg("iou_threshold"));
    m.def("average_precision", &average_precision, py::arg("flags"), py::arg("num_gt"));
    m.def("mean_average_precision", &mean_average_precision, py::arg("per_class_ap"));
    m.def("f1_score", &f1_score, py::arg("precision"), py::arg("recall"));
    m.def("parse_yolo_ground_truth", &parse_yolo_ground_truth, py::arg("text"));
    m.def("parse_yolo_predictions", &parse_yolo_predictions, py::arg("text"));
    m.def("format_yolo_ground_truth", &format_yolo_ground_truth, py::arg("boxes"));
    m.def("format_yolo_predictions", &format_yolo_predictions, py::arg("detections"));
    m.def("evaluate_scenes", &evaluate_scenes, py::arg("scenes"), py::arg("iou_threshold"),
          py::arg("apply_nms") = false, py::arg("nms_threshold") = 0.5);
    m.def("evaluate", &evaluate, py::arg("pred_dir"), py::arg("gt_dir"), py::arg("iou_threshold"),
          py::arg("apply_nms") = false, py::arg("nms_threshold") = 0.5);
    m.def("report_csv", &report_csv, py::arg("report"));
    m.def("report_table", &report_table, py::arg("report"));

    // wire format
    py::enum_<Dtype>(m, "Dtype").value("f32", Dtype::f32).value("f64", Dtype::f64);

    m.def(
        "encode_params",
        [](const ParamVector& p, Dtype dtype) {
            auto bytes = encode_params(p, dtype);
            return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        },
        py::arg("params"), py::arg("dtype") = Dtype::f64);
    m.def(
        "decode_params",
        [](const py::bytes& raw) {
            std::string view = raw;
            return decode_params(std::span<const std::uint8_t>(
                reinterpret_cast<const std::uint8_t*>(view.data()), view.size()));
        },
        py::arg("data"));
}
