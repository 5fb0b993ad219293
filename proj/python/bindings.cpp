#include <pybind11/eigen.h>
#include <pybind11/iostream.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "gola/cli.hpp"
#include "gola/container.hpp"
#include "gola/metrics.hpp"
#include "gola/orth.hpp"
#include "gola/partition.hpp"
#include "gola/train.hpp"

namespace py = pybind11;
using namespace gola;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

BBoxSequence to_sequence(const RowMatrix& pred, const RowMatrix& truth) {
    if (pred.cols() != 4 || truth.cols() != 4 || pred.rows() != truth.rows()) {
        throw ShapeError("box arrays must both be N x 4 (x, y, w, h)");
    }
    std::vector<FramePair> frames;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        frames.push_back({{pred(i, 0), pred(i, 1), pred(i, 2), pred(i, 3)},
                          {truth(i, 0), truth(i, 1), truth(i, 2), truth(i, 3)}});
    }
    return BBoxSequence(std::move(frames));
}

BBox to_box(const std::array<double, 4>& b) {
    BBox box{b[0], b[1], b[2], b[3]};
    validate_box(box);
    return box;
}

Factor to_factor(const std::string& name) {
    if (name == "A") {
        return Factor::A;
    }
    if (name == "B") {
        return Factor::B;
    }
    throw ParameterError("factor must be 'A' or 'B', got '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_gola, m) {
    m.doc() = "Group-orthogonal low-rank adaptation: partitioning, orthogonality penalty, metrics.";

    auto base = py::register_exception<Error>(m, "GolaError", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    py::class_<AdapterPair>(m, "AdapterPair")
        .def(py::init<Matrix, Matrix, Matrix, double>(), py::arg("W"), py::arg("A"), py::arg("B"),
             py::arg("scale") = 1.0)
        .def_property_readonly("W", &AdapterPair::W)
        .def_property_readonly("A", &AdapterPair::A)
        .def_property_readonly("B", &AdapterPair::B)
        .def_property_readonly("scale", &AdapterPair::scale)
        .def_property_readonly("rank", &AdapterPair::rank)
        .def("exceeds_low_rank_regime", &AdapterPair::exceeds_low_rank_regime);

    m.def("forward", [](const AdapterPair& a, const Matrix& h) { return forward(a, h); }, py::arg("adapter"),
          py::arg("batch"), "W h + scale * B A h for each column of `batch`.");
    m.def("merge", [](const AdapterPair& a) { return merge(a); });
    m.def("effective_update", [](const AdapterPair& a) { return effective_update(a); });
    m.def("apply_permutation", [](const AdapterPair& a, const Permutation& p) { return apply_permutation(a, p); });

    py::class_<ImportanceScores>(m, "ImportanceScores")
        .def_readonly("scores", &ImportanceScores::scores)
        .def_readonly("topk", &ImportanceScores::topk)
        .def_readonly("degenerate", &ImportanceScores::degenerate);

    py::class_<RankPartition>(m, "RankPartition")
        .def_readonly("sigma", &RankPartition::sigma)
        .def_readonly("k", &RankPartition::k)
        .def_readonly("n", &RankPartition::n)
        .def_readonly("groups", &RankPartition::groups)
        .def_readonly("seed", &RankPartition::seed)
        .def_readonly("degenerate", &RankPartition::degenerate)
        .def("__eq__", [](const RankPartition& a, const RankPartition& b) { return a == b; });

    py::class_<GroupedAdapter>(m, "GroupedAdapter")
        .def_property_readonly("adapter", &GroupedAdapter::adapter)
        .def_property_readonly("partition", &GroupedAdapter::partition)
        .def_property_readonly("frozen_mask", &GroupedAdapter::frozen_mask)
        .def("group_rows_A", &GroupedAdapter::group_rows_A)
        .def("group_cols_B", &GroupedAdapter::group_cols_B);

    m.def("center_columns", &center_columns);
    m.def("rank_importance", &rank_importance, py::arg("B"), py::arg("k"));
    m.def("sort_ranks", &sort_ranks);
    m.def("split_crucial", &split_crucial, py::arg("adapter"), py::arg("sigma"), py::arg("k"));
    m.def("cluster_groups", &cluster_groups, py::arg("points"), py::arg("n"), py::arg("seed"));
    m.def("partition", &partition, py::arg("adapter"), py::arg("k") = 16, py::arg("n") = 8, py::arg("seed") = 0);

    m.def("orth_loss", [](const GroupedAdapter& g, std::size_t i, std::size_t j) { return orth_loss(g, {i, j}); });
    m.def("orth_loss_grad", [](const GroupedAdapter& g, std::size_t i, std::size_t j) {
        const OrthGradient grad = orth_loss_grad(g, {i, j});
        py::dict out;
        out["A_i"] = grad.A_i;
        out["A_j"] = grad.A_j;
        out["B_i"] = grad.B_i;
        out["B_j"] = grad.B_j;
        return out;
    });
    m.def("orth_heatmap", [](const GroupedAdapter& g, const std::string& factor) {
        return orth_heatmap(g, to_factor(factor)).values;
    }, py::arg("grouped"), py::arg("factor") = "B");
    m.def("singular_spectrum", &singular_spectrum);

    py::class_<std::mt19937_64>(m, "Rng").def(py::init<std::uint64_t>(), py::arg("seed"));
    m.def("sample_pair", [](std::size_t n, std::mt19937_64& rng) {
        const GroupPair p = sample_pair(n, rng);
        return std::make_pair(p.i, p.j);
    });

    m.def("center_error", [](std::array<double, 4> p, std::array<double, 4> g) {
        return center_error(to_box(p), to_box(g));
    });
    m.def("iou", [](std::array<double, 4> p, std::array<double, 4> g) { return iou(to_box(p), to_box(g)); });
    m.def("precision_rate", [](const RowMatrix& pred, const RowMatrix& truth, double xi) {
        return precision_rate(to_sequence(pred, truth), xi);
    }, py::arg("pred"), py::arg("truth"), py::arg("xi_pr") = 20.0);
    m.def("success_rate", [](const RowMatrix& pred, const RowMatrix& truth, double xi) {
        return success_rate(to_sequence(pred, truth), xi);
    });
    m.def("success_auc", [](const RowMatrix& pred, const RowMatrix& truth) {
        return success_auc(to_sequence(pred, truth));
    });
    m.def("mpr", [](const RowMatrix& pv, const RowMatrix& gv, const RowMatrix& pt, const RowMatrix& gt, double xi) {
        return mpr(ModalPair(to_sequence(pv, gv), to_sequence(pt, gt)), xi);
    });
    m.def("msr", [](const RowMatrix& pv, const RowMatrix& gv, const RowMatrix& pt, const RowMatrix& gt, double xi) {
        return msr(ModalPair(to_sequence(pv, gv), to_sequence(pt, gt)), xi);
    });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("lambda_", &TrainConfig::lambda)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("steps", &TrainConfig::steps)
        .def_readwrite("batch", &TrainConfig::batch)
        .def_readwrite("rank", &TrainConfig::rank)
        .def_readwrite("k", &TrainConfig::k)
        .def_readwrite("n", &TrainConfig::n)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("pairs_per_step", &TrainConfig::pairs_per_step)
        .def_readwrite("tau", &TrainConfig::tau)
        .def_readwrite("momentum", &TrainConfig::momentum);

    py::class_<SyntheticTask>(m, "SyntheticTask")
        .def_readonly("channels", &SyntheticTask::channels)
        .def_readonly("W0", &SyntheticTask::W0)
        .def_property_readonly("modes", [](const SyntheticTask& t) { return t.modes.size(); });

    py::class_<TrainReport>(m, "TrainReport")
        .def_readonly("final_task_loss", &TrainReport::final_task_loss)
        .def_readonly("final_orth_loss", &TrainReport::final_orth_loss)
        .def_readonly("task_trace", &TrainReport::task_trace)
        .def_readonly("orth_trace", &TrainReport::orth_trace)
        .def_readonly("total_trace", &TrainReport::total_trace)
        .def_readonly("gram_mass_trace", &TrainReport::gram_mass_trace)
        .def_readonly("initial_heatmap_mass", &TrainReport::initial_heatmap_mass)
        .def_readonly("final_heatmap_mass", &TrainReport::final_heatmap_mass)
        .def_readonly("frozen_checksum_before", &TrainReport::frozen_checksum_before)
        .def_readonly("frozen_checksum_after", &TrainReport::frozen_checksum_after)
        .def_readonly("partition", &TrainReport::partition)
        .def_readonly("A", &TrainReport::A)
        .def_readonly("B", &TrainReport::B);

    m.def("make_synthetic_task", &make_synthetic_task, py::arg("channels"), py::arg("modes"), py::arg("seed"));
    m.def("train", &train, py::arg("task"), py::arg("cfg"), py::call_guard<py::gil_scoped_release>());
    m.def("confidence_gate", &confidence_gate, py::arg("conf"), py::arg("tau") = 0.84);

    m.def("write_adapter", [](const std::filesystem::path& path, const AdapterPair& a, const std::string& layer) {
        write_container(path, adapter_to_container(a, layer));
    }, py::arg("path"), py::arg("adapter"), py::arg("layer_name") = "layer");
    m.def("read_adapter", [](const std::filesystem::path& path) { return adapter_from_container(read_container(path)); });

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        std::vector<std::string> argv{"gola"};
        argv.insert(argv.end(), args.begin(), args.end());
        const int code = cli::run(argv, out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, "Runs a gola subcommand in-process; returns (exit_code, stdout, stderr).");
}
