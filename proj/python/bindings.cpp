#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "aerialmpt/checkpoint.hpp"
#include "aerialmpt/cli.hpp"
#include "aerialmpt/config.hpp"
#include "aerialmpt/dataset_io.hpp"
#include "aerialmpt/error.hpp"
#include "aerialmpt/model.hpp"
#include "aerialmpt/mot_metrics.hpp"
#include "aerialmpt/synth.hpp"
#include "aerialmpt/track_engine.hpp"

namespace py = pybind11;
using namespace aerialmpt;

namespace {

using BoxRow = std::tuple<int, int, double, double, double, double>;

std::vector<Hypothesis> to_hyps(const std::vector<BoxRow>& rows) {
  std::vector<Hypothesis> out;
  out.reserve(rows.size());
  for (const auto& [f, id, x1, y1, x2, y2] : rows) out.push_back({f, id, {x1, y1, x2, y2}});
  return out;
}

std::vector<BoxRow> from_hyps(const std::vector<Hypothesis>& hyps) {
  std::vector<BoxRow> out;
  out.reserve(hyps.size());
  for (const auto& h : hyps) out.emplace_back(h.frame, h.track_id, h.box.x1, h.box.y1, h.box.x2, h.box.y2);
  return out;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  for (const auto& c : report_columns()) {
    const auto v = format_value(r, c, true);
    if (c == "GT" || c == "MT" || c == "PT" || c == "ML" || c == "FP" || c == "FN" || c == "ID" || c == "FM") {
      d[py::str(c)] = std::stol(v);
    } else {
      d[py::str(c)] = v == "nan" ? py::object(py::none()) : py::object(py::float_(std::stod(v)));
    }
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Aerial multi-pedestrian tracking core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  m.def("iou", [](std::array<double, 4> a, std::array<double, 4> b) {
    return iou({a[0], a[1], a[2], a[3]}, {b[0], b[1], b[2], b[3]});
  });
  m.def(
      "point_to_box",
      [](double x, double y, double gsd, double extent, double min_side) {
        const auto b = point_to_box(x, y, gsd, extent, min_side);
        return std::make_tuple(b.x1, b.y1, b.x2, b.y2);
      },
      py::arg("x"), py::arg("y"), py::arg("gsd"), py::arg("person_extent_m") = kDefaultPersonExtentM,
      py::arg("min_side") = kDefaultMinBoxSide);

  m.def(
      "synthesize",
      [](const std::filesystem::path& out, const std::string& motion, int n_agents, int n_frames, int width, int height,
         std::uint64_t seed, double speed_min, double speed_max) {
        SynthConfig c;
        c.name = out.filename().string();
        c.motion = parse_motion_model(motion);
        c.n_agents = n_agents;
        c.n_frames = n_frames;
        c.width = width;
        c.height = height;
        c.seed = seed;
        c.speed_min = speed_min;
        c.speed_max = speed_max;
        generate(c, out);
      },
      py::arg("out"), py::arg("motion") = "linear", py::arg("n_agents") = 8, py::arg("n_frames") = 10,
      py::arg("width") = 128, py::arg("height") = 128, py::arg("seed") = 1, py::arg("speed_min") = 1.0,
      py::arg("speed_max") = 3.0, "Writes one synthetic sequence directory.");

  m.def(
      "load_annotations",
      [](const std::filesystem::path& dir) {
        const auto seq = load_sequence(dir, {.load_images = false});
        std::vector<std::tuple<int, int, double, double>> out;
        for (const auto& a : seq.annotations()) out.emplace_back(a.frame_index, a.track_id, a.x, a.y);
        py::dict meta;
        meta["name"] = seq.meta().name;
        meta["frame_count"] = seq.meta().frame_count;
        meta["gsd"] = seq.meta().gsd_m_per_px;
        meta["fps"] = seq.meta().fps;
        return py::make_tuple(meta, out);
      },
      py::arg("sequence_dir"), "Returns (meta dict, [(frame, id, x, y), ...]).");

  m.def(
      "ground_truth_boxes",
      [](const std::filesystem::path& dir) {
        return from_hyps(ground_truth_boxes(load_sequence(dir, {.load_images = false})));
      },
      py::arg("sequence_dir"));

  m.def(
      "evaluate",
      [](const std::vector<BoxRow>& gt, const std::vector<BoxRow>& hyp, double iou_threshold, int frame_count) {
        const auto g = to_hyps(gt), h = to_hyps(hyp);
        return report_dict(make_report(evaluate(g, h, {.iou_threshold = iou_threshold, .frame_count = frame_count})));
      },
      py::arg("gt"), py::arg("hyp"), py::arg("iou_threshold") = kDefaultIouThreshold, py::arg("frame_count") = -1,
      "Rows are (frame, id, x1, y1, x2, y2). Returns the metric columns as a dict.");
  m.def("report_columns", &report_columns);

  py::class_<Network>(m, "Network")
      .def(py::init([](const std::string& preset, std::uint64_t seed) {
             if (preset != "reduced" && preset != "production") throw ConfigError("preset must be reduced or production");
             return Network(preset == "reduced" ? NetworkConfig::reduced() : NetworkConfig::production(), seed);
           }),
           py::arg("preset") = "reduced", py::arg("seed") = 0)
      .def_static("load", &load_network, py::arg("path"))
      .def("save", [](const Network& n, const std::filesystem::path& p) { save_network(p, n); }, py::arg("path"))
      .def_property_readonly("parameter_count", [](const Network& n) { return n.params().scalar_count(); })
      .def_property_readonly("crop_size", [](const Network& n) { return n.config().crop_size; })
      .def_property_readonly("fusion_dim", [](const Network& n) { return n.config().fusion_dim(); })
      .def(
          "track",
          [](const Network& n, const std::filesystem::path& dir, const std::string& ablation) {
            TrackerConfig cfg;
            cfg.ablation = parse_ablation(ablation);
            const auto seq = load_sequence(dir);
            py::gil_scoped_release release;
            return from_hyps(track_sequence(seq, n, cfg).hypotheses);
          },
          py::arg("sequence_dir"), py::arg("ablation") = "full", "Tracks one sequence from its annotated births.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "aerialmpt");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line invocation in process; returns (exit code, stdout, stderr).");
}
