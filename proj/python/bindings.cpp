#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pedfusion/calib.hpp"
#include "pedfusion/error.hpp"
#include "pedfusion/fusion.hpp"
#include "pedfusion/pipeline.hpp"
#include "pedfusion/sim.hpp"
#include "pedfusion/vision.hpp"

namespace py = pybind11;
using namespace pedfusion;

namespace {

using Image = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

GrayFrame to_frame(const Image& img, double t_s = 0.0) {
  if (img.ndim() != 2) throw Error(ErrorCode::kInvalidArgument, "expected a 2-D uint8 array");
  GrayFrame f(static_cast<int>(img.shape(1)), static_cast<int>(img.shape(0)), 0, t_s);
  std::copy(img.data(), img.data() + img.size(), f.pixels.begin());
  return f;
}

Image to_array(const GrayFrame& f) {
  Image out({f.height, f.width});
  std::copy(f.pixels.begin(), f.pixels.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Camera/lidar pedestrian distance fusion";

  py::register_exception<Error>(m, "PedfusionError", PyExc_RuntimeError);

  // calib
  py::class_<calib::DistancePoly>(m, "DistancePoly")
      .def_property_readonly("coeffs", &calib::DistancePoly::coeffs)
      .def_property_readonly("y_center", &calib::DistancePoly::y_center)
      .def_property_readonly("y_scale", &calib::DistancePoly::y_scale)
      .def_property_readonly("valid_y_range", &calib::DistancePoly::valid_y_range)
      .def("__call__", [](const calib::DistancePoly& p, double y) { return calib::eval_distance(p, y); });

  py::class_<calib::FitReport>(m, "FitReport")
      .def_readonly("sample_count", &calib::FitReport::sample_count)
      .def_readonly("max_abs_residual_m", &calib::FitReport::max_abs_residual_m)
      .def_readonly("rms_residual_m", &calib::FitReport::rms_residual_m);

  m.def(
      "fit_distance_poly",
      [](const std::vector<std::pair<double, double>>& samples) {
        std::vector<calib::PixelSample> s;
        for (const auto& [y, d] : samples) s.push_back({y, d});
        auto fit = calib::fit_distance_poly(s);
        return py::make_tuple(fit.poly, fit.report);
      },
      py::arg("samples"), "Fit the degree-8 row-to-distance polynomial to (y_px, distance_m) pairs.");
  m.def("eval_distance", &calib::eval_distance, py::arg("poly"), py::arg("y_px"));

  py::class_<calib::SpatialMap>(m, "SpatialMap").def_property_readonly("anchors", [](const calib::SpatialMap& s) {
    std::vector<std::pair<double, double>> out;
    for (const auto& a : s.anchors()) out.emplace_back(a.camera_m, a.lidar_m);
    return out;
  });
  m.def(
      "build_spatial_map",
      [](const std::vector<std::pair<double, double>>& pairs) {
        std::vector<calib::Anchor> a;
        for (const auto& [c, l] : pairs) a.push_back({c, l});
        return calib::build_spatial_map(std::move(a));
      },
      py::arg("pairs"));
  m.def("align_camera_to_lidar", &calib::align_camera_to_lidar, py::arg("map"), py::arg("camera_m"));

  // vision
  m.def(
      "mask_threshold",
      [](const Image& frame, const Image& mask, int threshold) {
        const auto f = to_frame(frame);
        const auto mk = to_frame(mask);
        vision::RoiMask roi = vision::full_roi(f.width, f.height);
        if (mk.width != f.width || mk.height != f.height) {
          throw Error(ErrorCode::kDimensionMismatch, "mask and frame sizes differ");
        }
        for (std::size_t i = 0; i < roi.raster.size(); ++i) roi.raster[i] = mk.pixels[i] ? 1 : 0;
        return to_array(vision::mask_threshold(f, roi, threshold));
      },
      py::arg("frame"), py::arg("mask"), py::arg("threshold"));
  m.def(
      "compute_roi",
      [](std::pair<double, double> far, std::pair<double, double> a, std::pair<double, double> b,
         int width, int height, double half_width) {
        const auto roi = vision::compute_roi({far.first, far.second}, {a.first, a.second},
                                             {b.first, b.second}, width, height, half_width);
        std::vector<std::pair<double, double>> poly;
        for (const auto& p : roi.polygon) poly.emplace_back(p.x, p.y);
        GrayFrame raster(width, height);
        raster.pixels = roi.raster;
        return py::make_tuple(poly, to_array(raster));
      },
      py::arg("far_point"), py::arg("near_a"), py::arg("near_b"), py::arg("width"), py::arg("height"),
      py::arg("half_width_px") = vision::kDefaultRoiHalfWidthPx,
      "Returns (polygon vertices, uint8 inclusion raster).");
  m.def(
      "min_eigen_scores",
      [](const Image& frame) {
        const auto f = to_frame(frame);
        const auto s = vision::min_eigen_scores(f);
        py::array_t<double> out({f.height, f.width});
        std::copy(s.begin(), s.end(), out.mutable_data());
        return out;
      },
      py::arg("frame"));
  m.def(
      "shi_tomasi",
      [](const Image& frame, int max_corners, double quality, double min_dist, bool subpixel) {
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& c :
             vision::shi_tomasi(to_frame(frame), {max_corners, quality, min_dist, subpixel})) {
          out.emplace_back(c.x, c.y, c.score);
        }
        return out;
      },
      py::arg("frame"), py::arg("max_corners") = 400, py::arg("quality") = 0.01,
      py::arg("min_dist_px") = 3.0, py::arg("subpixel") = false, "Corners as (x, y, score).");
  m.def(
      "lk_flow",
      [](const Image& prev, const Image& next, const std::vector<std::pair<double, double>>& pts,
         int window, int levels) {
        std::vector<vision::Corner> corners;
        for (const auto& [x, y] : pts) corners.push_back({x, y, 0.0});
        vision::LkParams params;
        params.window_px = window;
        params.pyramid_levels = levels;
        std::vector<std::tuple<double, double, bool>> out;
        for (const auto& f : vision::lk_flow(to_frame(prev), to_frame(next), corners, params)) {
          out.emplace_back(f.to.x, f.to.y, f.status == vision::FlowStatus::kTracked);
        }
        return out;
      },
      py::arg("prev"), py::arg("next"), py::arg("points"), py::arg("window_px") = 11,
      py::arg("pyramid_levels") = 2, "Tracked positions as (x, y, tracked).");
  m.def(
      "dbscan",
      [](const std::vector<std::pair<double, double>>& pts, double eps, int min_pts) {
        std::vector<vision::Point2> p;
        for (const auto& [x, y] : pts) p.push_back({x, y});
        return vision::dbscan(p, eps, min_pts);
      },
      py::arg("points"), py::arg("eps"), py::arg("min_pts"), "Cluster labels; -1 marks noise.");

  // fusion
  py::enum_<Source>(m, "Source").value("LIDAR", Source::kLidar).value("CAMERA", Source::kCamera);
  py::enum_<fusion::MainSensor>(m, "MainSensor")
      .value("NONE", fusion::MainSensor::kNone)
      .value("LIDAR", fusion::MainSensor::kLidar)
      .value("CAMERA", fusion::MainSensor::kCamera)
      .value("FALLBACK", fusion::MainSensor::kFallback);
  py::enum_<fusion::Warning>(m, "Warning")
      .value("NONE", fusion::Warning::kNone)
      .value("YELLOW", fusion::Warning::kLevel1Yellow)
      .value("RED", fusion::Warning::kLevel2Red);

  py::class_<fusion::FusedOutput>(m, "FusedOutput")
      .def_readonly("t_s", &fusion::FusedOutput::t_s)
      .def_readonly("distance_m", &fusion::FusedOutput::distance_m)
      .def_readonly("main_sensor", &fusion::FusedOutput::main_sensor)
      .def_readonly("warning", &fusion::FusedOutput::warning)
      .def_readonly("lidar_raw_m", &fusion::FusedOutput::lidar_raw_m)
      .def_readonly("camera_raw_m", &fusion::FusedOutput::camera_raw_m);

  py::class_<fusion::FusionState>(m, "FusionState").def(py::init<>());

  m.def("camera_trusted",
        [](double mean, int corners, double dark, int min_corners) {
          return fusion::camera_trusted({mean, corners}, dark, min_corners);
        },
        py::arg("mean_intensity"), py::arg("corner_count"), py::arg("dark_threshold") = 30.0,
        py::arg("min_corners") = 8);
  m.def(
      "fuse",
      [](std::optional<double> lidar_m, std::optional<double> camera_m, double mean_intensity,
         int corner_count, fusion::FusionState& state, double t_s) {
        std::optional<Detection> l;
        std::optional<Detection> c;
        if (lidar_m) l = Detection{*lidar_m, Source::kLidar, t_s, std::nullopt};
        if (camera_m) c = Detection{*camera_m, Source::kCamera, t_s, std::nullopt};
        return fusion::fuse(l, c, {mean_intensity, corner_count}, state, fusion::FusionParams{}, t_s);
      },
      py::arg("lidar_m"), py::arg("camera_m"), py::arg("mean_intensity"), py::arg("corner_count"),
      py::arg("state"), py::arg("t_s"));
  m.def("warn_level", &fusion::warn_level, py::arg("distance_m"));

  // sim and end-to-end commands; configs and artifacts travel as JSON text
  m.def(
      "default_scenario",
      [](const std::string& kind) {
        return sim::to_json(sim::ScenarioConfig::for_kind(sim::scenario_kind_from_string(kind)));
      },
      py::arg("kind") = "CVFA");
  m.def(
      "render_frame",
      [](const std::string& scenario_json, double t_s) {
        const auto cfg = sim::scenario_from_json(scenario_json);
        const auto sc = sim::build_scenario(cfg);
        return to_array(sim::render_frame(sim::state_at(sc, t_s), cfg));
      },
      py::arg("scenario_json"), py::arg("t_s"));
  m.def(
      "calibrate",
      [](std::optional<std::string> scenario_json, int positions) {
        pipeline::SweepConfig sweep;
        if (scenario_json) sweep.scene = sim::scenario_from_json(*scenario_json);
        sweep.positions = positions;
        return calib::to_json(pipeline::cmd_calibrate(sweep));
      },
      py::arg("scenario_json") = std::nullopt, py::arg("positions") = 53,
      "Run the calibration sweep and return the artifact as JSON.");
  m.def(
      "run",
      [](const std::string& scenario_json, const std::string& calib_json,
         std::optional<std::filesystem::path> out_dir, bool dump_frames,
         std::optional<std::uint64_t> seed) {
        const auto cfg = sim::scenario_from_json(scenario_json);
        const auto artifact = calib::calibration_from_json(calib_json);
        pipeline::RunResult result;
        {
          py::gil_scoped_release release;
          result = pipeline::cmd_run(cfg, artifact, out_dir, {dump_frames, seed});
        }
        return py::make_tuple(pipeline::to_json(result.report), pipeline::fusion_csv(result.fused));
      },
      py::arg("scenario_json"), py::arg("calib_json"), py::arg("out_dir") = std::nullopt,
      py::arg("dump_frames") = false, py::arg("seed") = std::nullopt,
      "Returns (report JSON, fusion CSV).");
  m.def(
      "replay",
      [](const std::filesystem::path& log_dir, const std::string& calib_json) {
        const auto artifact = calib::calibration_from_json(calib_json);
        return pipeline::fusion_csv(pipeline::cmd_replay(log_dir, artifact, fusion::FusionParams{}));
      },
      py::arg("log_dir"), py::arg("calib_json"), "Fusion CSV recomputed from a run's logs.");
}
