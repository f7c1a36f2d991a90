#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pwainv/model_io.hpp"

namespace py = pybind11;
using namespace pwainv;

namespace {

py::dict run_dict(const Trajectory& u, const Trajectory& x, const std::vector<int>& keys) {
  py::dict d;
  d["start_k"] = u.start_k;
  d["u"] = u.row();
  d["x"] = Mat(x.samples);
  d["keys"] = keys;
  return d;
}

}  // namespace

PYBIND11_MODULE(_pwainv, m) {
  m.doc() = "Inversion and iterative learning control for piecewise affine systems";

  static py::handle error_type = py::exception<Error>(m, "PwainvError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(e.what());
      exc.attr("code") = static_cast<int>(e.code());
      exc.attr("name") = error_code_name(e.code());
      exc.attr("assumption") = e.assumption();
      exc.attr("evidence") = e.evidence();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<PwaModel, std::shared_ptr<PwaModel>>(m, "PwaModel")
      .def_property_readonly("n_x", &PwaModel::n_x)
      .def_property_readonly("n_u", &PwaModel::n_u)
      .def_property_readonly("n_y", &PwaModel::n_y)
      .def_property_readonly("locations", &PwaModel::locations)
      .def("locate", [](const PwaModel& mdl, const Vec& x, long k) { return mdl.locate(x, k); }, py::arg("x"),
           py::arg("k") = 0)
      .def(
          "simulate",
          [](const PwaModel& mdl, const Vec& x0, const Vec& u, long start_k) {
            const SimulationResult s = simulate(mdl, x0, Trajectory::scalar(start_k, u, "u"));
            py::dict d;
            d["y"] = s.y.row();
            d["x"] = Mat(s.x.samples);
            d["locations"] = s.locations;
            return d;
          },
          py::arg("x0"), py::arg("u"), py::arg("start_k") = 0)
      .def("to_json", [](const PwaModel& mdl) { return model_to_json(mdl).dump(); });

  m.def(
      "model_from_json", [](const std::string& text) { return std::make_shared<PwaModel>(model_from_json(Json::parse(text))); },
      py::arg("text"));
  m.def(
      "load_model",
      [](const std::string& path) {
        const LoadedModel lm = load_model_file(path);
        return std::make_shared<PwaModel>(*lm.model);
      },
      py::arg("path"));

  py::class_<InversePwaModel>(m, "InversePwaModel")
      .def_property_readonly("mu_tilde", &InversePwaModel::mu_tilde)
      .def_property_readonly("key_count", &InversePwaModel::key_count)
      .def(
          "matrices",
          [](const InversePwaModel& inv, int key, long k) {
            const InverseMatrices im = inv.matrices(key, k);
            py::dict d;
            d["Abar"] = im.Abar;
            d["Bbar"] = im.Bbar;
            d["Fbar"] = im.Fbar;
            d["Cbar"] = RowVec(im.Cbar);
            d["Dbar"] = im.Dbar;
            d["Gbar"] = im.Gbar;
            return d;
          },
          py::arg("key"), py::arg("k") = 0)
      .def(
          "propagate",
          [](const InversePwaModel& inv, const Vec& x0, const Vec& y, long start_k) {
            const InverseRun run = propagate_inverse(inv, x0, Trajectory::scalar(start_k, y, "y"));
            return run_dict(run.u, run.x, run.keys);
          },
          py::arg("x0"), py::arg("y"), py::arg("start_k") = 0);

  m.def(
      "invert",
      [](std::shared_ptr<PwaModel> model, int degree, long anchor_k) {
        return invert(std::shared_ptr<const PwaModel>(model), degree, anchor_k);
      },
      py::arg("model"), py::arg("degree") = -1, py::arg("anchor_k") = 0);

  py::class_<Decoupling>(m, "Decoupling")
      .def_readonly("V", &Decoupling::V)
      .def_readonly("V_inv", &Decoupling::V_inv)
      .def_readonly("n_s", &Decoupling::n_s)
      .def_readonly("n_u", &Decoupling::n_u)
      .def_readonly("stable_eigs", &Decoupling::stable_eigs)
      .def_readonly("unstable_eigs", &Decoupling::unstable_eigs)
      .def_readonly("block_residual", &Decoupling::block_residual);

  m.def(
      "compute_decoupling", [](const InversePwaModel& inv, long anchor_k) { return compute_decoupling(inv, std::nullopt, anchor_k); },
      py::arg("inverse"), py::arg("anchor_k") = 0);

  m.def(
      "stable_invert",
      [](const InversePwaModel& inv, const Decoupling& dec, const Vec& r, long start_k, int lead_pad, int trail_pad) {
        StableInversionConfig cfg;
        cfg.lead_pad = lead_pad;
        cfg.trail_pad = trail_pad;
        const Trajectory r0 = Trajectory::scalar(start_k, r, "r");
        const PwaModel& src = inv.source();
        auto solve = [&](const InversePwaModel& target) {
          const StableInversionResult res = stable_invert(target, dec, pad_reference(target, r0, cfg), cfg);
          py::dict d = run_dict(res.u, res.x, res.keys);
          d["report"] = to_json(res.report).dump();
          return d;
        };
        if (!src.schedule().rebindable()) return solve(inv);
        // The exogenous reference is bound to r, held over the pads so the pad steps exist;
        // the state matrices, and with them the decoupling, do not depend on it.
        StableInversionConfig hold = cfg;
        hold.pad_mode = PadMode::HoldEndpoints;
        const Trajectory bound_r = lead_pad > 0 || trail_pad > 0 ? pad_reference(inv, r0, hold) : r0;
        const auto bound = std::make_shared<const PwaModel>(src.with_schedule(src.schedule().rebind(bound_r)));
        return solve(InversePwaModel(bound, inv.mu_tilde()));
      },
      py::arg("inverse"), py::arg("decoupling"), py::arg("r"), py::arg("start_k") = 0, py::arg("lead_pad") = 0,
      py::arg("trail_pad") = 0);

  m.def(
      "enumerate_implicit_solutions",
      [](std::shared_ptr<PwaModel> model, long k, const Vec& x, double y_target, std::vector<double> future_u) {
        return enumerate_implicit_solutions(*model, k, x, y_target, future_u);
      },
      py::arg("model"), py::arg("k"), py::arg("x"), py::arg("y_target"), py::arg("future_u") = std::vector<double>{});

  m.def(
      "check_assumptions_json", [](std::shared_ptr<PwaModel> model) { return to_json(check_assumptions(*model)).dump(); },
      py::arg("model"));

  m.def("nrmse", &nrmse, py::arg("r"), py::arg("y"));
  m.def("peak_error", &peak_error, py::arg("r"), py::arg("y"));
  m.def("lowpass_impulse_response", &lowpass_impulse_response, py::arg("a1"), py::arg("a2"), py::arg("b"),
        py::arg("length"), py::arg("unit_dc_gain") = true);
  m.def(
      "build_filters",
      [](const Vec& h, int n_edge, long N, int mu) {
        const FilterPair f = build_filters(h, n_edge, N, mu);
        py::dict d;
        d["Q"] = f.Q;
        d["E"] = f.E;
        d["F"] = f.F;
        return d;
      },
      py::arg("impulse_response"), py::arg("n_edge"), py::arg("N"), py::arg("mu"));

  m.def("default_bench_config_json", [] { return bench_config_to_json(default_bench_config()).dump(); });
  m.def(
      "run_benchmark_json",
      [](const std::string& config) {
        BenchResults res;
        {
          py::gil_scoped_release release;
          res = run_benchmark(bench_config_from_json(Json::parse(config)));
        }
        Json out{{"seconds", res.seconds},
                 {"self_inversion", {{"nrmse", res.self_inversion_nrmse}, {"peak", res.self_inversion_peak}}},
                 {"gains", {{"ililc", res.gains.ililc}, {"gradient", res.gains.gradient}, {"ptype", res.gains.ptype}}}};
        for (const auto& s : res.scenarios) {
          Json trials = Json::array();
          for (const auto& t : s.trials) trials.push_back(t.nrmse);
          out["scenarios"][s.name] = Json{{"nrmse", s.nrmse}, {"peak", s.peak}, {"gain", s.gain}, {"trials", trials}};
        }
        return out.dump();
      },
      py::arg("config") = "{}");
}
