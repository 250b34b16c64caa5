#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <memory>
#include <mutex>

#include "pnp/binary_io.hpp"
#include "pnp/chirp.hpp"
#include "pnp/commands.hpp"
#include "pnp/kernel.hpp"
#include "pnp/membrane.hpp"
#include "pnp/pipeline.hpp"

namespace py = pybind11;
using namespace pnp;

namespace {

py::array_t<double> to_numpy(std::vector<double> v) {
  auto* owned = new std::vector<double>(std::move(v));
  py::capsule free_when_done(owned, [](void* p) { delete static_cast<std::vector<double>*>(p); });
  return py::array_t<double>(static_cast<py::ssize_t>(owned->size()), owned->data(), free_when_done);
}

AudioBuffer as_audio(py::array_t<double, py::array::c_style | py::array::forcecast> x, double sample_rate) {
  if (x.ndim() != 1) throw py::value_error("expected a 1-D signal");
  return AudioBuffer{std::vector<double>(x.data(), x.data() + x.size()), sample_rate};
}

double rate_of(SynthId s) { return s == SynthId::kChirp ? kChirpSampleRate : kDrumSampleRate; }

// One feature map per synth; building the filterbanks is the expensive part.
const FeatureMap& map_for(SynthId s) {
  static std::mutex mu;
  static std::map<SynthId, std::unique_ptr<FeatureMap>> maps;
  std::lock_guard lock(mu);
  auto& slot = maps[s];
  if (!slot) slot = std::make_unique<FeatureMap>(default_scaling(s), default_jtfs_config(s));
  return *slot;
}

ParamVector params(SynthId s, const std::vector<double>& v, Space space) { return ParamVector{v, space, s}; }

ScalingSpec scaling_for(const std::string& synth, bool use_log, bool use_minmax) {
  ScalingSpec sc = default_scaling(parse_synth(synth));
  sc.use_log = use_log;
  sc.use_minmax = use_minmax;
  return sc;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "sound matching lab: synths, JTFS features, PNP kernels";

  static py::exception<Error> exc(m, "PnpError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = exc;
      py::object inst = err(e.what());
      inst.attr("kind") = to_string(e.kind());
      inst.attr("exit_code") = exit_code(e.kind());
      PyErr_SetObject(err.ptr(), inst.ptr());
    }
  });

  m.def(
      "synth_chirp",
      [](double fc, double fm, double gamma) { return to_numpy(synth_chirp(ChirpParams{fc, fm, gamma}).samples); },
      py::arg("fc"), py::arg("fm"), py::arg("gamma"), "4 s chirp at 8192 Hz");
  m.def(
      "synth_drum",
      [](double omega1, double tau1, double p, double D, double alpha) {
        return to_numpy(synth_drum(DrumPerceptual{omega1, tau1, p, D, alpha}).samples);
      },
      py::arg("omega1"), py::arg("tau1"), py::arg("p"), py::arg("D"), py::arg("alpha"), "2^16 samples at 22050 Hz");
  m.def("sample_rate", [](const std::string& synth) { return rate_of(parse_synth(synth)); }, py::arg("synth"));

  m.def(
      "scale",
      [](const std::string& synth, const std::vector<double>& natural, bool use_log, bool use_minmax) {
        const ScalingSpec sc = scaling_for(synth, use_log, use_minmax);
        return scale(params(sc.synth, natural, Space::kNatural), sc).values;
      },
      py::arg("synth"), py::arg("natural"), py::arg("use_log") = true, py::arg("use_minmax") = true);
  m.def(
      "unscale",
      [](const std::string& synth, const std::vector<double>& normalized, bool use_log, bool use_minmax) {
        const ScalingSpec sc = scaling_for(synth, use_log, use_minmax);
        return unscale(params(sc.synth, normalized, Space::kNormalized), sc).values;
      },
      py::arg("synth"), py::arg("normalized"), py::arg("use_log") = true, py::arg("use_minmax") = true);

  m.def(
      "features",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> x, const std::string& synth) {
        const SynthId s = parse_synth(synth);
        const AudioBuffer a = as_audio(x, rate_of(s));
        py::gil_scoped_release release;
        return to_numpy(map_for(s).features(a).coeffs);
      },
      py::arg("signal"), py::arg("synth"), "log-compressed JTFS coefficients");
  m.def(
      "mss_distance",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> x,
         py::array_t<double, py::array::c_style | py::array::forcecast> y) {
        return mss_distance(as_audio(x, 1.0), as_audio(y, 1.0));
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "jacobian",
      [](const std::string& synth, const std::vector<double>& theta_bar, double step) {
        const SynthId s = parse_synth(synth);
        py::gil_scoped_release release;
        return Matrix(jacobian_fd(params(s, theta_bar, Space::kNormalized), map_for(s), step));
      },
      py::arg("synth"), py::arg("theta_bar"), py::arg("step") = 1e-3, "P x J central-difference Jacobian");
  m.def("metric", [](const Matrix& jac) { return Matrix(metric(jac)); }, py::arg("jac"));
  m.def(
      "eig_sym",
      [](const Matrix& mat) {
        const EigenSystem e = eig_sym(mat);
        return py::make_tuple(Vector(e.values), Matrix(e.vectors));
      },
      py::arg("m"), "non-increasing eigenvalues and column eigenvectors");
  m.def(
      "pnp_quadratic",
      [](const Vector& delta, const Matrix& mat, double lambda) { return pnp_quadratic(delta, make_kernel(0, mat), lambda); },
      py::arg("delta"), py::arg("m"), py::arg("lambda_") = 0.0);
  m.def(
      "damped_condition",
      [](const Matrix& mat, double lambda) { return damped_condition(make_kernel(0, mat), lambda); }, py::arg("m"),
      py::arg("lambda_"));

  m.def(
      "resolve_config",
      [](const std::string& text) {
        const RunConfig cfg = RunConfig::parse(text);
        return py::make_tuple(cfg.resolved(), hex64(cfg.hash()));
      },
      py::arg("text"), "resolved config text and its hash");
}
