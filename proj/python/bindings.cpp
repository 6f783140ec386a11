#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "crackmc/campaign.hpp"
#include "crackmc/constitutive.hpp"
#include "crackmc/errors.hpp"
#include "crackmc/estimators.hpp"
#include "crackmc/geometry.hpp"
#include "crackmc/microstructure.hpp"
#include "crackmc/perturbation.hpp"
#include "crackmc/random_stream.hpp"

namespace py = pybind11;
using namespace crackmc;

PYBIND11_MODULE(_core, m) {
  m.doc() = "stochastic phase-field fracture core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_RuntimeError);
  py::register_exception<PackingSaturated>(m, "PackingSaturatedError",
                                           PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<RandomStream>(m, "RandomStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"),
           py::arg("stream_id"))
      .def_property_readonly("seed", &RandomStream::seed)
      .def_property_readonly("stream_id", &RandomStream::stream_id)
      .def_property_readonly("draw_index", &RandomStream::draw_index)
      .def("next_u64", &RandomStream::next_u64)
      .def("uniform01", &RandomStream::uniform01)
      .def("uniform", &RandomStream::uniform, py::arg("lo"), py::arg("hi"))
      .def("symmetric_unit", &RandomStream::symmetric_unit)
      .def("peek", &RandomStream::peek, py::arg("index"))
      .def("substream", &RandomStream::substream, py::arg("tag"));

  py::enum_<PerturbationMode>(m, "PerturbationMode")
      .value("homogeneous", PerturbationMode::homogeneous)
      .value("heterogeneous", PerturbationMode::heterogeneous);

  py::class_<PerturbedParameterSet>(m, "PerturbedParameterSet")
      .def(py::init<>())
      .def_readwrite("baseline", &PerturbedParameterSet::baseline)
      .def_readwrite("eta", &PerturbedParameterSet::eta)
      .def_readwrite("mode", &PerturbedParameterSet::mode)
      .def("validate", &PerturbedParameterSet::validate);

  m.def("realize_parameters", &realize_parameters, py::arg("pset"),
        py::arg("rng"), py::arg("n_points"));

  py::class_<QoICurve>(m, "QoICurve")
      .def(py::init<>())
      .def(py::init([](std::vector<double> times, std::vector<double> values) {
             QoICurve c;
             c.times = std::move(times);
             c.values = std::move(values);
             return c;
           }),
           py::arg("times"), py::arg("values"))
      .def_readwrite("times", &QoICurve::times)
      .def_readwrite("values", &QoICurve::values)
      .def("validate", &QoICurve::validate);

  py::class_<McSummary>(m, "McSummary")
      .def_readonly("samples", &McSummary::samples)
      .def_readonly("mean", &McSummary::mean)
      .def_readonly("variance", &McSummary::variance)
      .def_readonly("ci95", &McSummary::ci95)
      .def_readonly("per_sample_qoi", &McSummary::per_sample_qoi);

  m.def(
      "mc_mean",
      [](const std::vector<double>& values) { return mc_mean(values); },
      py::arg("values"));
  m.def(
      "mc_variance",
      [](const std::vector<double>& values, bool unbiased) {
        return mc_variance(values, unbiased);
      },
      py::arg("values"), py::arg("unbiased") = false);

  py::class_<RateFit>(m, "RateFit")
      .def_readonly("slope", &RateFit::slope)
      .def_readonly("intercept", &RateFit::intercept)
      .def_readonly("degenerate", &RateFit::degenerate);

  m.def(
      "fit_loglog",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        return fit_loglog(x, y);
      },
      py::arg("x"), py::arg("y"));
  m.def("mc_rate_study", &mc_rate_study, py::arg("errors_per_m"));
  m.def("total_error_decomposition", &total_error_decomposition,
        py::arg("errors_h"), py::arg("errors_m"));

  py::class_<ErrorDecomposition>(m, "ErrorDecomposition")
      .def_readonly("spatial", &ErrorDecomposition::spatial)
      .def_readonly("statistical", &ErrorDecomposition::statistical);

  py::class_<McAccumulator>(m, "McAccumulator")
      .def(py::init<>())
      .def("add", &McAccumulator::add, py::arg("sample_index"),
           py::arg("curve"))
      .def("merge", &McAccumulator::merge, py::arg("other"))
      .def("finalize", &McAccumulator::finalize,
           py::arg("keep_per_sample") = false)
      .def("size", &McAccumulator::size);

  py::class_<Box>(m, "Box")
      .def(py::init<>())
      .def_readwrite("dim", &Box::dim)
      .def_readwrite("lo", &Box::lo)
      .def_readwrite("hi", &Box::hi)
      .def("measure", &Box::measure)
      .def("validate", &Box::validate);

  py::enum_<Phase>(m, "Phase")
      .value("matrix", Phase::matrix)
      .value("void_phase", Phase::void_phase)
      .value("inclusion", Phase::inclusion);

  py::enum_<PairEnlargement>(m, "PairEnlargement")
      .value("inclusions", PairEnlargement::inclusions)
      .value("all", PairEnlargement::all)
      .value("none", PairEnlargement::none);

  py::class_<Particle>(m, "Particle")
      .def(py::init<>())
      .def_readwrite("phase", &Particle::phase)
      .def_readwrite("center", &Particle::center)
      .def_readwrite("radius", &Particle::radius);

  py::class_<RadiusRange>(m, "RadiusRange")
      .def(py::init<>())
      .def(py::init([](double r_min, double r_max) {
             return RadiusRange{r_min, r_max};
           }),
           py::arg("r_min"), py::arg("r_max"))
      .def_readwrite("r_min", &RadiusRange::r_min)
      .def_readwrite("r_max", &RadiusRange::r_max);

  py::class_<AllocationSpec>(m, "AllocationSpec")
      .def(py::init<>())
      .def_readwrite("box", &AllocationSpec::box)
      .def_readwrite("void_radius", &AllocationSpec::void_radius)
      .def_readwrite("inclusion_radius", &AllocationSpec::inclusion_radius)
      .def_readwrite("target_voids", &AllocationSpec::target_voids)
      .def_readwrite("target_inclusions", &AllocationSpec::target_inclusions)
      .def_readwrite("gamma", &AllocationSpec::gamma)
      .def_readwrite("max_attempts", &AllocationSpec::max_attempts)
      .def_readwrite("pair_rule", &AllocationSpec::pair_rule)
      .def("validate", &AllocationSpec::validate);

  py::class_<Microstructure>(m, "Microstructure")
      .def(py::init<>())
      .def_readwrite("box", &Microstructure::box)
      .def_readwrite("gamma", &Microstructure::gamma)
      .def_readwrite("pair_rule", &Microstructure::pair_rule)
      .def_readwrite("seed", &Microstructure::seed)
      .def_readwrite("stream_id", &Microstructure::stream_id)
      .def_readwrite("particles", &Microstructure::particles);

  m.def("allocate", &allocate, py::arg("spec"), py::arg("rng"));
  m.def("phase_at", &phase_at, py::arg("microstructure"), py::arg("x"));
  m.def("achieved_fractions", &achieved_fractions, py::arg("microstructure"));
  m.def("particle_measure", &particle_measure, py::arg("dim"),
        py::arg("radius"));
  m.def(
      "particles_to_string",
      [](const Microstructure& ms) {
        std::ostringstream os;
        write_particles(os, ms);
        return os.str();
      },
      py::arg("microstructure"));
  m.def(
      "particles_from_string",
      [](const std::string& text) {
        std::istringstream is(text);
        return read_particles(is);
      },
      py::arg("text"));

  py::enum_<AtModel>(m, "AtModel")
      .value("at1", AtModel::at1)
      .value("at2", AtModel::at2);

  py::class_<MaterialParams>(m, "MaterialParams")
      .def(py::init<>())
      .def_readwrite("K", &MaterialParams::K)
      .def_readwrite("mu", &MaterialParams::mu)
      .def_readwrite("sigma_Y", &MaterialParams::sigma_Y)
      .def_readwrite("H", &MaterialParams::H)
      .def_readwrite("l_p", &MaterialParams::l_p)
      .def_readwrite("l_f", &MaterialParams::l_f)
      .def_readwrite("psi_c", &MaterialParams::psi_c)
      .def_readwrite("eta_f", &MaterialParams::eta_f)
      .def_readwrite("eta_p", &MaterialParams::eta_p)
      .def_readwrite("zeta", &MaterialParams::zeta)
      .def_readwrite("model", &MaterialParams::model)
      .def("validate", &MaterialParams::validate)
      .def("youngs", &MaterialParams::youngs)
      .def("poisson", &MaterialParams::poisson)
      .def("g_f", &MaterialParams::g_f)
      .def_static("from_youngs", &MaterialParams::from_youngs, py::arg("E"),
                  py::arg("nu"));

  py::class_<MaterialPointState>(m, "MaterialPointState")
      .def(py::init<>())
      .def_readwrite("eps_p", &MaterialPointState::eps_p)
      .def_readwrite("alpha", &MaterialPointState::alpha)
      .def_readwrite("history", &MaterialPointState::history)
      .def_readwrite("eps_p_n", &MaterialPointState::eps_p_n)
      .def_readwrite("alpha_n", &MaterialPointState::alpha_n)
      .def_readwrite("d_n", &MaterialPointState::d_n)
      .def_readwrite("history_n", &MaterialPointState::history_n)
      .def("commit", &MaterialPointState::commit, py::arg("d_now"));

  py::class_<EnergySplit>(m, "EnergySplit")
      .def_readonly("plus", &EnergySplit::plus)
      .def_readonly("minus", &EnergySplit::minus);

  m.def("strain_invariants", &strain_invariants, py::arg("eps"));
  m.def("elastic_split", &elastic_split, py::arg("eps_e"), py::arg("params"));
  m.def("degradation", &degradation, py::arg("d"));
  m.def("degradation_derivative", &degradation_derivative, py::arg("d"));
  m.def("cf_constant", &cf_constant, py::arg("model"));
  m.def("crack_local", &crack_local, py::arg("model"), py::arg("d"));
  m.def("crack_local_derivative", &crack_local_derivative, py::arg("model"),
        py::arg("d"));
  m.def("crack_density", &crack_density, py::arg("d"), py::arg("grad_d"),
        py::arg("params"));
  m.def("fracture_energy_density", &fracture_energy_density, py::arg("d"),
        py::arg("grad_d"), py::arg("params"));
  m.def("plastic_energy", &plastic_energy, py::arg("alpha"),
        py::arg("grad_alpha"), py::arg("params"));
  m.def("yield_function", &yield_function, py::arg("stress"),
        py::arg("hardening_force"), py::arg("d"), py::arg("params"));

  py::class_<AlgorithmicTangent>(m, "AlgorithmicTangent")
      .def_readonly("c_vol", &AlgorithmicTangent::c_vol)
      .def_readonly("c_dev", &AlgorithmicTangent::c_dev)
      .def_readonly("c_nn", &AlgorithmicTangent::c_nn)
      .def_readonly("n", &AlgorithmicTangent::n)
      .def("apply", &AlgorithmicTangent::apply, py::arg("de"));

  py::class_<ReturnMapResult>(m, "ReturnMapResult")
      .def_readonly("stress", &ReturnMapResult::stress)
      .def_readonly("eps_p", &ReturnMapResult::eps_p)
      .def_readonly("delta_gamma", &ReturnMapResult::delta_gamma)
      .def_readonly("alpha", &ReturnMapResult::alpha)
      .def_readonly("q", &ReturnMapResult::q)
      .def_readonly("yielded", &ReturnMapResult::yielded)
      .def_readonly("flow_dir", &ReturnMapResult::flow_dir)
      .def_readonly("tangent", &ReturnMapResult::tangent);

  m.def("return_map", &return_map, py::arg("eps"), py::arg("state_n"),
        py::arg("d"), py::arg("f_nl"), py::arg("params"), py::arg("tau"));
  m.def("update_history", &update_history, py::arg("psi_plus"),
        py::arg("psi_p"), py::arg("history"), py::arg("params"));
  m.def("local_incremental_energy", &local_incremental_energy, py::arg("eps"),
        py::arg("state_n"), py::arg("d"), py::arg("f_nl"), py::arg("params"),
        py::arg("tau"));

  py::class_<SamplingConfig>(m, "SamplingConfig")
      .def(py::init<>())
      .def_readwrite("samples", &SamplingConfig::samples)
      .def_readwrite("seed", &SamplingConfig::seed)
      .def_readwrite("threads", &SamplingConfig::threads)
      .def_readwrite("keep_per_sample", &SamplingConfig::keep_per_sample)
      .def_readwrite("unbiased_variance", &SamplingConfig::unbiased_variance);

  py::class_<CampaignConfig>(m, "CampaignConfig")
      .def_readwrite("sampling", &CampaignConfig::sampling)
      .def_readwrite("output_dir", &CampaignConfig::output_dir)
      .def_readwrite("write_fields", &CampaignConfig::write_fields)
      .def("validate", &CampaignConfig::validate);

  m.def("parse_config", &parse_config, py::arg("json_text"));
  m.def("load_config_file", &load_config_file, py::arg("path"));
  m.def("config_hash", &config_hash, py::arg("json_text"));

  py::class_<SampleFailure>(m, "SampleFailure")
      .def_readonly("sample", &SampleFailure::sample)
      .def_readonly("stream_id", &SampleFailure::stream_id)
      .def_readonly("error", &SampleFailure::error);

  py::class_<CampaignResult>(m, "CampaignResult")
      .def_readonly("summary", &CampaignResult::summary)
      .def_readonly("displacement", &CampaignResult::displacement)
      .def_readonly("failures", &CampaignResult::failures)
      .def_readonly("samples_requested", &CampaignResult::samples_requested)
      .def_readonly("master_seed", &CampaignResult::master_seed);

  py::class_<RateStudyResult>(m, "RateStudyResult")
      .def_readonly("statistical", &RateStudyResult::statistical)
      .def_readonly("rms_per_m", &RateStudyResult::rms_per_m)
      .def_readonly("reference", &RateStudyResult::reference)
      .def_readonly("spatial", &RateStudyResult::spatial)
      .def_readonly("errors_h", &RateStudyResult::errors_h);

  m.def("run_single", &run_single, py::arg("config"), py::arg("stream"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_campaign", &run_campaign, py::arg("config"), py::arg("out_dir"),
        py::arg("config_text"), py::call_guard<py::gil_scoped_release>());
  m.def("run_rate_study", &run_rate_study, py::arg("config"),
        py::arg("out_dir"), py::arg("config_text"),
        py::call_guard<py::gil_scoped_release>());
  m.def("format_full", &format_full, py::arg("v"));
}
