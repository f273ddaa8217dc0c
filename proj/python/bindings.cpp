#include "vptrap/driver.hpp"
#include "vptrap/io.hpp"
#include "vptrap/poisson.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace vptrap;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array grid_array(const std::vector<double>& values, int n, int components = 1) {
    std::vector<py::ssize_t> shape{n, n};
    if (components > 1) shape.push_back(components);
    Array a(shape);
    std::copy(values.begin(), values.end(), a.mutable_data());
    return a;
}

py::tuple pair(const Vec2& v) { return py::make_tuple(v.x, v.y); }

// Python-facing flat view of a run: one numpy column per scalar diagnostic.
py::dict run(const SimConfig& cfg) {
    RunResult r;
    {
        py::gil_scoped_release release;
        r = run_simulation(cfg);
    }
    std::map<std::string, std::vector<double>> cols;
    for (const auto& s : r.series.samples) {
        cols["t"].push_back(s.t);
        cols["mass"].push_back(s.mass);
        cols["energy"].push_back(s.energy.total);
        cols["kinetic"].push_back(s.energy.kinetic);
        cols["potential"].push_back(s.energy.potential);
        cols["sup_e2t_rho"].push_back(s.sup_e2t_rho);
        cols["sup_Sf"].push_back(s.deriv.sup_Sf);
        cols["uf_ratio"].push_back(s.deriv.uf_ratio);
        for (const auto& [name, v] : s.weak) cols["weak_" + name].push_back(v);
    }
    py::dict d;
    for (auto& [k, v] : cols) d[py::str(k)] = py::array_t<double>(v.size(), v.data());
    d["failure"] = r.failure;
    d["wall_seconds"] = r.wall_seconds;
    return d;
}

py::dict sample(const SimConfig& cfg) {
    const auto ens = sample_initial(cfg);
    const std::size_t n = ens.size();
    Array s({n, std::size_t{2}}), u({n, std::size_t{2}}), w(n);
    auto S = s.mutable_unchecked<2>();
    auto U = u.mutable_unchecked<2>();
    auto W = w.mutable_unchecked<1>();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& p = ens.particles[k];
        S(k, 0) = p.z.s.x, S(k, 1) = p.z.s.y;
        U(k, 0) = p.z.u.x, U(k, 1) = p.z.u.y;
        W(k) = p.w;
    }
    py::dict d;
    d["s"] = s;
    d["u"] = u;
    d["w"] = w;
    return d;
}

Array solve(Array rho, double ox, double oy, double h) {
    if (rho.ndim() != 2 || rho.shape(0) != rho.shape(1)) throw py::value_error("rho must be a square 2D array");
    const int n = static_cast<int>(rho.shape(0));
    ScalarField2D f(GridSpec{{ox, oy}, h, n});
    std::copy(rho.data(), rho.data() + f.values.size(), f.values.begin());
    const auto phi = solve_free_space(f);
    return grid_array(phi.values, n);
}

py::dict read_snapshot(py::bytes data) {
    const auto s = io::decode_snapshot(std::string(data));
    py::dict d;
    d["origin"] = pair(s.spec.origin);
    d["h"] = s.spec.h;
    d["time"] = s.time;
    d["values"] = grid_array(s.values, s.spec.n, static_cast<int>(s.components));
    return d;
}

}  // namespace

PYBIND11_MODULE(_vptrap, m) {
    m.doc() = "Particle Vlasov-Poisson solver in the -|x|^2/2 trap";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("mu", &SimConfig::mu)
        .def_readwrite("epsilon", &SimConfig::epsilon)
        .def_readwrite("sigma_s", &SimConfig::sigma_s)
        .def_readwrite("sigma_u", &SimConfig::sigma_u)
        .def_readwrite("n_particles", &SimConfig::n_particles)
        .def_readwrite("grid_n", &SimConfig::grid_n)
        .def_readwrite("dt", &SimConfig::dt)
        .def_readwrite("t_final", &SimConfig::t_final)
        .def_readwrite("sample_times", &SimConfig::sample_times)
        .def_readwrite("norm_M", &SimConfig::norm_M)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("coupling", &SimConfig::coupling)
        .def_readwrite("grid_policy", &SimConfig::grid_policy)
        .def_readwrite("snapshot_particles", &SimConfig::snapshot_particles)
        .def("validate", &SimConfig::validate)
        .def("__repr__", [](const SimConfig& c) { return "SimConfig(\n" + io::serialize_config(c) + ")"; });

    m.def("parse_config", &io::parse_config, py::arg("text"));
    m.def("serialize_config", &io::serialize_config, py::arg("config"));

    m.def("to_hyperbolic", [](std::pair<double, double> x, std::pair<double, double> v) {
        const auto z = to_hyperbolic({x.first, x.second}, {v.first, v.second});
        return py::make_tuple(pair(z.s), pair(z.u));
    });
    m.def("linear_flow", [](std::pair<double, double> x, std::pair<double, double> v, double t) {
        const auto p = linear_flow(Vec2{x.first, x.second}, Vec2{v.first, v.second}, t);
        return py::make_tuple(pair(p.x), pair(p.v));
    });
    m.def("initial_mass", &initial_mass_closed_form, py::arg("config"));
    m.def("sample_initial", &sample, py::arg("config"), "Initial particles as arrays s, u (N x 2) and w.");
    m.def("solve_free_space", &solve, py::arg("rho"), py::arg("ox"), py::arg("oy"), py::arg("h"),
          "phi with Delta phi = rho on an n x n node grid (free-space boundary).");
    m.def("run", &run, py::arg("config"), "Integrate to t_final; diagnostics per sample time.");
    m.def("read_snapshot", &read_snapshot, py::arg("data"), "Decode a VPH1 snapshot.");
}
