#include "jumpcap/bsde.hpp"
#include "jumpcap/config.hpp"
#include "jumpcap/model.hpp"
#include "jumpcap/net.hpp"
#include "jumpcap/policy.hpp"
#include "jumpcap/selector.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace jumpcap;

namespace {

// (v, d, c) node arrays of a bundle as (batch, steps+1) numpy arrays.
py::dict bundle_to_dict(const PathBundle& bundle) {
    const int rows = bundle.batch;
    const int cols = bundle.steps + 1;
    py::array_t<double> v({rows, cols});
    py::array_t<double> d({rows, cols});
    py::array_t<double> c({rows, cols});
    auto vv = v.mutable_unchecked<2>();
    auto dd = d.mutable_unchecked<2>();
    auto cc = c.mutable_unchecked<2>();
    for (int j = 0; j < rows; ++j) {
        for (int n = 0; n < cols; ++n) {
            const SystemState& s = bundle.state(j, n);
            vv(j, n) = s.v;
            dd(j, n) = s.d;
            cc(j, n) = s.c;
        }
    }
    py::array_t<double> cost(rows);
    auto rc = cost.mutable_unchecked<1>();
    for (int j = 0; j < rows; ++j) {
        rc(j) = bundle.running_cost[static_cast<std::size_t>(j)];
    }
    py::dict out;
    out["v"] = v;
    out["d"] = d;
    out["c"] = c;
    out["running_cost"] = cost;
    return out;
}

std::unique_ptr<Policy> policy_from(double threshold, const MlpParams* net) {
    if (net != nullptr) {
        return std::make_unique<FeedbackPolicy>(*net);
    }
    return std::make_unique<ThresholdPolicy>(threshold);
}

Scheme scheme_arg(const std::string& name) { return scheme_from(name); }

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Jump-driven renewable capacity installation toolkit";

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init<>())
        .def_readwrite("T", &ModelParams::T)
        .def_readwrite("v0", &ModelParams::v0)
        .def_readwrite("d0", &ModelParams::d0)
        .def_readwrite("c0", &ModelParams::c0)
        .def_readwrite("lambda1", &ModelParams::lambda1)
        .def_readwrite("lambda2", &ModelParams::lambda2)
        .def_readwrite("m1", &ModelParams::m1)
        .def_readwrite("m2", &ModelParams::m2)
        .def_readwrite("sigma11", &ModelParams::sigma11)
        .def_readwrite("sigma12", &ModelParams::sigma12)
        .def_readwrite("sigma22", &ModelParams::sigma22)
        .def_readwrite("xi1", &ModelParams::xi1)
        .def_readwrite("xi2", &ModelParams::xi2)
        .def_readwrite("p", &ModelParams::p)
        .def_readwrite("s", &ModelParams::s)
        .def_readwrite("r", &ModelParams::r)
        .def_readwrite("kappa", &ModelParams::kappa)
        .def_readwrite("a_min", &ModelParams::a_min)
        .def_readwrite("a_max", &ModelParams::a_max)
        .def("validate", &ModelParams::validate);

    py::class_<RngStream>(m, "RngStream")
        .def(py::init([](std::uint64_t seed, std::uint64_t stream) {
                 return RngStream::seeded(seed, stream);
             }),
             py::arg("seed"), py::arg("stream") = 0)
        .def("next_unit", &RngStream::next_unit)
        .def("next_exponential", &RngStream::next_exponential)
        .def("next_poisson", &RngStream::next_poisson);
    m.def("substream", &substream);

    m.def(
        "sample_jumps",
        [](double intensity, double m_rate, double dt, RngStream& rng) {
            return sample_jumps(intensity, m_rate, dt, rng);
        },
        py::arg("intensity"), py::arg("m"), py::arg("dt"), py::arg("rng"));

    m.def("analytic_mean_demand", &analytic_mean_demand);
    m.def(
        "no_jump_state",
        [](const ModelParams& p, double t) {
            const SystemState s = no_jump_state(p, t);
            return py::make_tuple(s.v, s.d, s.c);
        },
        py::arg("params"), py::arg("t"));

    m.def(
        "simulate",
        [](const ModelParams& params, int steps, int batch, std::uint64_t seed,
           double threshold, const std::string& scheme) {
            const TimeGrid grid{steps, params.T};
            const ThresholdPolicy policy(threshold);
            return bundle_to_dict(simulate(params, grid, policy, batch,
                                           RngStream::seeded(seed), scheme_arg(scheme)));
        },
        py::arg("params"), py::arg("steps"), py::arg("batch"), py::arg("seed"),
        py::arg("threshold") = 0.0, py::arg("scheme") = "euler",
        "Simulate a batch of paths under a threshold policy; returns node arrays.");

    m.def(
        "mc_cost",
        [](const ModelParams& params, int steps, std::uint64_t paths, std::uint64_t seed,
           double threshold, const std::string& scheme, int threads) {
            const TimeGrid grid{steps, params.T};
            const ThresholdPolicy policy(threshold);
            const McResult res = mc_cost(params, grid, policy, paths, RngStream::seeded(seed),
                                         scheme_arg(scheme), threads);
            return py::make_tuple(res.estimate, res.std_error);
        },
        py::arg("params"), py::arg("steps"), py::arg("paths"), py::arg("seed"),
        py::arg("threshold"), py::arg("scheme") = "euler", py::arg("threads") = 1,
        "Monte Carlo cost estimate and standard error of a threshold policy.");

    m.def(
        "mc_cost_policy_file",
        [](const ModelParams& params, int steps, std::uint64_t paths, std::uint64_t seed,
           const std::string& policy_file, const std::string& scheme, int threads) {
            const TimeGrid grid{steps, params.T};
            const MlpParams net = load_mlp(policy_file);
            const FeedbackPolicy policy(net);
            const McResult res = mc_cost(params, grid, policy, paths, RngStream::seeded(seed),
                                         scheme_arg(scheme), threads);
            return py::make_tuple(res.estimate, res.std_error);
        },
        py::arg("params"), py::arg("steps"), py::arg("paths"), py::arg("seed"),
        py::arg("policy_file"), py::arg("scheme") = "euler", py::arg("threads") = 1);

    m.def(
        "build_grid", &build_grid, py::arg("a_min"), py::arg("a_max"), py::arg("points"));

    m.def(
        "select_threshold_mc",
        [](const ModelParams& params, int steps, double a_min, double a_max, int points,
           std::uint64_t paths, std::uint64_t seed, int threads) {
            const TimeGrid grid{steps, params.T};
            SelectorConfig cfg;
            cfg.mode = SelectorMode::mc_oracle;
            cfg.mc_paths = paths;
            cfg.seed = seed;
            cfg.threads = threads;
            const SelectorResult res =
                select_threshold(params, grid, build_grid(a_min, a_max, points), cfg);
            py::list entries;
            for (const SelectorEntry& e : res.entries) {
                entries.append(py::make_tuple(e.threshold, e.y0, e.std_error));
            }
            return py::make_tuple(res.best().threshold, res.best().y0, entries);
        },
        py::arg("params"), py::arg("steps"), py::arg("a_min"), py::arg("a_max"),
        py::arg("points"), py::arg("paths"), py::arg("seed"), py::arg("threads") = 1,
        "Oracle-mode threshold selection (Monte Carlo cost per grid point).");

    py::class_<BsdeTrainConfig>(m, "BsdeTrainConfig")
        .def(py::init<>())
        .def_readwrite("batch", &BsdeTrainConfig::batch)
        .def_readwrite("aux_batch", &BsdeTrainConfig::aux_batch)
        .def_readwrite("epochs_terminal", &BsdeTrainConfig::epochs_terminal)
        .def_readwrite("epochs_other", &BsdeTrainConfig::epochs_other)
        .def_readwrite("learning_rate", &BsdeTrainConfig::learning_rate)
        .def_readwrite("hidden_width", &BsdeTrainConfig::hidden_width)
        .def_readwrite("hidden_layers", &BsdeTrainConfig::hidden_layers)
        .def_readwrite("seed", &BsdeTrainConfig::seed)
        .def_readwrite("scale", &BsdeTrainConfig::scale);

    m.def(
        "solve_bsde",
        [](const ModelParams& params, int steps, double threshold,
           const BsdeTrainConfig& config) {
            const BsdeProblem problem{params, TimeGrid{steps, params.T}, threshold,
                                      Scheme::euler};
            const BsdeSolution solution = solve_bsde(problem, config);
            py::list final_losses;
            for (const auto& history : solution.loss_history) {
                final_losses.append(history.empty() ? 0.0 : history.back());
            }
            return py::make_tuple(solution.y0, final_losses);
        },
        py::arg("params"), py::arg("steps"), py::arg("threshold"), py::arg("config"),
        "Backward solve; returns (y0, per-step final loss).");

    py::class_<ControlTrainConfig>(m, "ControlTrainConfig")
        .def(py::init<>())
        .def_readwrite("batch", &ControlTrainConfig::batch)
        .def_readwrite("epochs", &ControlTrainConfig::epochs)
        .def_readwrite("learning_rate", &ControlTrainConfig::learning_rate)
        .def_readwrite("hidden_width", &ControlTrainConfig::hidden_width)
        .def_readwrite("hidden_layers", &ControlTrainConfig::hidden_layers)
        .def_readwrite("seed", &ControlTrainConfig::seed)
        .def_readwrite("scale", &ControlTrainConfig::scale)
        .def_readwrite("eval_paths", &ControlTrainConfig::eval_paths);

    m.def(
        "train_policy",
        [](const ModelParams& params, int steps, const ControlTrainConfig& config,
           const std::string& save_to, int threads) {
            const PolicyTrainResult res =
                train_policy(params, TimeGrid{steps, params.T}, config, threads);
            if (!save_to.empty()) {
                save_mlp(save_to, res.policy);
            }
            return py::make_tuple(res.out_of_sample.estimate, res.out_of_sample.std_error,
                                  res.loss_history);
        },
        py::arg("params"), py::arg("steps"), py::arg("config"), py::arg("save_to") = "",
        py::arg("threads") = 1,
        "Train the feedback policy; returns (out_of_sample, se, loss_history).");

    m.def(
        "mlp_forward_file",
        [](const std::string& policy_file, py::array_t<double, py::array::c_style> x) {
            const MlpParams net = load_mlp(policy_file);
            const auto buf = x.unchecked<2>();
            Eigen::MatrixXd inputs(buf.shape(1), buf.shape(0));
            for (py::ssize_t i = 0; i < buf.shape(0); ++i) {
                for (py::ssize_t j = 0; j < buf.shape(1); ++j) {
                    inputs(j, i) = buf(i, j);
                }
            }
            const Eigen::MatrixXd y = mlp_forward(net, inputs);
            py::array_t<double> out({static_cast<py::ssize_t>(y.cols()),
                                     static_cast<py::ssize_t>(y.rows())});
            auto ob = out.mutable_unchecked<2>();
            for (py::ssize_t i = 0; i < ob.shape(0); ++i) {
                for (py::ssize_t j = 0; j < ob.shape(1); ++j) {
                    ob(i, j) = y(j, i);
                }
            }
            return out;
        },
        py::arg("policy_file"), py::arg("x"),
        "Evaluate a saved network on a row-major batch (n, d_in) -> (n, d_out).");
}
