#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ana/approximator.hpp"
#include "ana/checkpoint.hpp"
#include "ana/checks.hpp"
#include "ana/common.hpp"
#include "ana/config.hpp"
#include "ana/experiment.hpp"
#include "ana/network.hpp"
#include "ana/noise.hpp"
#include "ana/rng.hpp"
#include "ana/schedule.hpp"
#include "ana/train.hpp"

namespace py = pybind11;

namespace {

// Adapts a python callable f(x: ndarray) -> float to the raw-pointer
// callback the approximator builders expect.
std::function<double(const double*)> wrap_target(const py::function& f, int n0) {
    return [f, n0](const double* x) -> double {
        Eigen::Map<const Eigen::VectorXd> v(x, n0);
        return py::cast<double>(f(Eigen::VectorXd(v)));
    };
}

void check_dims(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want) {
        std::ostringstream os;
        os << what << ": expected length " << want << ", got " << got;
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() =
        "Numerical core for quantized feedforward networks: multi-step "
        "quantizers, closed-form noise smoothing, per-layer annealing "
        "schedules, training experiments, and constructive grid "
        "approximators.";

    py::register_exception<ana::NumericError>(m, "NumericError", PyExc_RuntimeError);

    // ---------------------------------------------------------------- enums
    py::enum_<ana::NoiseFamily>(m, "NoiseFamily")
        .value("delta", ana::NoiseFamily::delta)
        .value("uniform", ana::NoiseFamily::uniform)
        .value("gaussian", ana::NoiseFamily::gaussian)
        .value("triangular", ana::NoiseFamily::triangular);

    py::enum_<ana::DecayKind>(m, "DecayKind")
        .value("constant", ana::DecayKind::constant)
        .value("linear", ana::DecayKind::linear)
        .value("quadratic", ana::DecayKind::quadratic)
        .value("delayed_linear", ana::DecayKind::delayed_linear);

    py::enum_<ana::AnnealMode>(m, "AnnealMode")
        .value("synchronous", ana::AnnealMode::synchronous)
        .value("asynchronous", ana::AnnealMode::asynchronous);

    py::enum_<ana::Pass>(m, "Pass")
        .value("forward", ana::Pass::forward)
        .value("backward", ana::Pass::backward);

    // ----------------------------------------------------------- quantizers
    py::class_<ana::MultiStepFn>(m, "MultiStepFn",
                                 "Increasing staircase q0 + sum_k dq_k * H(x - theta_k).")
        .def(py::init<std::vector<double>, std::vector<double>, bool>(), py::arg("thresholds"),
             py::arg("levels"), py::arg("strict") = false)
        .def_static("ternary", &ana::MultiStepFn::ternary)
        .def_static("sign", &ana::MultiStepFn::sign)
        .def_static("step01", &ana::MultiStepFn::step01, py::arg("theta"),
                    py::arg("strict") = false)
        .def("eval", [](const ana::MultiStepFn& f, double x) { return f.eval(x); }, py::arg("x"))
        .def("__call__", [](const ana::MultiStepFn& f, double x) { return f(x); }, py::arg("x"))
        .def("apply",
             [](const ana::MultiStepFn& f, const Eigen::VectorXd& xs) {
                 Eigen::VectorXd out(xs.size());
                 ana::quantize_tensor(f, xs.data(), out.data(),
                                      static_cast<std::size_t>(xs.size()));
                 return out;
             },
             py::arg("xs"), "Elementwise quantization of a 1-D array.")
        .def_property_readonly("steps", &ana::MultiStepFn::steps)
        .def_property_readonly("thresholds", &ana::MultiStepFn::thresholds)
        .def_property_readonly("levels", &ana::MultiStepFn::levels)
        .def_property_readonly("strict", &ana::MultiStepFn::strict);

    // ---------------------------------------------------------------- noise
    py::class_<ana::NoiseModel>(m, "NoiseModel",
                                "Zero-mean symmetric noise parametrized by its std deviation.")
        .def(py::init<ana::NoiseFamily, double>(), py::arg("family"), py::arg("sigma"))
        .def_static("delta", &ana::NoiseModel::delta)
        .def_static("uniform", &ana::NoiseModel::uniform, py::arg("sigma"))
        .def_static("gaussian", &ana::NoiseModel::gaussian, py::arg("sigma"))
        .def_static("triangular", &ana::NoiseModel::triangular, py::arg("sigma"))
        .def_static("uniform_support", &ana::NoiseModel::uniform_support, py::arg("half_width"))
        .def_static("triangular_support", &ana::NoiseModel::triangular_support,
                    py::arg("half_width"))
        .def_property_readonly("family", &ana::NoiseModel::family)
        .def_property_readonly("sigma", &ana::NoiseModel::sigma)
        .def_property_readonly("width", &ana::NoiseModel::width)
        .def_property_readonly("is_delta", &ana::NoiseModel::is_delta)
        .def("pdf", &ana::NoiseModel::pdf, py::arg("x"))
        .def("cdf", &ana::NoiseModel::cdf, py::arg("x"));

    m.def("smoothed_eval", &ana::smoothed_eval, py::arg("f"), py::arg("noise"), py::arg("x"),
          "Closed-form E[f(x + nu)].");
    m.def("smoothed_derivative", &ana::smoothed_derivative, py::arg("f"), py::arg("noise"),
          py::arg("x"), "Closed-form d/dx E[f(x + nu)].");
    m.def("lipschitz_bound", &ana::lipschitz_bound, py::arg("f"), py::arg("noise"),
          "Uniform bound on the smoothed derivative field.");
    m.def("quadrature_expectation", &ana::quadrature_expectation, py::arg("f"), py::arg("noise"),
          py::arg("x"), py::arg("n"),
          "Brute-force midpoint quadrature of E[f(x + nu)] (independent oracle).");
    m.def("ste_mask", &ana::ste_mask, py::arg("s"),
          "Indicator of the closed interval [-1, 1] (straight-through gradient mask).");
    m.def("smoothed_curve",
          [](const ana::MultiStepFn& f, const ana::NoiseModel& noise, const Eigen::VectorXd& xs) {
              Eigen::VectorXd out(xs.size());
              for (Eigen::Index i = 0; i < xs.size(); ++i)
                  out[i] = ana::smoothed_eval(f, noise, xs[i]);
              return out;
          },
          py::arg("f"), py::arg("noise"), py::arg("xs"),
          "Vectorized smoothed_eval over a 1-D array.");
    m.def("smoothed_derivative_curve",
          [](const ana::MultiStepFn& f, const ana::NoiseModel& noise, const Eigen::VectorXd& xs) {
              Eigen::VectorXd out(xs.size());
              for (Eigen::Index i = 0; i < xs.size(); ++i)
                  out[i] = ana::smoothed_derivative(f, noise, xs[i]);
              return out;
          },
          py::arg("f"), py::arg("noise"), py::arg("xs"),
          "Vectorized smoothed_derivative over a 1-D array.");

    // ------------------------------------------------------------- schedule
    py::class_<ana::AnnealPolicy>(m, "AnnealPolicy",
                                  "Per-layer noise magnitude over training epochs.")
        .def(py::init<>())
        .def_readwrite("mode", &ana::AnnealPolicy::mode)
        .def_readwrite("forward_decay", &ana::AnnealPolicy::forward_decay)
        .def_readwrite("backward_decay", &ana::AnnealPolicy::backward_decay)
        .def_readwrite("sigma_init", &ana::AnnealPolicy::sigma_init)
        .def_readwrite("period", &ana::AnnealPolicy::period)
        .def_readwrite("num_layers", &ana::AnnealPolicy::num_layers)
        .def("validate", &ana::AnnealPolicy::validate);

    m.def("decay_factor", &ana::decay_factor, py::arg("kind"), py::arg("layer"), py::arg("t"),
          py::arg("period"));
    m.def("sigma_at", &ana::sigma_at, py::arg("policy"), py::arg("layer"), py::arg("t"),
          py::arg("pass_"), "Noise width for (layer, epoch, pass). Layers are 1-based.");
    m.attr("DEFAULT_SIGMA_INIT") = ana::kDefaultSigmaInit;
    m.attr("SQRT3") = ana::kSqrt3;

    // ------------------------------------------------------------- networks
    py::class_<ana::SigmaPair>(m, "SigmaPair")
        .def(py::init<>())
        .def(py::init([](double f, double b) {
                 ana::SigmaPair p;
                 p.forward = f;
                 p.backward = b;
                 return p;
             }),
             py::arg("forward"), py::arg("backward"))
        .def_readwrite("forward", &ana::SigmaPair::forward)
        .def_readwrite("backward", &ana::SigmaPair::backward);

    py::class_<ana::Network>(m, "Network", "Feedforward stack of quantized stages.")
        .def_property_readonly("input_dim",
                               [](const ana::Network& n) { return n.input_dim; })
        .def_property_readonly("num_groups",
                               [](const ana::Network& n) { return n.num_groups; })
        .def_property_readonly("num_stages",
                               [](const ana::Network& n) { return n.stages.size(); });

    py::class_<ana::Rng>(m, "Rng", "Deterministic generator with a pinned algorithm.")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("uniform", [](ana::Rng& r) { return r.uniform(); })
        .def("gauss", &ana::Rng::gauss)
        .def("below", &ana::Rng::below, py::arg("n"));

    py::class_<ana::MlpOptions>(m, "MlpOptions")
        .def(py::init<>())
        .def_readwrite("in_dim", &ana::MlpOptions::in_dim)
        .def_readwrite("hidden", &ana::MlpOptions::hidden)
        .def_readwrite("out_dim", &ana::MlpOptions::out_dim)
        .def_readwrite("batchnorm", &ana::MlpOptions::batchnorm)
        .def_readwrite("quantize_weights", &ana::MlpOptions::quantize_weights)
        .def_readwrite("quantize_acts", &ana::MlpOptions::quantize_acts);

    m.def("build_mlp", &ana::build_mlp, py::arg("options"), py::arg("rng"),
          "Multilayer perceptron with quantized weights/activations.");
    m.def("sigmas_from_policy", &ana::sigmas_from_policy, py::arg("policy"), py::arg("epoch"),
          "Noise pair for every annealing group at an epoch.");
    m.def("net_eval",
          [](const ana::Network& net, const ana::Matrix& X, const ana::GroupSigmas& sigmas) {
              return ana::net_eval(net, X, sigmas);
          },
          py::arg("net"), py::arg("X"), py::arg("sigmas"),
          "Evaluation-mode smoothed forward pass (columns are samples).");
    m.def("quantized_inference",
          [](const ana::Network& net, const ana::Matrix& X) {
              return ana::quantized_inference(net, X);
          },
          py::arg("net"), py::arg("X"),
          "Exact discrete forward pass: every noise width at zero.");
    m.def("accuracy", &ana::accuracy, py::arg("logits"), py::arg("labels"),
          "Argmax classification accuracy (ties to the lowest index).");
    m.def("eval_accuracy", &ana::eval_accuracy, py::arg("net"), py::arg("X"), py::arg("labels"),
          py::arg("sigmas"), py::arg("batch_size") = 1024,
          py::call_guard<py::gil_scoped_release>());

    // ----------------------------------------------------------- checkpoint
    py::class_<ana::LoadedCheckpoint>(m, "LoadedCheckpoint")
        .def_readonly("net", &ana::LoadedCheckpoint::net)
        .def_readonly("epoch", &ana::LoadedCheckpoint::epoch);
    m.def("save_checkpoint", &ana::save_checkpoint, py::arg("path"), py::arg("net"),
          py::arg("epoch"));
    m.def("load_checkpoint", &ana::load_checkpoint, py::arg("path"));

    // -------------------------------------------------------------- dataset
    py::class_<ana::Dataset>(m, "Dataset", "Columns are samples; rows are features.")
        .def(py::init<>())
        .def_readwrite("X", &ana::Dataset::X)
        .def_readwrite("labels", &ana::Dataset::labels)
        .def_readwrite("classes", &ana::Dataset::classes)
        .def_property_readonly("size", &ana::Dataset::size)
        .def_property_readonly("features", &ana::Dataset::features);
    m.def("load_idx", &ana::load_idx, py::arg("images_path"), py::arg("labels_path"),
          py::arg("mean") = 0.0, py::arg("stddev") = 1.0);
    m.def("load_cifar_binary", &ana::load_cifar_binary, py::arg("path"));
    m.def("synth_lipschitz", &ana::synth_lipschitz, py::arg("name"), py::arg("n_samples"),
          py::arg("seed"), "Deterministic synthetic sets: blobs, xor, field.");

    // --------------------------------------------------------------- config
    py::class_<ana::ExperimentConfig>(m, "ExperimentConfig",
                                      "Flat key = value experiment description.")
        .def(py::init<>())
        .def_readwrite("layers", &ana::ExperimentConfig::layers)
        .def_readwrite("quantizer", &ana::ExperimentConfig::quantizer)
        .def_readwrite("batchnorm", &ana::ExperimentConfig::batchnorm)
        .def_readwrite("quantize_weights", &ana::ExperimentConfig::quantize_weights)
        .def_readwrite("quantize_acts", &ana::ExperimentConfig::quantize_acts)
        .def_readwrite("policy_mode", &ana::ExperimentConfig::policy_mode)
        .def_readwrite("forward_decay", &ana::ExperimentConfig::forward_decay)
        .def_readwrite("backward_decay", &ana::ExperimentConfig::backward_decay)
        .def_readwrite("sigma_init", &ana::ExperimentConfig::sigma_init)
        .def_readwrite("period", &ana::ExperimentConfig::period)
        .def_readwrite("lr", &ana::ExperimentConfig::lr)
        .def_readwrite("lr_drop_to", &ana::ExperimentConfig::lr_drop_to)
        .def_readwrite("lr_drop_epoch", &ana::ExperimentConfig::lr_drop_epoch)
        .def_readwrite("batch_size", &ana::ExperimentConfig::batch_size)
        .def_readwrite("loss", &ana::ExperimentConfig::loss)
        .def_readwrite("dataset_name", &ana::ExperimentConfig::dataset_name)
        .def_readwrite("dataset_path", &ana::ExperimentConfig::dataset_path)
        .def_readwrite("dataset_test_path", &ana::ExperimentConfig::dataset_test_path)
        .def_readwrite("normalize_mean", &ana::ExperimentConfig::normalize_mean)
        .def_readwrite("normalize_std", &ana::ExperimentConfig::normalize_std)
        .def_readwrite("synth_train", &ana::ExperimentConfig::synth_train)
        .def_readwrite("synth_val", &ana::ExperimentConfig::synth_val)
        .def_readwrite("epochs", &ana::ExperimentConfig::epochs)
        .def_readwrite("seed", &ana::ExperimentConfig::seed)
        .def_readwrite("csv_path", &ana::ExperimentConfig::csv_path)
        .def_readwrite("checkpoint_path", &ana::ExperimentConfig::checkpoint_path);

    m.def("parse_config_text", &ana::parse_config_text, py::arg("text"));
    m.def("load_config", &ana::load_config, py::arg("path"));
    m.def("serialize_config", &ana::serialize_config, py::arg("config"));
    m.def("validate_config", &ana::validate_config, py::arg("config"));
    m.def("policy_from_config", &ana::policy_from_config, py::arg("config"),
          py::arg("num_groups"));
    m.def("format_double", &ana::format_double, py::arg("value"),
          "Shortest round-trip decimal text for a double.");

    // ----------------------------------------------------------- experiment
    py::class_<ana::ExperimentResult>(m, "ExperimentResult")
        .def_readonly("epochs", &ana::ExperimentResult::epochs)
        .def_readonly("final_train_loss", &ana::ExperimentResult::final_train_loss)
        .def_readonly("final_train_acc", &ana::ExperimentResult::final_train_acc)
        .def_readonly("final_noisy_acc", &ana::ExperimentResult::final_noisy_acc)
        .def_readonly("final_quantized_acc", &ana::ExperimentResult::final_quantized_acc)
        .def_readonly("csv_path", &ana::ExperimentResult::csv_path)
        .def_readonly("checkpoint_path", &ana::ExperimentResult::checkpoint_path);

    m.def("run_experiment",
          [](const ana::ExperimentConfig& cfg) {
              py::gil_scoped_release release;
              return ana::run_experiment(cfg);
          },
          py::arg("config"),
          "Full deterministic training run: CSV metrics plus a checkpoint.");
    m.def("run_experiment_on",
          [](const ana::ExperimentConfig& cfg, const ana::Dataset& train,
             const ana::Dataset& val) {
              py::gil_scoped_release release;
              return ana::run_experiment(cfg, train, val);
          },
          py::arg("config"), py::arg("train"), py::arg("val"),
          "Training run on caller-supplied datasets.");

    // ----------------------------------------------------------- box / grid
    py::class_<ana::Box>(m, "Box", "Axis-aligned box with per-endpoint closedness.")
        .def(py::init([](std::vector<double> lo, std::vector<double> hi,
                         std::vector<bool> lo_closed, std::vector<bool> hi_closed) {
                 ana::Box b;
                 b.lo = std::move(lo);
                 b.hi = std::move(hi);
                 for (bool v : lo_closed) b.lo_closed.push_back(v ? 1 : 0);
                 for (bool v : hi_closed) b.hi_closed.push_back(v ? 1 : 0);
                 b.validate();
                 return b;
             }),
             py::arg("lo"), py::arg("hi"), py::arg("lo_closed"), py::arg("hi_closed"))
        .def_static("closed", &ana::Box::closed, py::arg("lo"), py::arg("hi"))
        .def_property_readonly("dims", &ana::Box::dims)
        .def("contains",
             [](const ana::Box& b, const Eigen::VectorXd& x) {
                 check_dims(x.size(), static_cast<Eigen::Index>(b.dims()), "contains");
                 return b.contains(x.data());
             },
             py::arg("x"));

    py::class_<ana::BoxIndicator>(m, "BoxIndicator",
                                  "Two-layer ternary network computing a box membership bit.")
        .def_readonly("n0", &ana::BoxIndicator::n0)
        .def_readonly("w1", &ana::BoxIndicator::w1)
        .def_readonly("b1", &ana::BoxIndicator::b1)
        .def("eval",
             [](const ana::BoxIndicator& ind, const Eigen::VectorXd& x) {
                 check_dims(x.size(), ind.n0, "eval");
                 return ind.eval(x.data());
             },
             py::arg("x"));
    m.def("build_box_indicator", &ana::build_box_indicator, py::arg("box"));

    py::class_<ana::GridApproximator>(m, "GridApproximator",
                                      "Three-layer one-hot cell selector plus midpoint readout.")
        .def_readonly("n0", &ana::GridApproximator::n0)
        .def_readonly("n", &ana::GridApproximator::n)
        .def_readonly("N", &ana::GridApproximator::N)
        .def_readonly("S", &ana::GridApproximator::S)
        .def_readonly("delta", &ana::GridApproximator::delta)
        .def_readonly("w3", &ana::GridApproximator::w3);

    m.def("build_grid_approximator",
          [](const py::function& f, double lambda_, double epsilon, double S, int n0) {
              return ana::build_grid_approximator(wrap_target(f, n0), lambda_, epsilon, S, n0);
          },
          py::arg("f"), py::arg("lambda_"), py::arg("epsilon"), py::arg("S"), py::arg("n0"),
          "Grid QNN with certified sup error <= epsilon for lambda-Lipschitz f on [0, S]^n0.");
    m.def("eval_qnn",
          [](const ana::GridApproximator& net, const Eigen::VectorXd& x) {
              check_dims(x.size(), net.n0, "eval_qnn");
              return ana::eval_qnn(net, x);
          },
          py::arg("net"), py::arg("x"));
    m.def("eval_qnn_batch",
          [](const ana::GridApproximator& net, const ana::Matrix& X) {
              check_dims(X.rows(), net.n0, "eval_qnn_batch");
              return Eigen::VectorXd(ana::eval_qnn_batch(net, X).transpose());
          },
          py::arg("net"), py::arg("X"), "Columns are points; returns one value per column.");
    m.def("sup_error_estimate",
          [](const ana::GridApproximator& net, const py::function& f, long n_samples) {
              return ana::sup_error_estimate(net, wrap_target(f, net.n0), n_samples);
          },
          py::arg("net"), py::arg("f"), py::arg("n_samples"));
    m.def("radical_inverse", &ana::radical_inverse, py::arg("index"), py::arg("base"));
    m.def("box_to_network",
          [](const ana::BoxIndicator& ind) { return ana::to_network(ind); }, py::arg("indicator"),
          "Export the indicator as an executable stage stack.");
    m.def("grid_to_network",
          [](const ana::GridApproximator& net) { return ana::to_network(net); }, py::arg("net"),
          "Export the grid approximator as an executable stage stack.");

    // --------------------------------------------------------------- checks
    py::class_<ana::CheckReport>(m, "CheckReport")
        .def_readonly("ok", &ana::CheckReport::pass)
        .def_readonly("worst", &ana::CheckReport::worst)
        .def_readonly("detail", &ana::CheckReport::detail)
        .def("__repr__", [](const ana::CheckReport& r) {
            return std::string("CheckReport(ok=") + (r.pass ? "True" : "False") +
                   ", detail='" + r.detail + "')";
        });

    m.def("check_smoothing_identity",
          [](std::int64_t quad_n) {
              ana::SmoothingCheckParams p;
              p.quad_n = quad_n;
              return ana::check_smoothing_identity(p);
          },
          py::arg("quad_n") = 1000000, py::call_guard<py::gil_scoped_release>());
    m.def("check_derivative_identity",
          []() { return ana::check_derivative_identity(); },
          py::call_guard<py::gil_scoped_release>());
    m.def("check_lipschitz_bound", []() { return ana::check_lipschitz_bound(); },
          py::call_guard<py::gil_scoped_release>());
    m.def("check_network_gradient",
          [](std::uint64_t seed) {
              ana::GradientCheckParams p;
              p.seed = seed;
              return ana::check_network_gradient(p);
          },
          py::arg("seed") = 7, py::call_guard<py::gil_scoped_release>());
    m.def("check_approximation",
          [](long samples_1d, long samples_2d) {
              ana::ApproximationCheckParams p;
              p.samples_1d = samples_1d;
              p.samples_2d = samples_2d;
              return ana::check_approximation(p);
          },
          py::arg("samples_1d") = 10000, py::arg("samples_2d") = 100000,
          py::call_guard<py::gil_scoped_release>());
    m.def("check_box_exactness",
          [](long random_points, std::uint64_t seed) {
              ana::BoxCheckParams p;
              p.random_points = random_points;
              p.seed = seed;
              return ana::check_box_exactness(p);
          },
          py::arg("random_points") = 100000, py::arg("seed") = 11,
          py::call_guard<py::gil_scoped_release>());
}
