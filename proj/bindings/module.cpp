#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lorasim/adapter.hpp"
#include "lorasim/engine.hpp"
#include "lorasim/memory.hpp"
#include "lorasim/predictor.hpp"
#include "lorasim/prefetch.hpp"

namespace py = pybind11;
using namespace lorasim;

namespace {

std::vector<double> model_forward(PredictorModel& model,
                                  const std::vector<std::uint32_t>& adapters,
                                  const std::vector<std::vector<double>>& windows) {
  if (adapters.size() != windows.size())
    throw ValidationError("adapters and windows differ in length");
  std::vector<TrainingExample> batch(adapters.size());
  for (std::size_t i = 0; i < adapters.size(); ++i) {
    batch[i].adapter = adapters[i];
    batch[i].window = windows[i];
  }
  Eigen::VectorXd p = model.forward(batch);
  return {p.data(), p.data() + p.size()};
}

double model_train_step(PredictorModel& model,
                        const std::vector<std::uint32_t>& adapters,
                        const std::vector<std::vector<double>>& windows,
                        const std::vector<double>& labels) {
  std::vector<TrainingExample> batch(adapters.size());
  for (std::size_t i = 0; i < adapters.size(); ++i) {
    batch[i].adapter = adapters[i];
    batch[i].window = windows[i];
    batch[i].label = labels[i];
  }
  return model.train_step(batch);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "simulator core for multi-adapter LLM serving: demand prediction, "
            "prefetching, and paged adapter memory";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  // ---- adapter model ----
  py::class_<LoraDims>(m, "LoraDims")
      .def(py::init([](std::uint32_t d, std::uint32_t k, std::uint32_t r,
                       std::uint32_t adapted, std::uint32_t bytes_per_param) {
             LoraDims dims{d, k, r, adapted, bytes_per_param};
             dims.validate();
             return dims;
           }),
           py::arg("d") = 4096, py::arg("k") = 4096, py::arg("r") = 8,
           py::arg("adapted_matrices") = 64, py::arg("bytes_per_param") = 2)
      .def_readonly("d", &LoraDims::d)
      .def_readonly("k", &LoraDims::k)
      .def_readonly("r", &LoraDims::r);
  m.def("param_count",
        [](std::uint32_t d, std::uint32_t k, std::uint32_t r, std::uint32_t adapted) {
          return param_count(LoraDims{d, k, r, adapted, 2});
        },
        py::arg("d") = 4096, py::arg("k") = 4096, py::arg("r") = 8,
        py::arg("adapted_matrices") = 64);
  m.def("adapter_size_bytes", [](std::uint32_t rank) {
    return AdapterSizeTable{}.bytes_for(rank);
  });

  // ---- memory ----
  py::enum_<AllocStatus>(m, "AllocStatus")
      .value("ok", AllocStatus::ok)
      .value("out_of_memory", AllocStatus::out_of_memory)
      .value("fragmentation_failure", AllocStatus::fragmentation_failure);

  py::class_<FragmentationReport>(m, "FragmentationReport")
      .def_readonly("external_frag", &FragmentationReport::external_frag)
      .def_readonly("internal_frag", &FragmentationReport::internal_frag)
      .def_readonly("utilization", &FragmentationReport::utilization);

  py::class_<PagePool>(m, "PagePool")
      .def(py::init<std::uint64_t, std::uint32_t>(), py::arg("page_bytes"),
           py::arg("total_pages"))
      .def("alloc", &PagePool::alloc)
      .def("free", &PagePool::free)
      .def("translate", &PagePool::translate)
      .def("compact", &PagePool::compact)
      .def("pages_needed", &PagePool::pages_needed)
      .def("free_pages", &PagePool::free_pages)
      .def("total_pages", &PagePool::total_pages)
      .def("report", &PagePool::report)
      .def("dump", [](const PagePool& p) { return p.dump().dump(); });

  py::class_<BlockArena>(m, "BlockArena")
      .def(py::init<std::uint64_t>(), py::arg("total_bytes"))
      .def("alloc", &BlockArena::alloc)
      .def("free", &BlockArena::free)
      .def("free_bytes", &BlockArena::free_bytes)
      .def("largest_free", &BlockArena::largest_free)
      .def("fragmentation_failures", &BlockArena::fragmentation_failures)
      .def("report", &BlockArena::report)
      .def("dump", [](const BlockArena& a) { return a.dump().dump(); });

  // ---- workload ----
  py::class_<Request>(m, "Request")
      .def_readonly("arrival_ms", &Request::arrival_ms)
      .def_readonly("adapter_id", &Request::adapter_id)
      .def_readonly("input_tokens", &Request::input_tokens)
      .def_readonly("output_tokens", &Request::output_tokens);

  m.def("generate_synthetic",
        [](std::uint32_t num_adapters, double base_rate, double duration_s,
           std::uint64_t seed, std::uint32_t hot_set_size, double hot_rotation_s,
           double hot_share, double diurnal_amplitude, double period_s,
           double burstiness_cv) {
          SyntheticProfile p;
          p.num_adapters = num_adapters;
          p.base_rate = base_rate;
          p.hot_set_size = hot_set_size;
          p.hot_rotation_s = hot_rotation_s;
          p.hot_share = hot_share;
          p.diurnal_amplitude = diurnal_amplitude;
          p.period_s = period_s;
          p.burstiness_cv = burstiness_cv;
          return generate_synthetic(p, duration_s, seed);
        },
        py::arg("num_adapters") = 20, py::arg("base_rate") = 50.0,
        py::arg("duration_s") = 60.0, py::arg("seed") = 42,
        py::arg("hot_set_size") = 5, py::arg("hot_rotation_s") = 7.0,
        py::arg("hot_share") = 0.9, py::arg("diurnal_amplitude") = 0.0,
        py::arg("period_s") = 3600.0, py::arg("burstiness_cv") = 1.0);

  m.def("ingest_trace",
        [](const std::string& path, const std::string& mapping, double rate_scale,
           std::uint64_t seed) {
          return ingest_trace(path, TraceMapping::parse(mapping), rate_scale,
                              LengthDistribution{}, seed);
        },
        py::arg("path"), py::arg("mapping") = "identity",
        py::arg("rate_scale") = 1.0, py::arg("seed") = 42);

  // ---- predictor ----
  m.def("cross_entropy", &cross_entropy);

  py::class_<PredictorModel>(m, "PredictorModel")
      .def(py::init([](std::uint32_t window, std::uint32_t hidden, std::uint32_t layers,
                       std::uint32_t embedding_dim, std::uint32_t num_adapters,
                       double learning_rate, std::uint64_t seed) {
             PredictorConfig cfg;
             cfg.window = window;
             cfg.hidden = hidden;
             cfg.layers = layers;
             cfg.embedding_dim = embedding_dim;
             cfg.num_adapters = num_adapters;
             cfg.learning_rate = learning_rate;
             return PredictorModel(cfg, seed);
           }),
           py::arg("window") = 30, py::arg("hidden") = 64, py::arg("layers") = 2,
           py::arg("embedding_dim") = 8, py::arg("num_adapters") = 1,
           py::arg("learning_rate") = 1e-3, py::arg("seed") = 42)
      .def("predict", &PredictorModel::predict)
      .def("forward", &model_forward)
      .def("train_step", &model_train_step)
      .def("parameter_count", &PredictorModel::parameter_count)
      .def("save", &PredictorModel::save)
      .def_static("load", &PredictorModel::load);

  py::class_<OnlinePredictor>(m, "OnlinePredictor")
      .def(py::init([](std::uint32_t num_adapters, std::uint32_t window,
                       std::uint32_t hidden, std::uint32_t embedding_dim,
                       double interval_ms, std::uint32_t train_every,
                       std::uint64_t seed) {
             OnlinePredictorConfig cfg;
             cfg.model.num_adapters = num_adapters;
             cfg.model.window = window;
             cfg.model.hidden = hidden;
             cfg.model.embedding_dim = embedding_dim;
             cfg.interval_ms = interval_ms;
             cfg.train_every = train_every;
             return OnlinePredictor(cfg, seed);
           }),
           py::arg("num_adapters"), py::arg("window") = 30, py::arg("hidden") = 64,
           py::arg("embedding_dim") = 8, py::arg("interval_ms") = 1000.0,
           py::arg("train_every") = 100, py::arg("seed") = 42)
      .def("observe", &OnlinePredictor::observe)
      .def("predict_all",
           [](OnlinePredictor& p, double now_ms) {
             std::vector<std::pair<std::uint32_t, double>> out;
             for (const auto& pred : p.predict_all(now_ms))
               out.emplace_back(pred.adapter, pred.probability);
             return out;
           })
      .def("train_steps", &OnlinePredictor::train_steps)
      .def("observed", &OnlinePredictor::observed);

  // ---- prefetch scoring ----
  m.def("eviction_score",
        [](double last_access_ms, double now_ms, double decayed_count, double max_freq,
           double prediction, double alpha, double beta, double gamma, double tau_s) {
          PrefetchPolicy policy;
          policy.alpha = alpha;
          policy.beta = beta;
          policy.gamma = gamma;
          policy.tau_ms = tau_s * 1000.0;
          AdapterDynamics d;
          d.status = Residency::resident;
          d.last_access_ms = last_access_ms;
          d.decayed_count = decayed_count;
          d.decay_stamp_ms = now_ms;
          d.prediction = prediction;
          return eviction_score(d, policy, now_ms, max_freq);
        },
        py::arg("last_access_ms"), py::arg("now_ms"), py::arg("decayed_count"),
        py::arg("max_freq"), py::arg("prediction"), py::arg("alpha") = 0.3,
        py::arg("beta") = 0.3, py::arg("gamma") = 0.4, py::arg("tau_s") = 60.0);

  // ---- engine ----
  m.def("run_simulation",
        [](const std::string& config_path,
           const std::vector<std::pair<std::string, std::string>>& overrides,
           const std::string& out_dir) {
          RunConfig cfg = RunConfig::load(config_path, overrides);
          cfg.validate();
          auto result = run_simulation(cfg);
          if (!out_dir.empty()) write_outputs(result, out_dir);
          return result.metrics.to_json().dump();
        },
        py::arg("config_path"),
        py::arg("overrides") = std::vector<std::pair<std::string, std::string>>{},
        py::arg("out_dir") = "",
        "Runs one simulation from a config file; returns the metrics JSON "
        "string and optionally writes the output files.");

  m.def("compare",
        [](const std::string& config_path, const std::string& matrix,
           const std::vector<std::pair<std::string, std::string>>& overrides) {
          RunConfig cfg = RunConfig::load(config_path, overrides);
          cfg.validate();
          auto cells = matrix_by_name(matrix);
          auto results = compare_policies(cfg, cells);
          nlohmann::json j = nlohmann::json::object();
          for (std::size_t i = 0; i < cells.size(); ++i)
            j[cells[i].name] = results[i].metrics.to_json();
          return j.dump();
        },
        py::arg("config_path"), py::arg("matrix") = "ablation",
        py::arg("overrides") = std::vector<std::pair<std::string, std::string>>{});
}
