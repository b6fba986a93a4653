#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "chronos/chronos.hpp"

namespace py = pybind11;
using namespace chronos;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<std::uint64_t> to_array(std::span<const RecordId> v) {
  return py::array_t<std::uint64_t>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::tuple to_tuple(const QueryResult& r) {
  return py::make_tuple(to_array(r.ids), to_array(r.distances_sq));
}

std::vector<std::vector<double>> rows_of(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::DimensionMismatch, "expected a 2-d array");
  const auto r = a.unchecked<2>();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) out[i].assign(a.data(i, 0), a.data(i, 0) + r.shape(1));
  return out;
}

Dataset dataset_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& values,
                           std::optional<std::vector<RecordId>> ids) {
  auto rows = rows_of(values);
  if (ids && ids->size() != rows.size()) throw Error(ErrorKind::SizeMismatch, "ids and rows differ in count");
  Dataset ds;
  ds.provenance = "python";
  for (std::size_t i = 0; i < rows.size(); ++i) ds.series.push_back({ids ? (*ids)[i] : i, std::move(rows[i])});
  validate(ds);
  return ds;
}

py::array_t<double> dataset_values(const Dataset& ds) {
  const auto n = static_cast<py::ssize_t>(ds.size());
  const auto len = static_cast<py::ssize_t>(ds.length());
  py::array_t<double> out({n, len});
  auto w = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i)
    for (py::ssize_t j = 0; j < len; ++j) w(i, j) = ds.series[i].values[j];
  return out;
}

py::dict row_dict(const EvalRow& r) {
  py::dict d;
  d["method"] = r.method;
  d["m"] = r.m;
  d["k"] = r.k;
  d["rho"] = r.rho;
  d["delta"] = r.delta;
  d["delta_max"] = r.delta_max;
  d["approx_loss"] = r.approx_loss;
  d["q50_us"] = r.q50_us;
  d["q99_us"] = r.q99_us;
  d["embed_us"] = r.embed_us;
  d["queries"] = r.queries;
  return d;
}

}  // namespace

PYBIND11_MODULE(_chronos, m) {
  m.doc() = "Learned embeddings for top-k correlation search over time series";
  m.attr("__version__") = "0.1.0";

  static PyObject* error_type = PyErr_NewException("chronos.Error", PyExc_RuntimeError, nullptr);
  m.attr("Error") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
      inst.attr("kind") = std::string(to_string(e.kind()));
      inst.attr("exit_code") = exit_code(e.kind());
      PyErr_SetObject(error_type, inst.ptr());
    }
  });

  // core
  py::class_<NormalizedSeries>(m, "NormalizedSeries")
      .def_property_readonly("values", [](const NormalizedSeries& s) { return to_array(s.values); })
      .def_readonly("mean", &NormalizedSeries::mean)
      .def_readonly("stddev", &NormalizedSeries::stddev)
      .def("scale", &NormalizedSeries::scale)
      .def("__len__", &NormalizedSeries::size);

  m.def("normalize", [](const std::vector<double>& v) { return normalize(v); }, py::arg("values"));
  m.def("pearson", [](const std::vector<double>& a, const std::vector<double>& b) { return pearson(a, b); });
  m.def("dft", [](const std::vector<double>& x) { return dft(x).coeffs; }, py::arg("values"),
        "Scaled DFT (1/sqrt(M)) of a real series.");
  m.def(
      "truncated_distance_sq",
      [](const std::vector<Complex>& a, const std::vector<Complex>& b, std::size_t mm) {
        return truncated_distance_sq(FrequencyVector{a}, FrequencyVector{b}, mm);
      },
      py::arg("a"), py::arg("b"), py::arg("m"));

  // embed
  py::class_<DenseLayer>(m, "DenseLayer")
      .def(py::init<>())
      .def(py::init([](Matrix w, Vector b) { return DenseLayer{std::move(w), std::move(b)}; }))
      .def_readwrite("weights", &DenseLayer::weights)
      .def_readwrite("bias", &DenseLayer::bias);

  py::class_<NetworkParams>(m, "Network")
      .def(py::init<>())
      .def_readwrite("layers", &NetworkParams::layers)
      .def_readwrite("seed", &NetworkParams::seed)
      .def_property_readonly("input_width", &NetworkParams::input_width)
      .def_property_readonly("output_width", &NetworkParams::output_width)
      .def("validate", &NetworkParams::validate)
      .def("forward", [](const NetworkParams& p, const std::vector<double>& x) { return to_array(forward(p, x)); })
      .def("embed", [](const NetworkParams& p, const NormalizedSeries& ns) {
        return to_array(embed(LearnedEmbedder{p}, ns));
      })
      .def("save", [](const NetworkParams& p, const std::filesystem::path& path) { save_model(p, path); })
      .def_static("load", &load_model)
      .def(py::self == py::self);

  m.def("features", &features, py::arg("series"), py::arg("max_width") = 0);
  m.def("feature_width", &feature_width, py::arg("length"));
  m.def("embed_dft", [](const NormalizedSeries& ns, std::size_t mm) { return to_array(embed_dft_baseline(ns, mm)); },
        py::arg("series"), py::arg("m"));
  m.def("embed_downsample",
        [](const NormalizedSeries& ns, std::size_t mm) { return to_array(embed_downsample(ns, mm)); },
        py::arg("series"), py::arg("m"));

  // train
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_static("desk", &TrainConfig::desk)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("hidden_size", &TrainConfig::hidden_size)
      .def_readwrite("m", &TrainConfig::m)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("log_every", &TrainConfig::log_every)
      .def_property(
          "loss", [](const TrainConfig& c) { return std::string(to_string(c.loss)); },
          [](TrainConfig& c, const std::string& s) { c.loss = parse_loss_kind(s); })
      .def("validate", &TrainConfig::validate);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("initial_loss", &TrainResult::initial_loss)
      .def_readonly("final_loss", &TrainResult::final_loss)
      .def_property_readonly("log", [](const TrainResult& r) {
        py::list out;
        for (const auto& row : r.log) out.append(py::make_tuple(row.iteration, row.train_loss, row.val_loss, row.wall_ms));
        return out;
      });

  m.def("init_network", &init_network, py::arg("input"), py::arg("hidden"), py::arg("output"), py::arg("seed"));
  m.def(
      "train",
      [](const Dataset& ds, const SplitDataset& sp, const TrainConfig& cfg) {
        py::gil_scoped_release release;
        return train(ds, sp, cfg);
      },
      py::arg("dataset"), py::arg("split"), py::arg("config"));

  // datasets
  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&dataset_from_array), py::arg("values"), py::arg("ids") = py::none())
      .def("__len__", &Dataset::size)
      .def_property_readonly("length", &Dataset::length)
      .def_property_readonly("ids",
                             [](const Dataset& ds) {
                               std::vector<RecordId> ids;
                               for (const auto& s : ds.series) ids.push_back(s.id);
                               return to_array(ids);
                             })
      .def_property_readonly("values", &dataset_values)
      .def_readonly("provenance", &Dataset::provenance)
      .def_readonly("dropped_constant", &Dataset::dropped_constant)
      .def("save_csv", [](const Dataset& ds, const std::filesystem::path& p) { save_csv(ds, p); });

  py::class_<SplitDataset>(m, "Split")
      .def_readonly("train", &SplitDataset::train)
      .def_readonly("validation", &SplitDataset::validation)
      .def_readonly("test", &SplitDataset::test)
      .def(py::self == py::self);

  m.def(
      "load_csv",
      [](const std::filesystem::path& p, const std::string& layout) {
        if (layout == "plain") return load_csv(p, CsvLayout::Plain);
        if (layout == "id") return load_csv(p, CsvLayout::WithId);
        if (layout == "ucr") return load_csv(p, CsvLayout::Ucr);
        throw Error(ErrorKind::InvalidArgument, "layout must be plain, id or ucr");
      },
      py::arg("path"), py::arg("layout") = "id");
  m.def(
      "split",
      [](const Dataset& ds, std::uint64_t seed, double tr, double va, double te) {
        return split(ds, SplitRatios{tr, va, te}, seed);
      },
      py::arg("dataset"), py::arg("seed") = 0, py::arg("train") = 0.8, py::arg("validation") = 0.1,
      py::arg("test") = 0.1);
  m.def("gen_example1", &gen_example1, py::arg("n"), py::arg("length"), py::arg("seed"));
  m.def("gen_example2", &gen_example2, py::arg("n"), py::arg("length"), py::arg("m"), py::arg("eps"),
        py::arg("seed"));

  // index
  py::class_<KdTree>(m, "KdTree")
      .def(py::init([](const std::vector<RecordId>& ids,
                       const py::array_t<double, py::array::c_style | py::array::forcecast>& points) {
             const auto rows = rows_of(points);
             return KdTree::build(ids, rows);
           }),
           py::arg("ids"), py::arg("points"))
      .def("__len__", &KdTree::size)
      .def_property_readonly("dim", &KdTree::dim)
      .def_property_readonly("height", &KdTree::height)
      .def("top_k", [](const KdTree& t, const std::vector<double>& q, std::size_t k) { return to_tuple(t.top_k(q, k)); },
           py::arg("query"), py::arg("k"))
      .def("within_radius",
           [](const KdTree& t, const std::vector<double>& q, double r2) { return to_tuple(t.within_radius(q, r2)); },
           py::arg("query"), py::arg("radius_sq"))
      .def("save", &KdTree::save)
      .def_static("load", &KdTree::load);

  // eval
  m.def(
      "exact_top_k",
      [](const Dataset& ds, const std::vector<RecordId>& pool_ids, const std::vector<double>& query, std::size_t k,
         std::optional<RecordId> exclude) {
        const CandidatePool pool(ds, pool_ids);
        return to_tuple(exact_top_k(normalize(query), k, pool, exclude));
      },
      py::arg("dataset"), py::arg("pool_ids"), py::arg("query"), py::arg("k"), py::arg("exclude") = py::none());
  m.def("precision", [](const std::vector<RecordId>& a, const std::vector<RecordId>& e, std::size_t k) {
    return precision(a, e, k);
  });
  m.def(
      "sweep",
      [](const Dataset& ds, const SplitDataset& sp, const py::list& methods, const std::vector<std::size_t>& ks,
         std::uint64_t seed, bool timing) {
        // Each entry is (name, m, embedder) where embedder is a Network, "dft",
        // "downsample" or None for exact search.
        std::vector<MethodEmbedding> specs;
        for (const auto& item : methods) {
          const auto t = item.cast<py::tuple>();
          MethodEmbedding spec{t[0].cast<std::string>(), t[1].cast<std::size_t>(), std::nullopt};
          const py::object e = t[2];
          if (py::isinstance<NetworkParams>(e)) {
            spec.embedder = LearnedEmbedder{e.cast<NetworkParams>()};
          } else if (py::isinstance<py::str>(e)) {
            const auto kind = e.cast<std::string>();
            if (kind == "dft") spec.embedder = DftTruncation{spec.m};
            else if (kind == "downsample") spec.embedder = DownSample{spec.m};
            else throw Error(ErrorKind::InvalidArgument, "unknown embedder " + kind);
          } else if (!e.is_none()) {
            throw Error(ErrorKind::InvalidArgument, "embedder must be a Network, a string or None");
          }
          specs.push_back(std::move(spec));
        }
        EvalReport report;
        {
          py::gil_scoped_release release;
          report = sweep(ds, sp, specs, SweepConfig{ks, seed, timing});
        }
        py::list rows;
        for (const auto& r : report.rows) rows.append(row_dict(r));
        return rows;
      },
      py::arg("dataset"), py::arg("split"), py::arg("methods"), py::arg("k_values") = std::vector<std::size_t>{10, 100},
      py::arg("seed") = 0, py::arg("timing") = false);
}
