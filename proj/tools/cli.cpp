#include "cli.hpp"

#include <CLI11/CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <type_traits>

#include "chronos/chronos.hpp"

namespace chronos::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Every setting any subcommand understands. Keys in config files use the
// member names; flags use the same names with dashes.
struct RunConfig {
  std::string input;
  std::string format = "plain";
  std::string data;
  std::string split;
  std::string model;
  std::string index;
  std::string out = "chronos-run";
  std::string kind = "example1";
  std::size_t n = 1000;
  std::size_t length = 128;
  double eps = 0.01;
  std::string loss = "order";
  std::vector<std::size_t> m;
  std::vector<std::size_t> k;
  std::optional<double> threshold;
  std::string profile = "full";
  std::size_t hidden = 1024;
  std::size_t batch = 256;
  std::size_t iterations = 10000;
  std::size_t log_every = 100;
  double lr = 0.01;
  std::uint64_t seed = 0;
  std::vector<std::string> methods;
  std::string method = "chronos";
  std::optional<RecordId> id;
  std::string series;
  bool exact = false;
  bool timing = false;
  bool quiet = false;
  std::size_t queries = 1000;
};

[[noreturn]] void usage(const std::string& message) { throw Error(ErrorKind::Usage, message); }

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

template <class T>
void read_value(const json& j, T& target) {
  target = j.get<T>();
}
template <class T>
void read_value(const json& j, std::optional<T>& target) {
  if (j.is_null()) {
    target.reset();
  } else {
    target = j.get<T>();
  }
}
template <class T>
json write_value(const T& value) {
  return json(value);
}
template <class T>
json write_value(const std::optional<T>& value) {
  return value ? json(*value) : json(nullptr);
}

// Flag registration that also knows how to read and write each setting as
// JSON, so that a manifest's config block can be replayed.
class Options {
 public:
  explicit Options(CLI::App& app) : app_(app) {
    app_.add_option("--config", config_path_, "JSON config or manifest; explicit flags take precedence");
  }

  template <class T>
  void add(const std::string& key, T& target, const std::string& help) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = nullptr;
    if constexpr (std::is_same_v<T, bool>) {
      opt = app_.add_flag(flag, target, help);
    } else if constexpr (std::is_same_v<T, std::optional<double>> || std::is_same_v<T, std::optional<RecordId>>) {
      using V = typename T::value_type;
      opt = app_.add_option_function<V>(flag, [&target](const V& v) { target = v; }, help);
    } else {
      opt = app_.add_option(flag, target, help);
      if constexpr (is_vector<T>::value) opt->delimiter(',');
    }
    bindings_.push_back(Binding{key, opt, [&target](const json& j) { read_value(j, target); },
                                [&target] { return write_value(target); }});
  }

  /// Fills every setting not given on the command line from --config.
  void apply_config() {
    for (const auto& b : bindings_) {
      if (b.option->count() > 0) explicit_.insert(b.key);
    }
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    if (!in) throw Error(ErrorKind::MissingArtifact, "cannot open config " + config_path_);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, "config " + config_path_ + ": " + e.what());
    }
    if (doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
    if (!doc.is_object()) throw Error(ErrorKind::ParseError, "config " + config_path_ + " is not a JSON object");
    for (const auto& b : bindings_) {
      if (b.option->count() > 0 || !doc.contains(b.key)) continue;
      try {
        b.read(doc[b.key]);
      } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, "config key '" + b.key + "': " + e.what());
      }
      explicit_.insert(b.key);
    }
  }

  bool is_explicit(const std::string& key) const { return explicit_.count(key) > 0; }

  json dump() const {
    json out = json::object();
    for (const auto& b : bindings_) out[b.key] = b.write();
    return out;
  }

 private:
  struct Binding {
    std::string key;
    CLI::Option* option;
    std::function<void(const json&)> read;
    std::function<json()> write;
  };
  CLI::App& app_;
  std::string config_path_;
  std::vector<Binding> bindings_;
  std::set<std::string> explicit_;
};

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 12);
  return std::string(buf.data(), ptr);
}

CsvLayout parse_layout(const std::string& format) {
  if (format == "plain") return CsvLayout::Plain;
  if (format == "id") return CsvLayout::WithId;
  if (format == "ucr") return CsvLayout::Ucr;
  usage("unknown format '" + format + "' (expected plain, id or ucr)");
}

std::size_t single(const std::vector<std::size_t>& values, const char* name) {
  if (values.size() != 1) usage(std::string("--") + name + " takes exactly one value here");
  return values.front();
}

void apply_profile(RunConfig& cfg, const Options& opts) {
  if (cfg.profile == "full") return;
  if (cfg.profile != "desk") usage("unknown profile '" + cfg.profile + "' (expected full or desk)");
  const auto desk = TrainConfig::desk();
  if (!opts.is_explicit("hidden")) cfg.hidden = desk.hidden_size;
  if (!opts.is_explicit("iterations")) cfg.iterations = desk.iterations;
  if (!opts.is_explicit("batch")) cfg.batch = desk.batch_size;
}

TrainConfig train_config(const RunConfig& cfg, LossKind loss, std::size_t m) {
  TrainConfig tc;
  tc.learning_rate = cfg.lr;
  tc.batch_size = cfg.batch;
  tc.iterations = cfg.iterations;
  tc.hidden_size = cfg.hidden;
  tc.m = m;
  tc.loss = loss;
  tc.seed = cfg.seed;
  tc.log_every = cfg.log_every;
  return tc;
}

Dataset load_data(const RunConfig& cfg) {
  if (cfg.data.empty()) usage("--data is required");
  return load_csv(cfg.data, CsvLayout::WithId);
}

void save_split(const SplitDataset& parts, std::uint64_t seed, const fs::path& path) {
  json doc;
  doc["seed"] = seed;
  doc["train"] = parts.train;
  doc["validation"] = parts.validation;
  doc["test"] = parts.test;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::MissingArtifact, "cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

SplitDataset load_split(const RunConfig& cfg, const Dataset& ds) {
  if (cfg.split.empty()) return split(ds, SplitRatios{}, cfg.seed);
  std::ifstream in(cfg.split);
  if (!in) throw Error(ErrorKind::MissingArtifact, "cannot open split " + cfg.split);
  try {
    const json doc = json::parse(in);
    SplitDataset parts;
    parts.train = doc.at("train").get<std::vector<RecordId>>();
    parts.validation = doc.at("validation").get<std::vector<RecordId>>();
    parts.test = doc.at("test").get<std::vector<RecordId>>();
    return parts;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "split " + cfg.split + ": " + e.what());
  }
}

Embedder make_embedder(const RunConfig& cfg, std::size_t m) {
  if (cfg.method == "chronos") {
    if (cfg.model.empty()) usage("--method chronos needs --model");
    return LearnedEmbedder{load_model(cfg.model)};
  }
  if (cfg.method == "dft") return DftTruncation{m};
  if (cfg.method == "downsample") return DownSample{m};
  usage("unknown method '" + cfg.method + "' (expected chronos, dft or downsample)");
}

fs::path prepare_out(const RunConfig& cfg) {
  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::MissingArtifact, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, const Options& opts, const RunConfig& cfg,
                    const std::vector<fs::path>& artifacts, json extra = json::object()) {
  json doc;
  doc["tool"] = "chronos";
  doc["manifest_version"] = 1;
  doc["command"] = command;
  doc["seed"] = cfg.seed;
  doc["config"] = opts.dump();
  json inputs = json::object();
  for (const auto& path : {cfg.input, cfg.data, cfg.split, cfg.model, cfg.index}) {
    if (!path.empty() && fs::is_regular_file(path)) inputs[path] = hash_file(path);
  }
  doc["inputs"] = inputs;
  json hashes = json::object();
  for (const auto& a : artifacts) hashes[a.filename().string()] = hash_file(a);
  doc["artifacts"] = hashes;
  for (auto& [key, value] : extra.items()) doc[key] = value;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error(ErrorKind::MissingArtifact, "cannot write manifest in " + dir.string());
  out << doc.dump(2) << '\n';
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string field;
  while (std::getline(stream, field, ',')) {
    const auto first = field.find_first_not_of(" \t");
    const auto last = field.find_last_not_of(" \t");
    if (first == std::string::npos) throw Error(ErrorKind::ParseError, "empty value in --series");
    double v = 0.0;
    const char* begin = field.data() + first;
    const char* end = field.data() + last + 1;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
      throw Error(ErrorKind::ParseError, "bad value '" + field + "' in --series");
    }
    values.push_back(v);
  }
  return values;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

using Clock = std::chrono::steady_clock;

double micros(Clock::duration d) { return std::chrono::duration<double, std::micro>(d).count(); }

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<Options> opts;
  std::function<int(Options&)> body;
};

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args) {
    CLI::App app{"Correlation search over time series with learned embeddings", "chronos"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    register_gen(app);
    register_ingest(app);
    register_split(app);
    register_train(app);
    register_index(app);
    register_query(app);
    register_eval(app);
    register_bench(app);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app.exit(e, out_, err_);
      err_ << "usage error: " << e.what() << "\nRun with --help for usage.\n";
      return exit_code(ErrorKind::Usage);
    }
    for (auto& cmd : commands_) {
      if (!cmd.app->parsed()) continue;
      try {
        cmd.opts->apply_config();
        return cmd.body(*cmd.opts);
      } catch (const Error& e) {
        err_ << "error: " << e.what() << '\n';
        return exit_code(e.kind());
      } catch (const std::exception& e) {
        err_ << "error: " << e.what() << '\n';
        return 1;
      }
    }
    return exit_code(ErrorKind::Usage);
  }

 private:
  Command& add_command(CLI::App& app, const std::string& name, const std::string& help) {
    Command cmd;
    cmd.app = app.add_subcommand(name, help);
    cmd.opts = std::make_unique<Options>(*cmd.app);
    commands_.push_back(std::move(cmd));
    return commands_.back();
  }

  void add_training_options(Options& o) {
    o.add("profile", cfg_.profile, "full (paper settings) or desk (hidden 128, 2000 iterations, batch 64)");
    o.add("hidden", cfg_.hidden, "hidden layer width");
    o.add("batch", cfg_.batch, "mini-batch size");
    o.add("iterations", cfg_.iterations, "ADAM steps");
    o.add("lr", cfg_.lr, "learning rate");
    o.add("log_every", cfg_.log_every, "log interval in iterations");
    o.add("quiet", cfg_.quiet, "no progress output");
  }

  void register_gen(CLI::App& app) {
    auto& cmd = add_command(app, "gen", "Generate a synthetic dataset");
    auto& o = *cmd.opts;
    o.add("kind", cfg_.kind, "example1 (repeated spectrum) or example2 (shared low frequencies)");
    o.add("n", cfg_.n, "number of series");
    o.add("length", cfg_.length, "series length M");
    o.add("m", cfg_.m, "example2: number of low-noise coefficients");
    o.add("eps", cfg_.eps, "example2: noise scale on the first m coefficients");
    o.add("seed", cfg_.seed, "random seed");
    o.add("out", cfg_.out, "output directory");
    cmd.body = [this](Options& opts) {
      if (cfg_.m.empty()) cfg_.m = {8};
      Dataset ds;
      if (cfg_.kind == "example1") {
        ds = gen_example1(cfg_.n, cfg_.length, cfg_.seed);
      } else if (cfg_.kind == "example2") {
        ds = gen_example2(cfg_.n, cfg_.length, single(cfg_.m, "m"), cfg_.eps, cfg_.seed);
      } else {
        usage("unknown kind '" + cfg_.kind + "' (expected example1 or example2)");
      }
      const auto dir = prepare_out(cfg_);
      save_csv(ds, dir / "data.csv");
      write_manifest(dir, "gen", opts, cfg_, {dir / "data.csv"}, {{"provenance", ds.provenance}});
      out_ << "wrote " << ds.size() << " series of length " << ds.length() << " to " << (dir / "data.csv").string()
           << '\n';
      return 0;
    };
  }

  void register_ingest(CLI::App& app) {
    auto& cmd = add_command(app, "ingest", "Load a CSV or UCR file into the canonical id,values layout");
    auto& o = *cmd.opts;
    o.add("input", cfg_.input, "source file");
    o.add("format", cfg_.format, "plain, id or ucr");
    o.add("out", cfg_.out, "output directory");
    cmd.body = [this](Options& opts) {
      if (cfg_.input.empty()) usage("--input is required");
      const auto ds = load_csv(cfg_.input, parse_layout(cfg_.format));
      const auto dir = prepare_out(cfg_);
      save_csv(ds, dir / "data.csv");
      write_manifest(dir, "ingest", opts, cfg_, {dir / "data.csv"},
                     {{"series", ds.size()}, {"length", ds.length()}, {"dropped_constant", ds.dropped_constant}});
      out_ << "ingested " << ds.size() << " series of length " << ds.length() << " (dropped "
           << ds.dropped_constant << " constant rows)\n";
      return 0;
    };
  }

  void register_split(CLI::App& app) {
    auto& cmd = add_command(app, "split", "Seeded 80/10/10 train/validation/test split");
    auto& o = *cmd.opts;
    o.add("data", cfg_.data, "dataset in id,values layout");
    o.add("seed", cfg_.seed, "random seed");
    o.add("out", cfg_.out, "output directory");
    cmd.body = [this](Options& opts) {
      const auto ds = load_data(cfg_);
      const auto parts = split(ds, SplitRatios{}, cfg_.seed);
      const auto dir = prepare_out(cfg_);
      save_split(parts, cfg_.seed, dir / "split.json");
      write_manifest(dir, "split", opts, cfg_, {dir / "split.json"});
      out_ << "train " << parts.train.size() << " validation " << parts.validation.size() << " test "
           << parts.test.size() << '\n';
      return 0;
    };
  }

  void register_train(CLI::App& app) {
    auto& cmd = add_command(app, "train", "Train an embedding network");
    auto& o = *cmd.opts;
    o.add("data", cfg_.data, "dataset in id,values layout");
    o.add("split", cfg_.split, "split.json (default: split the data with --seed)");
    o.add("loss", cfg_.loss, "approximate or order");
    o.add("m", cfg_.m, "embedding dimension");
    add_training_options(o);
    o.add("seed", cfg_.seed, "random seed");
    o.add("out", cfg_.out, "output directory");
    cmd.body = [this](Options& opts) {
      if (cfg_.m.empty()) cfg_.m = {16};
      apply_profile(cfg_, opts);
      const auto ds = load_data(cfg_);
      const auto parts = load_split(cfg_, ds);
      const auto tc = train_config(cfg_, parse_loss_kind(cfg_.loss), single(cfg_.m, "m"));
      const auto dir = prepare_out(cfg_);
      const auto result = train(ds, parts, tc, progress());
      save_model(result.params, dir / "model.chr");
      write_train_log(result, dir / "train_log.csv");
      write_manifest(dir, "train", opts, cfg_, {dir / "model.chr"},
                     {{"initial_loss", result.initial_loss}, {"final_loss", result.final_loss}});
      out_ << "initial loss " << format_number(result.initial_loss) << " final loss "
           << format_number(result.final_loss) << '\n';
      return 0;
    };
  }

  void register_index(CLI::App& app) {
    auto& cmd = add_command(app, "index", "Embed series and build a k-d tree index");
    auto& o = *cmd.opts;
    o.add("data", cfg_.data, "dataset in id,values layout");
    o.add("split", cfg_.split, "index only the training partition of this split");
    o.add("method", cfg_.method, "chronos, dft or downsample");
    o.add("model", cfg_.model, "model file for --method chronos");
    o.add("m", cfg_.m, "embedding dimension for dft and downsample");
    o.add("out", cfg_.out, "output directory");
    cmd.body = [this](Options& opts) {
      if (cfg_.m.empty()) cfg_.m = {16};
      const auto ds = load_data(cfg_);
      const auto embedder = make_embedder(cfg_, single(cfg_.m, "m"));
      std::vector<RecordId> ids;
      if (cfg_.split.empty()) {
        for (const auto& s : ds.series) ids.push_back(s.id);
      } else {
        ids = load_split(cfg_, ds).train;
      }
      const CandidatePool pool(ds, ids);
      std::vector<double> coords;
      for (const auto& s : pool.series()) {
        const auto e = embed(embedder, s);
        coords.insert(coords.end(), e.begin(), e.end());
      }
      const KdTree tree(ids, std::move(coords), embedding_dim(embedder));
      const auto dir = prepare_out(cfg_);
      tree.save(dir / "index.chi");
      write_manifest(dir, "index", opts, cfg_, {dir / "index.chi"}, {{"embedder", describe(embedder)}});
      out_ << "indexed " << tree.size() << " series with " << describe(embedder) << ", height " << tree.height()
           << '\n';
      return 0;
    };
  }

  void register_query(CLI::App& app) {
    auto& cmd = add_command(app, "query", "Top-k or threshold correlation query");
    auto& o = *cmd.opts;
    o.add("data", cfg_.data, "dataset holding the indexed series");
    o.add("index", cfg_.index, "index file");
    o.add("method", cfg_.method, "chronos, dft or downsample (must match the index)");
    o.add("model", cfg_.model, "model file for --method chronos");
    o.add("m", cfg_.m, "embedding dimension for dft and downsample");
    o.add("id", cfg_.id, "query with this series from --data (it is excluded from the results)");
    o.add("series", cfg_.series, "query with these comma-separated values");
    o.add("k", cfg_.k, "number of results");
    o.add("threshold", cfg_.threshold, "return every series with estimated correlation >= this value");
    o.add("exact", cfg_.exact, "brute-force search over the indexed series instead of the index");
    cmd.body = [this](Options&) { return query(); };
  }

  void register_eval(CLI::App& app) {
    auto& cmd = add_command(app, "eval", "Precision, gap and approximation loss sweep");
    auto& o = *cmd.opts;
    o.add("data", cfg_.data, "dataset in id,values layout");
    o.add("split", cfg_.split, "split.json (default: split the data with --seed)");
    o.add("methods", cfg_.methods, "comma list of dft, downsample, chronos-approx, chronos-order, exact");
    o.add("m", cfg_.m, "comma list of embedding dimensions");
    o.add("k", cfg_.k, "comma list of result sizes");
    o.add("model", cfg_.model, "use this model instead of training (one chronos method, one m)");
    add_training_options(o);
    o.add("timing", cfg_.timing, "record latency columns in the report");
    o.add("seed", cfg_.seed, "random seed");
    o.add("out", cfg_.out, "output directory");
    cmd.body = [this](Options& opts) { return evaluate(opts); };
  }

  void register_bench(CLI::App& app) {
    auto& cmd = add_command(app, "bench", "Query latency on random-walk series");
    auto& o = *cmd.opts;
    o.add("n", cfg_.n, "indexed series");
    o.add("length", cfg_.length, "series length M");
    o.add("m", cfg_.m, "embedding dimension");
    o.add("k", cfg_.k, "result size");
    o.add("queries", cfg_.queries, "timed queries per method");
    o.add("model", cfg_.model, "model file (default: an untrained network of --hidden width)");
    o.add("profile", cfg_.profile, "full or desk; sets the default hidden width");
    o.add("hidden", cfg_.hidden, "hidden width of the untrained network");
    o.add("seed", cfg_.seed, "random seed");
    o.add("out", cfg_.out, "write bench.csv here");
    cmd.body = [this](Options& opts) { return bench(opts); };
  }

  TrainObserver progress() {
    if (cfg_.quiet) return {};
    return [this](const TrainLogRow& row) {
      err_ << "iter " << row.iteration << " train " << format_number(row.train_loss) << " val "
           << format_number(row.val_loss) << '\n';
    };
  }

  static void write_train_log(const TrainResult& result, const fs::path& path) {
    std::ofstream log(path, std::ios::trunc);
    if (!log) throw Error(ErrorKind::MissingArtifact, "cannot write " + path.string());
    log << "iter,train_loss,val_loss,wall_ms\n";
    for (const auto& row : result.log) {
      log << row.iteration << ',' << format_number(row.train_loss) << ',' << format_number(row.val_loss) << ','
          << format_number(row.wall_ms) << '\n';
    }
  }

  int query() {
    if (cfg_.m.empty()) cfg_.m = {16};
    if (cfg_.k.empty()) cfg_.k = {10};
    if (cfg_.index.empty()) usage("--index is required");
    if (cfg_.id.has_value() == !cfg_.series.empty()) usage("give exactly one of --id and --series");
    if (cfg_.threshold && !(*cfg_.threshold >= -1.0 && *cfg_.threshold <= 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "--threshold must lie in [-1, 1]");
    }
    const auto tree = KdTree::load(cfg_.index);
    const auto ds = load_data(cfg_);
    const std::size_t k = single(cfg_.k, "k");
    if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");

    NormalizedSeries query_series;
    std::optional<RecordId> exclude;
    if (cfg_.id) {
      const auto pos = positions_by_id(ds);
      const auto it = pos.find(*cfg_.id);
      if (it == pos.end()) throw Error(ErrorKind::InvalidArgument, "id " + std::to_string(*cfg_.id) + " not in data");
      query_series = normalize(ds.series[it->second].values);
      const auto indexed = tree.input_ids();
      if (std::find(indexed.begin(), indexed.end(), *cfg_.id) != indexed.end()) exclude = *cfg_.id;
    } else {
      query_series = normalize(parse_values(cfg_.series));
      if (query_series.size() != ds.length()) {
        throw Error(ErrorKind::LengthMismatch, "query has " + std::to_string(query_series.size()) +
                                                   " values, data series have " + std::to_string(ds.length()));
      }
    }
    const std::size_t eligible = tree.size() - (exclude ? 1 : 0);

    QueryResult hits;
    // Correlation estimate per hit: exact distances satisfy d = 2 - 2 corr,
    // embedding distances satisfy 2 d ~ 2 - 2 corr.
    double corr_per_distance = 1.0;
    if (cfg_.exact) {
      corr_per_distance = 0.5;
      const CandidatePool pool(ds, tree.input_ids());
      if (eligible == 0) throw Error(ErrorKind::Empty, "no indexed series besides the query");
      hits = exact_top_k(query_series, cfg_.threshold ? eligible : std::min(k, eligible), pool, exclude);
      if (cfg_.threshold) {
        const double limit = 2.0 - 2.0 * *cfg_.threshold;
        std::size_t keep = 0;
        while (keep < hits.size() && hits.distances_sq[keep] <= limit) ++keep;
        hits.ids.resize(keep);
        hits.distances_sq.resize(keep);
      }
    } else {
      const auto embedder = make_embedder(cfg_, single(cfg_.m, "m"));
      const auto e = embed(embedder, query_series);
      if (e.size() != tree.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "embedding has " + std::to_string(e.size()) +
                                                      " dimensions, index has " + std::to_string(tree.dim()));
      }
      if (cfg_.threshold) {
        hits = tree.within_radius(e, 1.0 - *cfg_.threshold);
      } else {
        hits = tree.top_k(e, std::min(k + (exclude ? 1 : 0), tree.size()));
      }
      if (exclude) {
        const auto it = std::find(hits.ids.begin(), hits.ids.end(), *exclude);
        if (it != hits.ids.end()) {
          const auto pos = it - hits.ids.begin();
          hits.ids.erase(it);
          hits.distances_sq.erase(hits.distances_sq.begin() + pos);
        }
      }
      if (!cfg_.threshold && hits.size() > k) {
        hits.ids.resize(k);
        hits.distances_sq.resize(k);
      }
    }

    out_ << "id,distance_sq,correlation\n";
    for (std::size_t i = 0; i < hits.size(); ++i) {
      const double corr = std::clamp(1.0 - corr_per_distance * hits.distances_sq[i], -1.0, 1.0);
      out_ << hits.ids[i] << ',' << format_number(hits.distances_sq[i]) << ',' << format_number(corr) << '\n';
    }
    return 0;
  }

  int evaluate(Options& opts) {
    if (cfg_.methods.empty()) usage("--methods needs at least one method");
    if (cfg_.m.empty()) cfg_.m = {8, 16};
    if (cfg_.k.empty()) cfg_.k = {10, 100};
    apply_profile(cfg_, opts);
    const std::set<std::string> known{"dft", "downsample", "chronos-approx", "chronos-order", "exact"};
    std::size_t learned = 0;
    for (const auto& method : cfg_.methods) {
      if (!known.count(method)) usage("unknown method '" + method + "'");
      if (method.rfind("chronos-", 0) == 0) ++learned;
    }
    if (!cfg_.model.empty() && (learned != 1 || cfg_.m.size() != 1)) {
      usage("--model needs exactly one chronos method and one m");
    }

    const auto ds = load_data(cfg_);
    const auto parts = load_split(cfg_, ds);
    const auto dir = prepare_out(cfg_);
    std::vector<fs::path> artifacts;
    std::vector<MethodEmbedding> methods;
    for (const auto& method : cfg_.methods) {
      if (method == "exact") {
        methods.push_back({method, 0, std::nullopt});
        continue;
      }
      for (std::size_t m : cfg_.m) {
        if (method == "dft") {
          methods.push_back({method, m, Embedder{DftTruncation{m}}});
        } else if (method == "downsample") {
          methods.push_back({method, m, Embedder{DownSample{m}}});
        } else if (!cfg_.model.empty()) {
          methods.push_back({method, m, Embedder{LearnedEmbedder{load_model(cfg_.model)}}});
        } else {
          const auto loss = method == "chronos-order" ? LossKind::Order : LossKind::Approximate;
          if (!cfg_.quiet) err_ << "training " << method << " m=" << m << '\n';
          const auto result = train(ds, parts, train_config(cfg_, loss, m), progress());
          const auto path = dir / ("model_" + method + "_m" + std::to_string(m) + ".chr");
          save_model(result.params, path);
          artifacts.push_back(path);
          methods.push_back({method, m, Embedder{LearnedEmbedder{result.params}}});
        }
      }
    }

    SweepConfig sc;
    sc.k_values = cfg_.k;
    sc.seed = cfg_.seed;
    sc.measure_latency = cfg_.timing;
    const auto report = sweep(ds, parts, methods, sc);
    {
      std::ofstream csv(dir / "report.csv", std::ios::trunc);
      if (!csv) throw Error(ErrorKind::MissingArtifact, "cannot write report in " + dir.string());
      write_report_csv(report, csv, cfg_.timing);
    }
    artifacts.insert(artifacts.begin(), dir / "report.csv");
    write_manifest(dir, "eval", opts, cfg_, artifacts);
    write_report_table(report, out_);
    return 0;
  }

  int bench(Options& opts) {
    if (cfg_.m.empty()) cfg_.m = {16};
    if (cfg_.k.empty()) cfg_.k = {100};
    if (cfg_.profile == "desk" && !opts.is_explicit("hidden")) cfg_.hidden = TrainConfig::desk().hidden_size;
    const std::size_t m = single(cfg_.m, "m");
    const std::size_t k = single(cfg_.k, "k");
    if (cfg_.n == 0 || cfg_.queries == 0) throw Error(ErrorKind::InvalidArgument, "--n and --queries must be positive");
    if (cfg_.length < kMinLength) throw Error(ErrorKind::InvalidArgument, "--length must be at least 4");

    auto random_walk = [this](Rng& rng) {
      std::vector<double> v(cfg_.length);
      double level = 0.0;
      for (auto& x : v) x = (level += rng.normal());
      return normalize(v);
    };
    Rng data_rng(mix_seed(cfg_.seed, 1));
    Rng query_rng(mix_seed(cfg_.seed, 2));
    Dataset ds;
    std::vector<NormalizedSeries> pool;
    for (std::size_t i = 0; i < cfg_.n; ++i) pool.push_back(random_walk(data_rng));
    std::vector<NormalizedSeries> queries;
    for (std::size_t i = 0; i < std::min<std::size_t>(cfg_.queries, 1000); ++i) queries.push_back(random_walk(query_rng));

    std::vector<std::pair<std::string, Embedder>> methods;
    if (cfg_.model.empty()) {
      methods.emplace_back("chronos", LearnedEmbedder{init_network(feature_width(cfg_.length), cfg_.hidden, m, cfg_.seed)});
    } else {
      methods.emplace_back("chronos", LearnedEmbedder{load_model(cfg_.model)});
    }
    if (m % 2 == 0 && m < cfg_.length) methods.emplace_back("dft", DftTruncation{m});
    if (m <= cfg_.length) methods.emplace_back("downsample", DownSample{m});

    std::ostringstream csv;
    csv << "method,m,k,n,embed_q50_us,query_q50_us,query_q99_us\n";
    out_ << std::left << std::setw(12) << "method" << std::right << std::setw(6) << "m" << std::setw(6) << "k"
         << std::setw(9) << "n" << std::setw(14) << "embed_q50_us" << std::setw(14) << "query_q50_us"
         << std::setw(14) << "query_q99_us" << '\n';
    auto emit = [&](const std::string& name, std::size_t dim, double embed_us, const std::vector<double>& latency) {
      const double q50 = percentile(latency, 0.5);
      const double q99 = percentile(latency, 0.99);
      out_ << std::left << std::setw(12) << name << std::right << std::setw(6) << dim << std::setw(6) << k
           << std::setw(9) << cfg_.n << std::fixed << std::setprecision(1) << std::setw(14) << embed_us
           << std::setw(14) << q50 << std::setw(14) << q99 << std::defaultfloat << '\n';
      csv << name << ',' << dim << ',' << k << ',' << cfg_.n << ',' << format_number(embed_us) << ','
          << format_number(q50) << ',' << format_number(q99) << '\n';
    };

    for (const auto& [name, embedder] : methods) {
      std::vector<double> coords;
      std::vector<RecordId> ids;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto e = embed(embedder, pool[i]);
        coords.insert(coords.end(), e.begin(), e.end());
        ids.push_back(i);
      }
      const KdTree tree(std::move(ids), std::move(coords), embedding_dim(embedder));
      std::vector<double> embed_latency;
      std::vector<double> latency;
      for (std::size_t i = 0; i < cfg_.queries; ++i) {
        const auto& q = queries[i % queries.size()];
        const auto t0 = Clock::now();
        const auto e = embed(embedder, q);
        const auto t1 = Clock::now();
        const auto hits = tree.top_k(e, k);
        const auto t2 = Clock::now();
        embed_latency.push_back(micros(t1 - t0));
        latency.push_back(micros(t2 - t0));
      }
      emit(name, embedding_dim(embedder), percentile(embed_latency, 0.5), latency);
    }

    std::vector<RecordId> all_ids(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) all_ids[i] = i;
    for (std::size_t i = 0; i < pool.size(); ++i) ds.series.push_back(TimeSeries{i, pool[i].values});
    const CandidatePool exact_pool(ds, all_ids);
    std::vector<double> latency;
    const std::size_t exact_queries = std::min<std::size_t>(cfg_.queries, 200);
    for (std::size_t i = 0; i < exact_queries; ++i) {
      const auto t0 = Clock::now();
      const auto hits = exact_top_k(queries[i % queries.size()], std::min(k, pool.size()), exact_pool);
      latency.push_back(micros(Clock::now() - t0));
    }
    emit("exact", cfg_.length, 0.0, latency);

    if (opts.is_explicit("out")) {
      const auto dir = prepare_out(cfg_);
      std::ofstream file(dir / "bench.csv", std::ios::trunc);
      file << csv.str();
      file.close();
      write_manifest(dir, "bench", opts, cfg_, {dir / "bench.csv"});
    }
    return 0;
  }

  std::ostream& out_;
  std::ostream& err_;
  RunConfig cfg_;
  std::vector<Command> commands_;
};

}  // namespace

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingArtifact, "cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Runner runner(out, err);
  return runner.run(args);
}

}  // namespace chronos::cli
