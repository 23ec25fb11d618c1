#include "cli.hpp"

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>

#include "fnns/error.hpp"
#include "fnns/io.hpp"

namespace fnns::cli {

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string model;
  std::string profile;
  bool all_profiles = false;
  std::string input;
  std::string out;
  bool json = false;
  std::uint64_t seed = 0;
  float alpha = 0.01f;
  float gap = 1e-8f;
  std::size_t max_iter = 300;
  float tau = 0.0f;

  std::string db;
  bool overwrite = false;
  std::string observed;
  std::string pgm;
  std::string labels;
  std::string test_input;
  std::string test_labels;
  std::string arch = "cnn";
  std::size_t epochs = 1;
  float lr = 0.05f;
  std::size_t batch = 8;
  std::size_t limit = 0;
  std::vector<std::string> mocks;
};

// --- shared helpers ----------------------------------------------------------

const ExecProfile& resolve_profile(const std::string& id) {
  try {
    return find_profile(id);
  } catch (const LookupError& e) {
    throw UsageError(std::string("--profile: ") + e.what());
  }
}

/// --all-profiles, else --profile, else $FNNS_PROFILE, else the subcommand default.
std::vector<ExecProfile> select_profiles(const Options& o, bool default_all) {
  if (o.all_profiles) {
    if (!o.profile.empty()) throw UsageError("--profile and --all-profiles are mutually exclusive");
    return list_profiles();
  }
  if (!o.profile.empty()) return {resolve_profile(o.profile)};
  if (const char* env = std::getenv("FNNS_PROFILE"); env && *env) {
    try {
      return {find_profile(env)};
    } catch (const LookupError& e) {
      throw UsageError(std::string("FNNS_PROFILE: ") + e.what());
    }
  }
  if (default_all) return list_profiles();
  return {find_profile("seq32")};
}

const ExecProfile& single_profile(const Options& o, const char* fallback) {
  if (o.all_profiles) throw UsageError("this subcommand takes a single --profile");
  if (!o.profile.empty()) return resolve_profile(o.profile);
  if (const char* env = std::getenv("FNNS_PROFILE"); env && *env) {
    try {
      return find_profile(env);
    } catch (const LookupError& e) {
      throw UsageError(std::string("FNNS_PROFILE: ") + e.what());
    }
  }
  return find_profile(fallback);
}

struct Executable {
  Model model;
  /// Fingerprint key: model name, or "<source>@<plan profile>" for plans.
  std::string key;
  bool is_plan = false;
};

Executable load_executable(const std::string& path) {
  if (path.empty()) throw UsageError("--model is required");
  auto c = io::load_container(path);
  if (auto* m = std::get_if<Model>(&c)) {
    std::string key = m->name;
    return {std::move(*m), std::move(key), false};
  }
  if (auto* p = std::get_if<ComputePlan>(&c)) {
    std::string key = p->source_model + "@" + p->plan_profile;
    return {std::move(p->model), std::move(key), true};
  }
  throw FormatError(path + ": container holds a tensor, not a model or plan");
}

struct LoadedInput {
  Tensor tensor;
  std::string id;
};

LoadedInput load_input(const std::string& text) {
  if (text.empty()) throw UsageError("--input is required");
  io::InputRef ref;
  try {
    ref = io::parse_input_ref(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto bytes = io::read_file(ref.path);
  if (bytes.size() >= 4 && bytes[0] == 'F' && bytes[1] == 'N' && bytes[2] == 'N' && bytes[3] == 'S') {
    auto c = io::decode_container(bytes);
    auto* t = std::get_if<Tensor>(&c);
    if (!t) throw FormatError(ref.path.string() + ": container is not a tensor");
    return {std::move(*t), ref.path.filename().string()};
  }
  std::vector<Tensor> images;
  try {
    images = io::parse_idx_images(bytes);
  } catch (const FormatError& e) {
    throw FormatError(ref.path.string() + ": " + e.what());
  }
  if (ref.index >= images.size()) {
    throw FormatError(ref.path.string() + ": index " + std::to_string(ref.index) + " out of range (" +
                      std::to_string(images.size()) + " images)");
  }
  return {std::move(images[ref.index]), ref.id()};
}

void require_input_shape(const Model& m, const Tensor& x) {
  if (x.shape() != m.input_shape) {
    throw FormatError("input shape " + shape_to_string(x.shape()) + " does not match model input " +
                      shape_to_string(m.input_shape));
  }
}

std::string fmt_float(float v) {
  std::ostringstream s;
  s << std::setprecision(9) << v;
  return s.str();
}

json output_json(const ExecProfile& p, const Tensor& out) {
  json j{{"profile", p.id}, {"digest", digest(out).hex()}, {"output", std::vector<float>(out.data().begin(), out.data().end())}};
  if (out.rank() == 1 && out.size() >= 2) {
    const auto t = top2_gap(out);
    j["label"] = t.label;
    j["confidence"] = t.top;
    j["second_confidence"] = t.second;
    j["gap"] = t.gap;
  }
  return j;
}

// --- subcommands -------------------------------------------------------------

int cmd_infer(const Options& o, std::ostream& out) {
  const auto profiles = select_profiles(o, false);
  const auto exe = load_executable(o.model);
  const auto in = load_input(o.input);
  require_input_shape(exe.model, in.tensor);
  if (!o.out.empty() && profiles.size() != 1) throw UsageError("--out needs a single --profile");

  json results = json::array();
  if (!o.json) out << std::left << std::setw(10) << "profile" << std::setw(7) << "label" << std::setw(14) << "confidence"
                   << std::setw(14) << "gap" << "digest\n";
  for (const auto& p : profiles) {
    const Tensor y = forward(exe.model, in.tensor, p);
    if (!o.out.empty()) io::save_tensor(o.out, y);
    if (o.json) {
      results.push_back(output_json(p, y));
      continue;
    }
    out << std::setw(10) << p.id;
    if (y.rank() == 1 && y.size() >= 2) {
      const auto t = top2_gap(y);
      out << std::setw(7) << t.label << std::setw(14) << fmt_float(t.top) << std::setw(14) << fmt_float(t.gap);
    } else {
      out << std::setw(7) << "-" << std::setw(14) << "-" << std::setw(14) << "-";
    }
    out << digest(y).hex().substr(0, 16) << "\n";
  }
  if (o.json) out << json{{"model", exe.key}, {"input", in.id}, {"results", results}}.dump(2) << "\n";
  return kExitOk;
}

int cmd_partition(const Options& o, std::ostream& out) {
  const auto profiles = select_profiles(o, true);
  const auto exe = load_executable(o.model);
  const auto in = load_input(o.input);
  require_input_shape(exe.model, in.tensor);
  const auto report = partition_profiles(exe.model, in.tensor, profiles);
  if (o.json) {
    out << io::report_to_json({exe.key, in.id, report, std::nullopt}).dump(2) << "\n";
  } else {
    out << "model " << exe.key << ", input " << in.id << "\n" << render_report(report);
  }
  return kExitOk;
}

int cmd_fingerprint(const Options& o, std::ostream& out) {
  if (o.db.empty()) throw UsageError("--db is required");
  const auto profiles = select_profiles(o, true);
  const auto exe = load_executable(o.model);
  const auto in = load_input(o.input);
  require_input_shape(exe.model, in.tensor);
  auto db = io::load_db(o.db);
  std::vector<std::pair<FingerprintKey, OutputDigest>> added;
  for (const auto& p : profiles) {
    FingerprintKey key{exe.key, in.id, p.id};
    const auto d = digest(forward(exe.model, in.tensor, p));
    try {
      db.enroll(key, d, o.overwrite);
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string(e.what()) + " in '" + o.db + "' (use --overwrite)");
    }
    added.emplace_back(key, d);
  }
  for (const auto& [key, d] : added) io::append_db_record(o.db, key, d);
  if (o.json) {
    json rec = json::array();
    for (const auto& [key, d] : added) rec.push_back({{"profile", key.profile}, {"digest", d.hex()}});
    out << json{{"model", exe.key}, {"input", in.id}, {"db", o.db}, {"enrolled", rec}}.dump(2) << "\n";
  } else {
    out << "enrolled " << added.size() << " fingerprints for " << exe.key << " / " << in.id << " in " << o.db << "\n";
  }
  return kExitOk;
}

int cmd_identify(const Options& o, std::ostream& out) {
  if (o.db.empty()) throw UsageError("--db is required");
  if (!o.observed.empty() && !o.profile.empty()) throw UsageError("--observed and --profile are mutually exclusive");
  const ExecProfile* simulated = o.observed.empty() ? &single_profile(o, "seq32") : nullptr;
  const auto exe = load_executable(o.model);
  const auto in = load_input(o.input);
  require_input_shape(exe.model, in.tensor);
  const auto db = io::load_db(o.db);

  Tensor observed;
  if (!o.observed.empty()) {
    observed = io::load_tensor(o.observed);
  } else {
    observed = forward(exe.model, in.tensor, *simulated);
  }
  std::vector<std::string> matches;
  try {
    matches = db.identify(exe.key, in.id, observed);
  } catch (const LookupError& e) {
    throw FormatError(std::string(e.what()) + " in '" + o.db + "'");
  }
  if (o.json) {
    out << json{{"model", exe.key}, {"input", in.id}, {"digest", digest(observed).hex()}, {"matches", matches}}.dump(2)
        << "\n";
  } else if (matches.empty()) {
    out << "unknown environment (no enrolled profile matches " << digest(observed).hex().substr(0, 16) << ")\n";
  } else {
    out << "matching profiles:";
    for (const auto& m : matches) out << " " << m;
    out << "\n";
  }
  return kExitOk;
}

int cmd_plan(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("--out is required");
  if (!(o.tau >= 0.0f)) throw UsageError("--tau must be nonnegative");
  const auto& profile = single_profile(o, "seq32");
  if (o.model.empty()) throw UsageError("--model is required");
  const auto model = io::load_model(o.model);
  const auto plan = prepare_plan(model, profile, o.tau);
  io::save_plan(o.out, plan);
  const auto d = plan_digest(plan).hex();
  if (o.json) {
    out << json{{"model", model.name},
                {"plan_profile", profile.id},
                {"prune_threshold", o.tau},
                {"layers", plan.model.layers.size()},
                {"plan_digest", d},
                {"out", o.out}}
               .dump(2)
        << "\n";
  } else {
    out << "plan for " << model.name << " prepared under " << profile.id << ": " << model.layers.size() << " -> "
        << plan.model.layers.size() << " layers, digest " << d << "\n";
  }
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const auto profiles = select_profiles(o, true);
  const auto in = load_input(o.input);
  std::vector<MockSpec> specs;
  if (o.mocks.empty()) {
    specs = default_sweep_specs(o.seed);
  } else {
    for (const auto& name : o.mocks) {
      try {
        specs.push_back(MockSpec::parse(name, o.seed));
      } catch (const LookupError& e) {
        throw UsageError(std::string("--mock: ") + e.what());
      }
    }
  }
  const auto sweep = complexity_sweep(specs, profiles, in.tensor);
  if (o.json) {
    out << io::sweep_to_json(sweep, in.id).dump(2) << "\n";
  } else {
    out << render_sweep(sweep);
  }
  return kExitOk;
}

int cmd_boundary(const Options& o, std::ostream& out) {
  const auto& gen = single_profile(o, "seq32");
  const auto exe = load_executable(o.model);
  const auto in = load_input(o.input);
  require_input_shape(exe.model, in.tensor);
  if (!exe.model.ends_in_softmax()) throw FormatError("boundary samples need a classifier ending in softmax");
  BoundaryParams params;
  params.alpha = o.alpha;
  params.gap_threshold = o.gap;
  params.max_iter = o.max_iter;
  if (!(params.alpha > 0.0f)) throw UsageError("--alpha must be positive");
  if (!(params.gap_threshold > 0.0f)) throw UsageError("--gap must be positive");
  if (params.max_iter == 0) throw UsageError("--max-iter must be positive");

  const auto profiles = list_profiles();
  const auto result = generate_boundary(exe.model, in.tensor, params, gen, profiles);
  if (!o.out.empty()) io::save_tensor(o.out, result.sample);
  if (!o.pgm.empty()) io::write_file_atomic(o.pgm, io::encode_pgm(result.sample));

  const auto report = partition_profiles(exe.model, result.sample, profiles);
  io::ReportDocument doc{exe.key, in.id, report, io::BoundaryBlock::from(result, params)};
  if (o.json) {
    out << io::report_to_json(doc).dump(2) << "\n";
    return kExitOk;
  }
  out << "boundary sample for " << exe.key << " / " << in.id << " (generated under " << gen.id << ")\n"
      << "iterations " << result.iterations << ", final gap " << fmt_float(result.final_gap) << ", PSNR "
      << std::setprecision(4) << std::fixed << result.psnr_db << " dB, original label " << result.original_label
      << "\n";
  out.unsetf(std::ios::floatfield);
  out << std::left << std::setw(10) << "profile" << std::setw(7) << "label" << std::setw(14) << "confidence"
      << std::setw(14) << "2nd" << "gap\n";
  for (const auto& p : result.predictions) {
    out << std::setw(10) << p.profile << std::setw(7) << p.label << std::setw(14) << fmt_float(p.confidence)
        << std::setw(14) << fmt_float(p.second_confidence) << fmt_float(p.gap) << "\n";
  }
  out << (result.flipped ? "label flip across profiles\n" : "no label flip\n");
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  if (o.input.empty() || o.labels.empty()) throw UsageError("--input and --labels are required");
  if (o.out.empty()) throw UsageError("--out is required");
  auto data = io::load_idx_dataset(o.input, o.labels);
  if (o.limit > 0 && o.limit < data.size()) {
    data.images.resize(o.limit);
    data.labels.resize(o.limit);
  }
  if (data.size() == 0) throw FormatError(o.input + ": no training images");
  const Shape shape = data.images.front().shape();
  Model model;
  if (o.arch == "cnn") {
    model = build_toy_cnn(shape, 10, o.seed);
  } else if (o.arch == "mlp") {
    model = build_toy_mlp(shape, 64, 10, o.seed);
  } else {
    throw UsageError("--arch must be cnn or mlp");
  }
  model = train_small(std::move(model), data, {o.epochs, o.lr, o.seed, o.batch});
  io::save_model(o.out, model);

  json summary{{"model", model.name}, {"out", o.out}, {"train_images", data.size()}, {"epochs", o.epochs}};
  if (!o.test_input.empty()) {
    if (o.test_labels.empty()) throw UsageError("--test-input needs --test-labels");
    const auto test = io::load_idx_dataset(o.test_input, o.test_labels);
    summary["test_accuracy"] = accuracy(model, test, find_profile("seq32"));
  }
  if (o.json) {
    out << summary.dump(2) << "\n";
  } else {
    out << "trained " << model.name << " on " << data.size() << " images for " << o.epochs << " epoch(s) -> " << o.out
        << "\n";
    if (summary.contains("test_accuracy")) out << "test accuracy " << summary["test_accuracy"].get<double>() << "\n";
  }
  return kExitOk;
}

// --- wiring ------------------------------------------------------------------

void add_model(CLI::App* c, Options& o) { c->add_option("--model", o.model, "FNNS model or plan container"); }
void add_input(CLI::App* c, Options& o) { c->add_option("--input", o.input, "IDX images file with #index, or an FNNS tensor"); }
void add_profiles(CLI::App* c, Options& o) {
  c->add_option("--profile", o.profile, "execution profile id (default $FNNS_PROFILE)");
  c->add_flag("--all-profiles", o.all_profiles, "evaluate under every registry profile");
}
void add_json(CLI::App* c, Options& o) { c->add_flag("--json", o.json, "machine-readable JSON on stdout"); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fnns - floating-point forensics for neural network inference"};
  app.name(args.empty() ? "fnns" : args.front());
  app.require_subcommand(1);
  Options o;

  auto* infer = app.add_subcommand("infer", "run a model or plan and print outputs per profile");
  add_model(infer, o);
  add_input(infer, o);
  add_profiles(infer, o);
  infer->add_option("--out", o.out, "save the output tensor (single profile)");
  add_json(infer, o);

  auto* fingerprint = app.add_subcommand("fingerprint", "enroll output digests into a fingerprint DB");
  add_model(fingerprint, o);
  add_input(fingerprint, o);
  add_profiles(fingerprint, o);
  fingerprint->add_option("--db", o.db, "line-delimited JSON fingerprint DB");
  fingerprint->add_flag("--overwrite", o.overwrite, "replace existing records");
  add_json(fingerprint, o);

  auto* part = app.add_subcommand("partition", "group profiles into classes of bit-identical outputs");
  add_model(part, o);
  add_input(part, o);
  add_profiles(part, o);
  add_json(part, o);

  auto* identify = app.add_subcommand("identify", "match an observed output against enrolled fingerprints");
  add_model(identify, o);
  add_input(identify, o);
  identify->add_option("--db", o.db, "fingerprint DB");
  identify->add_option("--observed", o.observed, "FNNS tensor holding the observed output");
  identify->add_option("--profile", o.profile, "simulate the observation under this profile");
  add_json(identify, o);

  auto* plan = app.add_subcommand("plan", "prepare a constant-folded compute plan");
  add_model(plan, o);
  plan->add_option("--profile", o.profile, "profile used for folding arithmetic");
  plan->add_option("--tau", o.tau, "prune weights with |w| < tau");
  plan->add_option("--out", o.out, "plan container to write");
  add_json(plan, o);

  auto* sweep = app.add_subcommand("sweep", "equivalence classes of seeded mock models");
  add_input(sweep, o);
  add_profiles(sweep, o);
  sweep->add_option("--seed", o.seed, "mock weight seed");
  sweep->add_option("--mock", o.mocks, "mock variants (mlp, conv1, conv2-FxKxK); default: all six");
  add_json(sweep, o);

  auto* boundary = app.add_subcommand("boundary", "generate a boundary sample with damped iterative FGSM");
  add_model(boundary, o);
  add_input(boundary, o);
  boundary->add_option("--profile", o.profile, "profile used for generation (default seq32)");
  boundary->add_option("--alpha", o.alpha, "step size");
  boundary->add_option("--gap", o.gap, "stop when the top-two gap is below this");
  boundary->add_option("--max-iter", o.max_iter, "iteration cap");
  boundary->add_option("--out", o.out, "save the sample as an FNNS tensor");
  boundary->add_option("--pgm", o.pgm, "save an 8-bit PGM preview");
  add_json(boundary, o);

  auto* train = app.add_subcommand("train", "train a small classifier on IDX data");
  train->add_option("--input", o.input, "IDX training images");
  train->add_option("--labels", o.labels, "IDX training labels");
  train->add_option("--test-input", o.test_input, "IDX test images");
  train->add_option("--test-labels", o.test_labels, "IDX test labels");
  train->add_option("--arch", o.arch, "cnn or mlp");
  train->add_option("--epochs", o.epochs, "passes over the data");
  train->add_option("--lr", o.lr, "SGD learning rate");
  train->add_option("--batch", o.batch, "mini-batch size");
  train->add_option("--limit", o.limit, "use only the first N images");
  train->add_option("--seed", o.seed, "initialisation and shuffle seed");
  train->add_option("--out", o.out, "model container to write");
  add_json(train, o);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("fnns");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (infer->parsed()) return cmd_infer(o, out);
    if (fingerprint->parsed()) return cmd_fingerprint(o, out);
    if (part->parsed()) return cmd_partition(o, out);
    if (identify->parsed()) return cmd_identify(o, out);
    if (plan->parsed()) return cmd_plan(o, out);
    if (sweep->parsed()) return cmd_sweep(o, out);
    if (boundary->parsed()) return cmd_boundary(o, out);
    if (train->parsed()) return cmd_train(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace fnns::cli
