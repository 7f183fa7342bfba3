#include "adaptkit/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "adaptkit/archive.hpp"
#include "adaptkit/hub_fetch.hpp"
#include "adaptkit/hub_index.hpp"
#include "adaptkit/package.hpp"
#include "adaptkit/trainer.hpp"
#include "adaptkit/zip.hpp"
#include "json.hpp"

namespace adaptkit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Named config, canonical string, or a file holding the canonical string.
ModelConfig model_config_from(const std::string& spec) {
  if (spec.find('=') != std::string::npos) return ModelConfig::parse(spec);
  if (fs::is_regular_file(spec)) return ModelConfig::parse(trim(read_text(spec)));
  return ModelConfig::named(spec);
}

// Preset spec ("pfeiffer", "houlsby:64"), canonical string, or descriptor file.
AdapterConfig adapter_config_from(const std::string& spec) {
  if (fs::is_regular_file(spec)) return AdapterConfig::parse(read_text(spec));
  return resolve_adapter_config(spec);
}

// Lines of "ids" or "label<TAB>ids"; ids separated by spaces or commas.
struct InputLine {
  std::vector<std::size_t> ids;
  std::optional<int> label;
};

InputLine parse_input_line(const std::string& line, std::size_t number) {
  InputLine in;
  std::string body = line;
  if (const auto tab = line.find('\t'); tab != std::string::npos) {
    const std::string label = trim(line.substr(0, tab));
    try {
      std::size_t pos = 0;
      in.label = std::stoi(label, &pos);
      if (pos != label.size()) throw std::invalid_argument(label);
    } catch (const std::exception&) {
      throw ValidationError("input line " + std::to_string(number) + ": label '" + label + "' is not an integer");
    }
    body = line.substr(tab + 1);
  }
  for (auto& c : body)
    if (c == ',') c = ' ';
  std::istringstream ss(body);
  std::string tok;
  while (ss >> tok) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || tok.front() == '-')
      throw ValidationError("input line " + std::to_string(number) + ": '" + tok + "' is not a token id");
    in.ids.push_back(static_cast<std::size_t>(v));
  }
  if (in.ids.empty()) throw ValidationError("input line " + std::to_string(number) + " has no token ids");
  return in;
}

std::vector<fs::path> expand_metadata_paths(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && (e.path().extension() == ".yaml" || e.path().extension() == ".yml"))
          found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(in);
    }
  }
  return out;
}

void report_candidates(const std::vector<std::string>& names, const char* title, std::ostream& err) {
  if (names.empty()) return;
  err << title << ":\n";
  for (const auto& n : names) err << "  " << n << "\n";
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::string model_config;
  std::string backbone_checkpoint;
  std::uint64_t backbone_seed = 0;
  std::string adapter_name;
  std::string adapter_type = "text_task";
  std::string adapter_config = "pfeiffer";
  std::string task;
  std::string mode = "adapter_only";
  std::uint64_t seed = 0;
  std::size_t steps = 500;
  std::optional<double> lr;
  std::size_t batch_size = 16;
  std::size_t eval_every = 0;
  std::string out;
};

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  const TrainMode mode = parse_train_mode(o.mode);
  if (mode == TrainMode::adapter_only && o.adapter_name.empty())
    throw UsageError("--mode adapter_only requires --adapter-name");

  std::optional<Model> loaded;
  if (!o.backbone_checkpoint.empty()) {
    loaded.emplace(load_backbone(o.backbone_checkpoint));
    if (!o.model_config.empty() && !(model_config_from(o.model_config) == loaded->config()))
      throw CompatibilityError("--model-config " + model_config_from(o.model_config).hash() +
                               " does not match the checkpoint's model " + loaded->config().hash());
  }
  Model model = loaded ? std::move(*loaded)
                       : Model::initialize(model_config_from(o.model_config.empty() ? "mini-bert" : o.model_config),
                                           o.backbone_seed);
  const ModelConfig& mc = model.config();
  const ToyTask task = generate_toy_task(o.task, o.seed, std::min<std::size_t>(16, mc.max_seq_len), mc.vocab_size);

  TrainConfig cfg = TrainConfig::defaults(mode);
  cfg.seed = o.seed;
  cfg.max_steps = o.steps;
  cfg.batch_size = o.batch_size;
  cfg.eval_every = o.eval_every;
  if (o.lr) cfg.learning_rate = *o.lr;
  cfg.validate();

  const std::string head_name = o.adapter_name.empty() ? o.task : o.adapter_name;
  if (mode == TrainMode::adapter_only) {
    model.add_adapter(o.adapter_name, parse_adapter_type(o.adapter_type), adapter_config_from(o.adapter_config));
    model.add_head(head_name, HeadKind::classification, task.num_classes);
    model.train_adapter({o.adapter_name});
  } else {
    model.add_head(head_name, HeadKind::classification, task.num_classes);
  }
  err << "training " << head_name << " on " << task.name << " (" << o.mode << ", " << cfg.max_steps << " steps)\n";
  const TrainLog log = train(model, head_name, task, cfg);

  // Report the metric of the weights as exported (binary32), so that a later
  // run over the saved artifacts reproduces it exactly.
  model.for_each_parameter([](Parameter& p) { p.value = round_to_f32(p.value); });
  const double dev_accuracy = evaluate(model, model.head(head_name), task.dev, Metric::accuracy);

  const fs::path dir = o.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  json result = {{"task", task.name},
                 {"mode", std::string(train_mode_name(mode))},
                 {"seed", o.seed},
                 {"steps", cfg.max_steps},
                 {"model_hash", mc.hash()},
                 {"dev_accuracy", dev_accuracy}};
  if (mode == TrainMode::adapter_only) {
    const fs::path pkg = save_adapter(model, o.adapter_name, dir);
    const fs::path ckpt = save_backbone(model, dir / "backbone.ckpt");
    result["adapter"] = o.adapter_name;
    result["package"] = pkg.string();
    result["checkpoint"] = ckpt.string();
    err << "package written to " << pkg.string() << "\n";
  } else {
    const fs::path ckpt = save_backbone(model, dir / "backbone.ckpt", head_name);
    result["checkpoint"] = ckpt.string();
    err << "fine-tuned checkpoint written to " << ckpt.string() << "\n";
  }
  write_file_atomic(dir / "train_log.jsonl", log.to_jsonl());
  std::string dev;
  for (const auto& ex : task.dev) {
    dev += std::to_string(ex.label) + "\t";
    for (std::size_t i = 0; i < ex.token_ids.size(); ++i) dev += (i ? " " : "") + std::to_string(ex.token_ids[i]);
    dev += "\n";
  }
  write_file_atomic(dir / "dev.tsv", dev);
  result["log"] = (dir / "train_log.jsonl").string();
  result["dev_file"] = (dir / "dev.tsv").string();

  err << "dev accuracy " << dev_accuracy << "\n";
  out << result.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- run

struct RunOptions {
  std::string checkpoint;
  std::string adapter;
  std::string adapter_config;
  std::string index;
  std::string cache_dir;
  std::string head;
  std::string input;
};

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  Model model = load_backbone(o.checkpoint);
  std::string head_name = o.head;

  if (!o.adapter.empty()) {
    LoadOptions lo;
    if (!o.adapter_config.empty()) lo.expected_config = adapter_config_from(o.adapter_config);
    fs::path source = o.adapter;
    if (!fs::exists(source)) {
      if (o.index.empty())
        throw NotFoundError("adapter '" + o.adapter + "' is neither a file nor resolvable (no --index given)");
      const HubIndex index = load_index(o.index);
      ResolveQuery q{o.adapter, model.config().hash(), std::nullopt};
      if (lo.expected_config) q.config = lo.expected_config->hash();
      const HubEntry& entry = resolve(index, q);
      Fetcher fetcher(o.cache_dir.empty() ? default_cache_dir() : fs::path(o.cache_dir));
      const FetchResult fetched = fetcher.fetch(entry);
      err << "resolved '" << o.adapter << "' to " << entry.id << (fetched.from_cache ? " (cached)" : " (fetched)")
          << "\n";
      source = fetched.package;
    }
    const AdapterEntry& loaded = load_adapter(model, source, lo);
    model.set_active({loaded.name});
    if (head_name.empty() && model.has_head(loaded.name)) head_name = loaded.name;
  }
  if (head_name.empty()) {
    const auto heads = model.list_heads();
    if (heads.size() != 1)
      throw ValidationError("no prediction head selected; available: " + (heads.empty() ? "none" : join(heads, ", ")));
    head_name = heads.front();
  }
  const PredictionHead& head = model.head(head_name);

  std::ifstream in(o.input);
  if (!in) throw IoError("cannot open input file " + o.input);
  std::string line;
  std::size_t number = 0, lines = 0, labelled = 0, correct = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const InputLine input = parse_input_line(line, number);
    const int prediction = predict_one(model, head, input.ids);
    json rec = {{"line", number}, {"prediction", prediction}};
    if (input.label) {
      rec["label"] = *input.label;
      ++labelled;
      if (*input.label == prediction) ++correct;
    }
    out << rec.dump() << "\n" << std::flush;
    ++lines;
  }
  if (in.bad()) throw IoError("failed reading " + o.input);
  json summary = {{"lines", lines}, {"labelled", labelled}};
  if (labelled) {
    const double accuracy = static_cast<double>(correct) / static_cast<double>(labelled);
    summary["accuracy"] = accuracy;
    err << "accuracy " << accuracy << " (" << correct << "/" << labelled << ")\n";
  }
  out << json{{"summary", summary}}.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- pack

struct PackOptions {
  std::string package;
  std::string out;
  std::string metadata_out;
  std::string category = "general";
  std::string dataset;
  std::string url;
  std::string description;
  std::string author;
  std::string github;
  std::string twitter;
  std::string training;
};

int cmd_pack(const PackOptions& o, std::ostream& out, std::ostream& err) {
  const auto bytes = read_file(o.package);
  const Package pkg = decode_package(bytes);
  if (pkg.kind != PackageKind::adapter) throw ValidationError(o.package + " is not an adapter package");
  HubEntry entry = metadata_stub(pkg, o.category, o.dataset);
  const auto archive = pack_archive(bytes, entry);
  const fs::path zip_path = o.out;
  write_file_atomic(zip_path, archive);

  const ArchiveReport report = verify_archive(archive);
  if (!report.ok()) throw IntegrityError("packed archive failed verification: " + join(report.failures(), "; "));

  entry.url = o.url.empty() ? "file://" + fs::absolute(zip_path).lexically_normal().string() : o.url;
  entry.sha256 = report.archive_sha256;
  entry.description = o.description;
  entry.author = {o.author, o.github, o.twitter};
  entry.training = o.training;
  fs::path meta = o.metadata_out.empty() ? fs::path(zip_path).replace_extension(".yaml") : fs::path(o.metadata_out);
  write_file_atomic(meta, metadata_yaml(entry));

  err << "packed " << pkg.adapter_name << " (" << report.param_count << " parameters) into " << zip_path.string()
      << "\n";
  out << json{{"archive", zip_path.string()},
              {"sha256", report.archive_sha256},
              {"metadata", meta.string()},
              {"params", report.param_count},
              {"blob_bytes", report.blob_bytes}}
             .dump()
      << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- validate

struct ValidateOptions {
  std::vector<std::string> files;
  std::string index;
  bool fetch = false;
};

int cmd_validate(const ValidateOptions& o, std::ostream& out, std::ostream& err) {
  std::optional<HubIndex> index;
  if (!o.index.empty()) index = load_index(o.index);
  bool all_ok = true;
  for (const auto& file : o.files) {
    const auto bytes = read_file(file);
    json rec = {{"file", file}};
    json problems = json::array();
    if (looks_like_zip(bytes)) {
      const ArchiveReport report = verify_archive(bytes);
      rec["kind"] = "archive";
      rec["sha256"] = report.archive_sha256;
      json checks = json::array();
      for (const auto& c : report.checks) {
        checks.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        if (!c.passed) problems.push_back({{"path", c.name}, {"message", c.detail}});
      }
      rec["checks"] = checks;
      if (report.package) rec["params"] = report.param_count;
    } else {
      rec["kind"] = "metadata";
      const auto report = validate_metadata(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
      for (const auto& v : report.violations) problems.push_back({{"path", v.path}, {"message", v.message}});
      if (report.entry && index) {
        try {
          add_entry(*index, *report.entry);
        } catch (const ValidationError& e) {
          problems.push_back({{"path", "id"}, {"message", e.what()}});
        }
      }
      if (report.entry && o.fetch) {
        try {
          const auto archive = download(report.entry->url);
          if (sha256_hex(archive) != report.entry->sha256)
            problems.push_back({{"path", "sha256"}, {"message", "does not match the archive at url"}});
          else if (const auto ar = verify_archive(archive); !ar.ok())
            problems.push_back({{"path", "url"}, {"message", "archive failed verification: " + join(ar.failures(), "; ")}});
          else if (ar.package && (ar.package->model.hash() != report.entry->model_hash ||
                                  ar.package->adapter_config.hash() != report.entry->config_hash))
            problems.push_back({{"path", "model.hash"}, {"message", "metadata hashes disagree with the archived package"}});
        } catch (const TransportError& e) {
          problems.push_back({{"path", "url"}, {"message", e.what()}});
        }
      }
    }
    rec["ok"] = problems.empty();
    rec["violations"] = problems;
    if (!problems.empty()) {
      all_ok = false;
      err << file << ": " << problems.size() << " problem" << (problems.size() == 1 ? "" : "s") << "\n";
      for (const auto& p : problems)
        err << "  " << p["path"].get<std::string>() << ": " << p["message"].get<std::string>() << "\n";
    } else {
      err << file << ": ok\n";
    }
    out << rec.dump() << "\n";
  }
  return all_ok ? kExitOk : kExitValidation;
}

// ---------------------------------------------------------------- index / explore / search

struct IndexOptions {
  std::vector<std::string> inputs;
  std::string base;
  std::string out;
};

int cmd_index(const IndexOptions& o, std::ostream& out, std::ostream& err) {
  HubIndex index = o.base.empty() ? build_index({}) : load_index(o.base);
  std::vector<Violation> problems;
  std::vector<HubEntry> fresh;
  for (const auto& path : expand_metadata_paths(o.inputs)) {
    const auto bytes = read_file(path);
    auto report = validate_metadata(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    for (auto& v : report.violations) problems.push_back({path.string() + ": " + v.path, v.message});
    if (report.entry) fresh.push_back(std::move(*report.entry));
  }
  if (!problems.empty()) throw MetadataError(std::move(problems));
  for (auto& e : fresh) index = add_entry(index, std::move(e));
  const std::string doc = index.serialize();
  write_file_atomic(o.out, doc);
  err << "index with " << index.entries().size() << " entries written to " << o.out << "\n";
  out << json{{"index", o.out}, {"entries", index.entries().size()}, {"sha256", sha256_hex(doc)}}.dump() << "\n";
  return kExitOk;
}

struct ExploreOptions {
  std::string index;
  std::optional<std::string> level1;
  std::optional<std::string> level2;
};

int cmd_explore(const ExploreOptions& o, std::ostream& out, std::ostream&) {
  const HubIndex index = load_index(o.index);
  for (const auto& line : explore(index, o.level1, o.level2)) out << line << "\n";
  return kExitOk;
}

struct SearchOptions {
  std::string index;
  std::string query;
  std::string model_hash;
  std::string model_config;
  std::string model_checkpoint;
  std::string config;
};

int cmd_search(const SearchOptions& o, std::ostream& out, std::ostream& err) {
  const int given = !o.model_hash.empty() + !o.model_config.empty() + !o.model_checkpoint.empty();
  if (given != 1) throw UsageError("search needs exactly one of --model-hash, --model-config, --model-checkpoint");
  std::string hash = o.model_hash;
  if (!o.model_config.empty()) hash = model_config_from(o.model_config).hash();
  if (!o.model_checkpoint.empty()) hash = load_backbone(o.model_checkpoint).config().hash();
  if (!is_sha256_hex(hash)) throw ValidationError("--model-hash must be 64 lowercase hex digits");
  const HubIndex index = load_index(o.index);
  ResolveQuery q{o.query, hash, std::nullopt};
  if (!o.config.empty()) q.config = fs::is_regular_file(o.config) ? adapter_config_from(o.config).hash() : o.config;
  const HubEntry& entry = resolve(index, q);
  err << "resolved '" << o.query << "' to " << entry.id << "\n";
  out << hub_entry_json(entry) << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train, package, publish and reuse bottleneck adapters on a frozen encoder."};
  app.name("adaptkit");
  app.set_config("--config", "", "TOML/INI file overlaying flag defaults ([train], [run], ... sections)");
  app.require_subcommand(1);
  app.fallthrough();

  TrainOptions train_o;
  auto* train_cmd = app.add_subcommand("train", "Train an adapter (or fine-tune fully) on a toy task");
  train_cmd->add_option("--model-config", train_o.model_config, "mini-bert | bert-base | bert-large | canonical string | file");
  train_cmd->add_option("--backbone-checkpoint", train_o.backbone_checkpoint, "Start from this backbone checkpoint");
  train_cmd->add_option("--backbone-seed", train_o.backbone_seed, "Seed of the randomly initialized backbone")->capture_default_str();
  train_cmd->add_option("--adapter-name", train_o.adapter_name, "Adapter (and head) name");
  train_cmd->add_option("--adapter-type", train_o.adapter_type, "text_task | text_lang")->capture_default_str();
  train_cmd->add_option("--adapter-config", train_o.adapter_config, "Preset[:reduction], canonical string or descriptor file")->capture_default_str();
  train_cmd->add_option("--task", train_o.task, "majority-token | parity-of-token | copy-first-label")->required();
  train_cmd->add_option("--mode", train_o.mode, "adapter_only | full_finetune")->capture_default_str();
  train_cmd->add_option("--seed", train_o.seed, "Data and training seed")->capture_default_str();
  train_cmd->add_option("--steps", train_o.steps, "Optimizer steps")->capture_default_str();
  train_cmd->add_option("--lr", train_o.lr, "Learning rate (default depends on mode)");
  train_cmd->add_option("--batch-size", train_o.batch_size)->capture_default_str();
  train_cmd->add_option("--eval-every", train_o.eval_every, "Log dev accuracy every N steps (0: end only)");
  train_cmd->add_option("--out", train_o.out, "Output directory")->required();

  RunOptions run_o;
  auto* run_cmd = app.add_subcommand("run", "Stitch an adapter into a checkpoint and predict");
  run_cmd->add_option("--model-checkpoint", run_o.checkpoint, "Backbone checkpoint")->required();
  run_cmd->add_option("--adapter", run_o.adapter, "Package, archive, directory, or a name resolved via --index");
  run_cmd->add_option("--adapter-config", run_o.adapter_config, "Required adapter configuration");
  run_cmd->add_option("--index", run_o.index, "Hub index used to resolve --adapter");
  run_cmd->add_option("--cache-dir", run_o.cache_dir, "Archive cache (default $ADAPTKIT_CACHE)");
  run_cmd->add_option("--head", run_o.head, "Prediction head name");
  run_cmd->add_option("--input-file", run_o.input, "One sequence per line: ids, or label<TAB>ids")->required();

  PackOptions pack_o;
  auto* pack_cmd = app.add_subcommand("pack", "Zip a package with its configuration and hub metadata");
  pack_cmd->add_option("--package", pack_o.package)->required();
  pack_cmd->add_option("--out", pack_o.out, "Archive path (.zip)")->required();
  pack_cmd->add_option("--metadata-out", pack_o.metadata_out, "Metadata file (default: archive path with .yaml)");
  pack_cmd->add_option("--category", pack_o.category, "Level-2 category, e.g. sentiment or a language code")->capture_default_str();
  pack_cmd->add_option("--dataset", pack_o.dataset, "Level-3 dataset or domain (default: adapter name)");
  pack_cmd->add_option("--url", pack_o.url, "Published location (default: file:// URL of the archive)");
  pack_cmd->add_option("--description", pack_o.description);
  pack_cmd->add_option("--author", pack_o.author);
  pack_cmd->add_option("--github", pack_o.github);
  pack_cmd->add_option("--twitter", pack_o.twitter);
  pack_cmd->add_option("--training", pack_o.training, "Notes on the training procedure");

  ValidateOptions validate_o;
  auto* validate_cmd = app.add_subcommand("validate", "Check metadata files or archives");
  validate_cmd->add_option("files", validate_o.files, "Metadata (.yaml) or archive (.zip) files")->required();
  validate_cmd->add_option("--index", validate_o.index, "Reject entries duplicating this index");
  validate_cmd->add_flag("--fetch", validate_o.fetch, "Download each url and check its digest and contents");

  IndexOptions index_o;
  auto* index_cmd = app.add_subcommand("index", "Build the hub index from metadata files");
  index_cmd->add_option("inputs", index_o.inputs, "Metadata files or directories");
  index_cmd->add_option("--base", index_o.base, "Existing index to extend");
  index_cmd->add_option("--out", index_o.out, "Index file to write")->required();

  ExploreOptions explore_o;
  auto* explore_cmd = app.add_subcommand("explore", "Browse the index by task or language");
  explore_cmd->add_option("--index", explore_o.index)->required();
  explore_cmd->add_option("--level1", explore_o.level1, "task | language");
  explore_cmd->add_option("--level2", explore_o.level2, "Category under --level1");

  SearchOptions search_o;
  auto* search_cmd = app.add_subcommand("search", "Resolve a name fragment to one compatible adapter");
  search_cmd->add_option("--index", search_o.index)->required();
  search_cmd->add_option("--query", search_o.query)->required();
  search_cmd->add_option("--model-hash", search_o.model_hash);
  search_cmd->add_option("--model-config", search_o.model_config);
  search_cmd->add_option("--model-checkpoint", search_o.model_checkpoint);
  search_cmd->add_option("--adapter-config", search_o.config, "Config hash, preset[:reduction] or descriptor file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_o, out, err);
    if (*run_cmd) return cmd_run(run_o, out, err);
    if (*pack_cmd) return cmd_pack(pack_o, out, err);
    if (*validate_cmd) return cmd_validate(validate_o, out, err);
    if (*index_cmd) return cmd_index(index_o, out, err);
    if (*explore_cmd) return cmd_explore(explore_o, out, err);
    if (*search_cmd) return cmd_search(search_o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NotFoundError& e) {
    err << "error: " << e.what() << "\n";
    report_candidates(e.nearest(), "nearest", err);
    out << json{{"error", "not_found"}, {"message", e.what()}, {"nearest", e.nearest()}}.dump() << "\n";
    return kExitValidation;
  } catch (const AmbiguityError& e) {
    err << "error: " << e.what() << "\n";
    report_candidates(e.candidates(), "candidates", err);
    out << json{{"error", "ambiguous"}, {"message", e.what()}, {"candidates", e.candidates()}}.dump() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const TransportError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace adaptkit::cli
