// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "adaptkit/archive.hpp"
#include "adaptkit/gradcheck.hpp"
#include "adaptkit/hub_fetch.hpp"
#include "adaptkit/hub_index.hpp"
#include "adaptkit/package.hpp"
#include "adaptkit/trainer.hpp"
#include "hub_fixture.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace adaptkit;

namespace {

// Pinned tolerances.
constexpr double kStorageTolerance = 0.10;       // relative, criterion 2
constexpr double kGradTolerance = 1e-4;          // max relative error, criterion 4
constexpr double kFdStep = 1e-6;
constexpr double kParityGap = 0.05;              // adapter >= full - gap, criterion 7
constexpr double kParityFloor = 0.9;             // both strictly above, criterion 7
constexpr std::size_t kToySteps = 500;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("violated: " + what);
    }
  }
  void note(const std::string& what) { notes.push_back(what); }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// Independent oracle for one pfeiffer site: down and up projections with biases.
std::size_t pfeiffer_site(std::size_t h, std::size_t crate) {
  const std::size_t b = std::max<std::size_t>(1, h / crate);
  return h * b + b + b * h + h;
}

std::size_t enumerate(const AdapterWeights& w) {
  std::size_t n = 0;
  w.for_each([&](const Parameter& p) { n += p.value.size(); });
  return n;
}

double round_to_tenth_million(std::size_t n) { return std::round(static_cast<double>(n) / 1e5) / 10.0; }

AdapterConfig pfeiffer(std::size_t crate) {
  AdapterConfig c = preset("pfeiffer");
  c.reduction_factor = crate;
  return c;
}

// ---------------------------------------------------------------- 1

Outcome criterion1() {
  Outcome o;
  struct Cell {
    ModelConfig model;
    std::size_t crate;
    double printed;  // published cell, millions
  };
  const ModelConfig base = ModelConfig::base(), large = ModelConfig::large();
  const std::vector<Cell> cells = {{base, 64, 0.2},  {base, 16, 0.9},  {base, 2, 7.1},
                                   {large, 64, 0.8}, {large, 16, 3.1}, {large, 2, 25.2}};
  for (const auto& c : cells) {
    const std::size_t n = count_adapter_params(c.model, pfeiffer(c.crate));
    const std::size_t oracle = c.model.num_layers * pfeiffer_site(c.model.hidden_size, c.crate);
    const std::string label = c.model.model_type + " CRate " + std::to_string(c.crate);
    o.require(n == oracle, label + " count " + std::to_string(n) + " equals oracle " + std::to_string(oracle));
    if (c.model.hidden_size == 768)
      o.require(n == enumerate(empty_adapter(c.model, pfeiffer(c.crate))), label + " count equals enumeration");
    o.require(round_to_tenth_million(n) == c.printed,
              label + " rounds to " + fmt(c.printed) + "M (got " + fmt(round_to_tenth_million(n)) + "M)");
    const std::size_t b = std::max<std::size_t>(1, c.model.hidden_size / c.crate);
    const std::size_t weights_only = c.model.num_layers * 2 * c.model.hidden_size * b;
    o.note(label + "=" + std::to_string(n) + " (weights only " + std::to_string(weights_only) + ", rounds to " +
           fmt(round_to_tenth_million(weights_only)) + "M)");
  }
  o.require(count_adapter_params(base, pfeiffer(64)) == 230544, "Base CRate 64 is 230,544");
  o.require(count_adapter_params(base, pfeiffer(16)) == 894528, "Base CRate 16 is 894,528");
  o.require(count_adapter_params(large, pfeiffer(16)) == 3171840, "Large CRate 16 is 3,171,840");
  return o;
}

// ---------------------------------------------------------------- 2

Outcome criterion2() {
  Outcome o;
  const ModelConfig base = ModelConfig::base();
  Rng rng(0);
  AdapterEntry e;
  e.name = "sst-2";
  e.config = pfeiffer(64);
  e.weights = init_adapter(base, e.config, rng);
  const Package pkg = build_adapter_package(base, e);
  const std::size_t n = count_adapter_params(base, e.config);
  o.require(pkg.weights.blob.size() == 4 * n, "blob bytes equal 4 x params");
  const double container = static_cast<double>(encode_package(pkg).size());
  const double rel = std::abs(container - 0.9e6) / 0.9e6;
  o.require(rel <= kStorageTolerance, "container " + fmt(container / 1e6) + " MB within 10% of 0.9 MB");
  o.note("Base CRate 64 container " + fmt(container / 1e6) + " MB, blob " + fmt(4.0 * n / 1e6) + " MB");

  // Remaining published size cells by the size law.
  struct Cell {
    ModelConfig model;
    std::size_t crate;
    double printed_mb;
  };
  const std::vector<Cell> cells = {{base, 16, 3.5},
                                   {base, 2, 28},
                                   {ModelConfig::large(), 64, 3.2},
                                   {ModelConfig::large(), 16, 13},
                                   {ModelConfig::large(), 2, 97}};
  for (const auto& c : cells) {
    const double mb = 4.0 * static_cast<double>(count_adapter_params(c.model, pfeiffer(c.crate))) / 1e6;
    o.require(std::abs(mb - c.printed_mb) / c.printed_mb <= kStorageTolerance,
              c.model.model_type + " CRate " + std::to_string(c.crate) + " " + fmt(mb) + " MB vs " +
                  fmt(c.printed_mb) + " MB");
  }
  return o;
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
  Outcome o;
  for (const auto& model : {ModelConfig::base(), ModelConfig::large(), ModelConfig::desk()})
    for (std::size_t crate : {64, 16, 2}) {
      AdapterConfig ho = preset("houlsby"), pf = preset("pfeiffer");
      ho.reduction_factor = pf.reduction_factor = crate;
      const std::size_t h = count_adapter_params(model, ho), p = count_adapter_params(model, pf);
      o.require(h == 2 * p, model.model_type + " CRate " + std::to_string(crate) + ": " + std::to_string(h) +
                                " = 2 x " + std::to_string(p));
    }
  return o;
}

// ---------------------------------------------------------------- 4

Outcome criterion4() {
  Outcome o;
  const ModelConfig desk = ModelConfig::desk();
  double worst_input = 0, worst_param = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Model m = Model::initialize(desk, seed);
    Rng rng(seed + 500);
    AdapterEntry& a = m.add_adapter("a", AdapterType::text_task, "pfeiffer");
    for (auto& blk : a.weights.ffn) {
      blk.up_w.value = testing::random_tensor(blk.up_w.value.shape(), rng, 0.2);
      blk.up_b.value = testing::random_tensor(blk.up_b.value.shape(), rng, 0.1);
      blk.down_b.value = testing::random_tensor(blk.down_b.value.shape(), rng, 0.1);
    }
    const std::vector<const AdapterEntry*> chain = {&a};
    const std::size_t seq = 8;
    const Tensor x = testing::random_tensor({seq, desk.hidden_size}, rng);
    const Tensor target = testing::random_tensor({seq, desk.hidden_size}, rng);

    auto layer = [&](Binder& bind, Var in) {
      AddNormHook hook = [&](std::size_t l, Sublayer site, Var s, Var r, const std::function<Var(Var)>& ln) {
        std::vector<const AdapterEntry*> here;
        if (a.config.uses(site)) here = chain;
        return apply_adapter_chain(bind, here, l, site, s, r, ln, desk.layer_norm_epsilon);
      };
      EncoderOptions opts;
      opts.hook = &hook;
      const Var out = encoder_layer_forward(bind, desk, m.backbone().layers[0], 0, in, opts);
      return bind.tape().mse(out, target);
    };
    worst_input = std::max(worst_input, finite_difference_check(
                                            [&](Tape& t, Var in) {
                                              Binder bind(t);
                                              return layer(bind, in);
                                            },
                                            x, kFdStep));
    std::vector<Parameter*> params;
    a.weights.ffn[0].for_each([&](Parameter& p) { params.push_back(&p); });
    worst_param = std::max(worst_param, testing::parameter_gradient_error(
                                            [&](Binder& bind) { return layer(bind, bind.tape().constant(x)); },
                                            params, kFdStep));
  }
  o.require(worst_input < kGradTolerance, "input gradient error " + fmt(worst_input) + " < 1e-4");
  o.require(worst_param < kGradTolerance, "adapter parameter gradient error " + fmt(worst_param) + " < 1e-4");
  o.note("max rel error input " + fmt(worst_input, 3) + ", adapter params " + fmt(worst_param, 3));
  return o;
}

// ---------------------------------------------------------------- 5

Outcome criterion5() {
  Outcome o;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Model m = Model::initialize(ModelConfig::desk(), seed);
    m.add_adapter("t", AdapterType::text_task, "pfeiffer");
    m.add_head("t", HeadKind::classification, 2);
    m.train_adapter({"t"});
    const std::string before = backbone_digest(m.backbone());
    std::vector<Tensor> adapter_before;
    m.adapter("t").weights.for_each([&](const Parameter& p) { adapter_before.push_back(p.value); });

    TrainConfig cfg = TrainConfig::defaults(TrainMode::adapter_only);
    cfg.seed = seed;
    cfg.max_steps = 100;
    train(m, "t", generate_toy_task("majority-token", seed, 16, 128, 500, 50), cfg);

    std::size_t changed = 0, i = 0;
    m.adapter("t").weights.for_each([&](const Parameter& p) { changed += !p.value.identical(adapter_before[i++]); });
    o.require(backbone_digest(m.backbone()) == before, "seed " + std::to_string(seed) + " base digest unchanged");
    o.require(changed > 0, "seed " + std::to_string(seed) + " some adapter tensor changed");
    if (seed == 0) o.note(std::to_string(changed) + "/" + std::to_string(i) + " adapter tensors changed (seed 0)");
  }
  return o;
}

// ---------------------------------------------------------------- 6

Outcome criterion6() {
  Outcome o;
  std::mt19937_64 gen(6);
  const std::vector<std::string> presets = {"pfeiffer", "houlsby"};
  const std::vector<Activation> acts = {Activation::relu, Activation::gelu, Activation::swish, Activation::tanh};
  for (int trial = 0; trial < 10; ++trial) {
    Model m = Model::initialize(ModelConfig::desk(), gen());
    std::vector<std::size_t> ids = {kClsToken};
    const std::size_t len = 2 + gen() % 20;
    while (ids.size() < len) ids.push_back(gen() % 128);
    const EncodeOutput plain = m.encode(ids);

    std::vector<std::string> stack;
    const std::size_t depth = 1 + gen() % 3;
    std::string desc;
    for (std::size_t k = 0; k < depth; ++k) {
      AdapterConfig c = preset(presets[gen() % presets.size()]);
      c.reduction_factor = std::size_t{1} << (gen() % 7);
      c.non_linearity = acts[gen() % acts.size()];
      c.adapter_input = gen() % 2 ? AdapterInput::sublayer_output : AdapterInput::after_original_ln;
      c.residual_source = gen() % 2 ? ResidualSource::adapter_input : ResidualSource::pre_sublayer;
      const std::string name = "a" + std::to_string(k);
      m.add_adapter(name, gen() % 2 ? AdapterType::text_task : AdapterType::text_lang, c);
      stack.push_back(name);
      desc += (k ? "+" : "") + matching_preset(c).value_or("custom") + ":" + std::to_string(c.reduction_factor);
    }
    m.set_active(stack);
    const EncodeOutput with = m.encode(ids);
    o.require(with.hidden.identical(plain.hidden) && with.pooled.identical(plain.pooled),
              "trial " + std::to_string(trial) + " (" + desc + ") bitwise identical");
  }
  return o;
}

// ---------------------------------------------------------------- 7

Outcome criterion7() {
  Outcome o;
  const std::string adapter_preset = "houlsby";
  for (const auto& task_name : toy_task_names()) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const ToyTask task = generate_toy_task(task_name, seed);
      double acc[2] = {0, 0};
      for (int full = 0; full < 2; ++full) {
        Model m = Model::initialize(ModelConfig::desk(), seed);
        TrainConfig cfg = TrainConfig::defaults(full ? TrainMode::full_finetune : TrainMode::adapter_only);
        cfg.seed = seed;
        cfg.max_steps = kToySteps;
        m.add_head("t", HeadKind::classification, task.num_classes);
        if (!full) {
          m.add_adapter("t", AdapterType::text_task, adapter_preset);
          m.train_adapter({"t"});
        }
        acc[full] = train(m, "t", task, cfg).final_dev_metric;
      }
      const std::string label = task_name + " seed " + std::to_string(seed);
      o.require(acc[0] > kParityFloor, label + " adapter " + fmt(acc[0]) + " > 0.9");
      o.require(acc[1] > kParityFloor, label + " full " + fmt(acc[1]) + " > 0.9");
      o.require(acc[0] >= acc[1] - kParityGap, label + " adapter " + fmt(acc[0]) + " >= full " + fmt(acc[1]) + " - 0.05");
      o.note(label + ": adapter " + fmt(acc[0]) + " full " + fmt(acc[1]));
      std::cout << "  ... " << label << ": adapter " << fmt(acc[0]) << " full " << fmt(acc[1]) << std::endl;
    }
  }
  return o;
}

// ---------------------------------------------------------------- 8

Outcome criterion8() {
  Outcome o;
  testing::TempDir dir;
  std::mt19937_64 gen(8);
  const std::vector<std::string> presets = preset_names();
  const ModelConfig desk = ModelConfig::desk();
  Model live = Model::initialize(desk, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::string name = "adapter-" + std::to_string(trial);
    AdapterConfig c = preset(presets[gen() % presets.size()]);
    c.reduction_factor = std::size_t{1} << (gen() % 7);
    c.mh_adapter = gen() % 2;
    c.output_adapter = !c.mh_adapter || gen() % 2;
    c.new_ln_after = gen() % 2;
    Rng rng(gen());
    AdapterEntry& e = live.add_adapter(name, AdapterType::text_task, c);
    e.weights.for_each([&](Parameter& p) { p.value = testing::random_tensor(p.value.shape(), rng, 0.3); });
    const auto path = save_adapter(live, name, dir / (name + ".adpk"));

    Model fresh = Model::initialize(desk, 1);
    const AdapterEntry& back = load_adapter(fresh, path);
    std::vector<Tensor> want;
    e.weights.for_each([&](const Parameter& p) { want.push_back(round_to_f32(p.value)); });
    std::size_t i = 0, equal = 0;
    back.weights.for_each([&](const Parameter& p) { equal += i < want.size() && p.value.identical(want[i++]); });
    o.require(equal == want.size() && back.config == c, name + " round trip bitwise at binary32");

    ModelConfig other = desk;
    switch (gen() % 4) {
      case 0: other.hidden_size = 32; break;
      case 1: other.num_layers = 3; break;
      case 2: other.vocab_size = 256; break;
      default: other.layer_norm_epsilon = 1e-5; break;
    }
    Model mismatched = Model::initialize(other, 1);
    bool rejected = false;
    try {
      load_adapter(mismatched, path);
    } catch (const CompatibilityError& err) {
      const std::string msg = err.what();
      rejected = msg.find(desk.hash()) != std::string::npos && msg.find(other.hash()) != std::string::npos;
    }
    o.require(rejected, name + " rejected by a mismatched model, both hashes cited");

    auto bytes = read_file(path);
    const std::size_t pos = gen() % bytes.size();
    bytes[pos] ^= static_cast<std::uint8_t>(1u << (gen() % 8));
    bool digest_failed = false;
    try {
      decode_package(bytes);
    } catch (const IntegrityError&) {
      digest_failed = true;
    }
    o.require(digest_failed, name + " corrupted byte " + std::to_string(pos) + " fails the digest check");
  }
  return o;
}

// ---------------------------------------------------------------- 9

Outcome criterion9() {
  Outcome o;
  const testing::HubFixture f = testing::make_hub_fixture();
  std::vector<HubEntry> ingested;
  for (const auto& file : f.metadata_files) ingested.push_back(ingest_metadata(file));
  o.require(ingested == f.entries, "ingest validates every fixture entry unchanged");

  const std::string ref = build_index(ingested).serialize();
  std::vector<HubEntry> perm = ingested;
  std::sort(perm.begin(), perm.end(), [](const HubEntry& a, const HubEntry& b) { return a.url < b.url; });
  bool identical = true;
  do identical &= build_index(perm).serialize() == ref;
  while (std::next_permutation(perm.begin(), perm.end(),
                               [](const HubEntry& a, const HubEntry& b) { return a.url < b.url; }));
  o.require(identical, "index bytes identical over all 24 input orders");

  const HubIndex index = parse_index(ref);
  o.require(explore(index) == std::vector<std::string>{"language (1)", "task (3)"}, "level 1 lists task and language");
  const auto l2 = explore(index, "task");
  o.require(std::find(l2.begin(), l2.end(), "sentiment") != l2.end() &&
                std::find(l2.begin(), l2.end(), "  sst-2 (2)") != l2.end(),
            "level 2/3 under task: sentiment / sst-2");
  const auto l3 = explore(index, "language", "sw");
  o.require(!l3.empty() && l3[0] == "wikipedia-sw", "level 3 under language/sw: wikipedia-sw");

  const std::string live = f.live.hash();
  try {
    const HubEntry& e = resolve(index, {"sst", live, std::nullopt});
    o.require(e.id == "sst-2" && e.model_hash == live, "resolve(\"sst\") gives the compatible sst-2");
  } catch (const Error& e) {
    o.require(false, std::string("resolve(\"sst\") threw: ") + e.what());
  }
  try {
    resolve(index, {"s", live, std::nullopt});
    o.require(false, "resolve(\"s\") is ambiguous");
  } catch (const AmbiguityError& e) {
    const std::string all = join(e.candidates(), " ");
    o.require(all.find("sst-2") != std::string::npos && all.find("stsb") != std::string::npos,
              "ambiguity lists sst-2 and stsb");
  }
  bool leaked = false;
  for (const std::string frag : {"sst", "sst-2", "SST-2", "2", "t-"}) {
    try {
      leaked |= resolve(index, {frag, live, std::nullopt}).model_hash != live;
    } catch (const Error&) {
    }
  }
  bool not_found = false;
  try {
    resolve(build_index({f.entries[3]}), {"sst", live, std::nullopt});
  } catch (const NotFoundError&) {
    not_found = true;
  }
  o.require(!leaked && not_found, "incompatible entry never resolves for the live model");

  testing::TempDir cache;
  Fetcher fetcher(cache.path());
  const HubEntry& sst = resolve(index, {"sst", live, std::nullopt});
  const FetchResult first = fetcher.fetch(sst);
  const FetchResult second = fetcher.fetch(sst);
  o.require(!first.from_cache && second.from_cache && fetcher.transfers() == 1, "second fetch served from cache");
  Model m = Model::initialize(f.live, 0);
  o.require(load_adapter(m, second.package).name == "sst-2", "fetched package stitches into the live model");
  return o;
}

// ---------------------------------------------------------------- 10

struct Run {
  int code;
  std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Run adaptkit_cli(const std::vector<std::string>& args, const testing::TempDir& dir) {
  std::string cmd = ADAPTKIT_CLI_PATH;
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " >" + (dir / "stdout").string() + " 2>" + (dir / "stderr").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(dir / "stdout"), slurp(dir / "stderr")};
}

Outcome criterion10() {
  Outcome o;
  testing::TempDir dir;
  const std::string out = (dir / "train").string();
  auto step = [&](const std::string& name, const std::vector<std::string>& args) {
    const Run r = adaptkit_cli(args, dir);
    o.require(r.code == 0, name + " exits 0 (got " + std::to_string(r.code) + ")");
    if (r.code != 0) o.note(name + " stderr: " + r.err);
    return r;
  };
  const Run train = step("train", {"train", "--task", "majority-token", "--adapter-name", "majority",
                                   "--adapter-config", "houlsby", "--seed", "0", "--out", out});
  if (!o.pass) return o;
  const double train_acc = nlohmann::json::parse(train.out)["dev_accuracy"].get<double>();
  step("pack", {"pack", "--package", out + "/majority.adpk", "--out", (dir / "hub" / "majority.zip").string(),
                "--category", "counting", "--dataset", "majority-token", "--description", "lifecycle run"});
  step("validate", {"validate", (dir / "hub" / "majority.yaml").string(), (dir / "hub" / "majority.zip").string(),
                    "--fetch"});
  step("index", {"index", (dir / "hub").string(), "--out", (dir / "index.json").string()});
  const Run search = step("search", {"search", "--index", (dir / "index.json").string(), "--query", "major",
                                     "--model-checkpoint", out + "/backbone.ckpt"});
  if (!o.pass) return o;
  const Run run = step("run", {"run", "--model-checkpoint", out + "/backbone.ckpt", "--adapter", "major",
                               "--index", (dir / "index.json").string(), "--cache-dir", (dir / "cache").string(),
                               "--input-file", out + "/dev.tsv"});
  if (!o.pass) return o;
  std::istringstream lines(run.out);
  std::string line, last;
  while (std::getline(lines, line))
    if (!line.empty()) last = line;
  const double run_acc = nlohmann::json::parse(last)["summary"]["accuracy"].get<double>();
  o.require(run_acc == train_acc, "run accuracy " + fmt(run_acc, 17) + " equals train accuracy " + fmt(train_acc, 17));
  o.note("dev accuracy " + fmt(train_acc) + " at train and run time");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    std::string title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "adapter parameter counts, Base and Large", criterion1},
      {2, "adapter storage sizes", criterion2},
      {3, "houlsby doubles pfeiffer", criterion3},
      {4, "gradient correctness through a layer with an adapter", criterion4},
      {5, "frozen backbone during adapter training", criterion5},
      {6, "identity at initialization", criterion6},
      {7, "toy-task parity of adapters and full fine-tuning", criterion7},
      {8, "package round trip and compatibility", criterion8},
      {9, "hub end to end", criterion9},
      {10, "lifecycle chain through the CLI", criterion10},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.number << ": " << c.title << " (" << fmt(secs, 3)
              << " s)" << std::endl;
    for (const auto& n : o.notes) std::cout << "    " << n << "\n";
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
