// veridip: train small classifiers, simulate model-stealing attacks, and
// verify model ownership from privacy-leakage fingerprints.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "veridip/accountant.hpp"
#include "veridip/data.hpp"
#include "veridip/errors.hpp"
#include "veridip/manifest.hpp"
#include "veridip/model_io.hpp"
#include "veridip/nn.hpp"
#include "veridip/oracle.hpp"
#include "veridip/ownership.hpp"
#include "veridip/serve.hpp"
#include "veridip/shadow.hpp"
#include "veridip/steal.hpp"

namespace {

using namespace veridip;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitNotStolen = 3;

std::vector<std::uint32_t> parse_dims(const std::string& text) {
  std::vector<std::uint32_t> dims;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ','))
    dims.push_back(static_cast<std::uint32_t>(std::stoul(token)));
  return dims;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) values.push_back(std::stoi(token));
  return values;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) values.push_back(std::stod(token));
  return values;
}

// "1:0.05,11:0.01" -> [(1, 0.05), (11, 0.01)]
std::vector<std::pair<int, double>> parse_schedule(const std::string& text) {
  std::vector<std::pair<int, double>> schedule;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    const auto colon = token.find(':');
    if (colon == std::string::npos)
      throw InvalidArgument("schedule entries look like EPOCH:VALUE");
    schedule.emplace_back(std::stoi(token.substr(0, colon)),
                          std::stod(token.substr(colon + 1)));
  }
  return schedule;
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + name + "'");
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "adam") return Optimizer::adam;
  if (name == "sgd") return Optimizer::sgd;
  throw InvalidArgument("unknown optimizer '" + name + "'");
}

// Run manifest bookkeeping shared by every subcommand.
struct ManifestScope {
  RunManifest manifest;
  std::chrono::steady_clock::time_point started =
      std::chrono::steady_clock::now();
  std::string path;

  ManifestScope(CLI::App* sub, const std::string& command_line) {
    manifest.command = command_line;
    for (const auto* opt : sub->get_options()) {
      if (opt->get_name().empty()) continue;
      if (opt->count() > 0) {
        std::string joined;
        for (const auto& r : opt->results()) {
          if (!joined.empty()) joined += ",";
          joined += r;
        }
        manifest.config[opt->get_name()] = joined.empty() ? "true" : joined;
      } else if (!opt->get_default_str().empty()) {
        manifest.config[opt->get_name()] = opt->get_default_str();
      }
    }
  }

  void input(const std::string& file) {
    manifest.input_hashes[file] = file_crc32_hex(file);
  }
  void output(const std::string& file) { manifest.output_paths.push_back(file); }
  void seed(std::uint64_t s) { manifest.seeds.push_back(s); }

  void write() {
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    if (path.empty())
      path = manifest.output_paths.empty()
                 ? "veridip-run.manifest.json"
                 : manifest.output_paths.front() + ".manifest.json";
    write_manifest(manifest, path);
  }
};

void emit(const nlohmann::json& line) { std::cout << line.dump() << "\n"; }

// Shared verification inputs for `verify` and `min-ns`.
struct VerifyArgs {
  std::string suspect, members_csv, nonmembers_csv, farm_dir;
  std::string attack = "global";
  std::string mode = "basic";
  std::string label_column = "label";
  double alpha = 0.01;
  std::uint64_t seed = 0;
  std::uint64_t budget = 0;  // 0 = unlimited
  int timeout_ms = 5000;
  int retries = 3;
};

void add_verify_options(CLI::App* sub, VerifyArgs& args) {
  sub->add_option("--suspect", args.suspect, "Suspect model file or http(s) URL")
      ->required();
  sub->add_option("--members", args.members_csv,
                  "CSV of private training samples (the member pool)")
      ->required();
  sub->add_option("--nonmembers", args.nonmembers_csv,
                  "CSV of fresh samples from the same distribution")
      ->required();
  sub->add_option("--attack", args.attack, "MI attack: global or per-sample")
      ->check(CLI::IsMember({"global", "per-sample"}))
      ->capture_default_str();
  sub->add_option("--mode", args.mode, "Verification mode: basic or enhanced")
      ->check(CLI::IsMember({"basic", "enhanced"}))
      ->capture_default_str();
  sub->add_option("--farm", args.farm_dir,
                  "Shadow-farm directory (needed for per-sample or enhanced)");
  sub->add_option("--alpha", args.alpha, "Significance level")
      ->capture_default_str();
  sub->add_option("--seed", args.seed, "Sampling seed")->capture_default_str();
  sub->add_option("--label-column", args.label_column, "CSV label column")
      ->capture_default_str();
  sub->add_option("--budget", args.budget,
                  "Suspect query budget in samples (0 = unlimited)")
      ->capture_default_str();
  sub->add_option("--timeout-ms", args.timeout_ms, "Remote oracle timeout")
      ->capture_default_str();
  sub->add_option("--retries", args.retries, "Remote oracle retry count")
      ->capture_default_str();
}

struct VerifySetup {
  VerifyPools pools;
  std::unique_ptr<PredictionOracle> oracle;
  AttackSpec attack;
  VerifyMode mode = VerifyMode::basic;
  std::optional<ShadowFarm> farm;
  std::optional<FarmContext> farm_ctx;
};

VerifySetup prepare_verification(const VerifyArgs& args, ManifestScope& scope) {
  VerifySetup setup;
  const auto members = load_csv(args.members_csv, args.label_column);
  const auto nonmembers = load_csv(args.nonmembers_csv, args.label_column);
  scope.input(args.members_csv);
  scope.input(args.nonmembers_csv);
  setup.pools = make_pools(members, nonmembers);

  setup.attack.kind =
      args.attack == "global" ? AttackKind::global : AttackKind::per_sample;
  setup.mode = args.mode == "basic" ? VerifyMode::basic : VerifyMode::enhanced;

  if (setup.attack.kind == AttackKind::per_sample ||
      setup.mode == VerifyMode::enhanced) {
    if (args.farm_dir.empty())
      throw InvalidArgument(
          "per-sample attack and enhanced mode need --farm <dir>");
    setup.farm = load_farm(args.farm_dir, setup.pools.base);
    setup.farm_ctx = prepare_farm_context(*setup.farm, setup.attack, setup.mode);
  }

  setup.oracle = open_oracle(args.suspect, args.timeout_ms, args.retries);
  if (args.budget > 0) setup.oracle->set_query_budget(args.budget);
  if (args.suspect.rfind("http", 0) != 0) scope.input(args.suspect);
  return setup;
}

std::string command_line(int argc, char** argv) {
  std::string line;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) line += ' ';
    line += argv[i];
  }
  return line;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model ownership verification via privacy-leakage fingerprints"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Optional config file; flags take precedence");
  const std::string invocation = command_line(argc, argv);

  std::string manifest_override;
  app.add_option("--manifest", manifest_override,
                 "Where to write the run manifest JSON");

  int exit_code = kExitOk;

  // ---- gen-data ------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  struct {
    int n = 1000, dim = 2, classes = 2;
    double separation = 2.0, label_noise = 0.0;
    std::uint64_t seed = 0;
    std::string out, out_prefix, split_fractions;
    std::uint64_t split_seed = 0;
  } gd;
  gen->add_option("--n", gd.n, "Sample count")->capture_default_str();
  gen->add_option("--dim", gd.dim, "Feature dimension")->capture_default_str();
  gen->add_option("--classes", gd.classes, "Class count")->capture_default_str();
  gen->add_option("--separation", gd.separation, "Cluster mean norm")
      ->capture_default_str();
  gen->add_option("--label-noise", gd.label_noise, "Label flip probability")
      ->capture_default_str();
  gen->add_option("--seed", gd.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gd.out, "Write one CSV");
  gen->add_option("--split", gd.split_fractions,
                  "train,test,holdout fractions; writes three CSVs");
  gen->add_option("--out-prefix", gd.out_prefix, "Prefix for split CSVs");
  gen->add_option("--split-seed", gd.split_seed, "Split permutation seed")
      ->capture_default_str();
  gen->callback([&] {
    ManifestScope scope(gen, invocation);
    scope.path = manifest_override;
    scope.seed(gd.seed);
    const auto data = gen_synthetic(gd.n, gd.dim, gd.classes, gd.separation,
                                    gd.label_noise, gd.seed);
    if (!gd.split_fractions.empty()) {
      if (gd.out_prefix.empty())
        throw InvalidArgument("--split needs --out-prefix");
      const auto f = parse_double_list(gd.split_fractions);
      if (f.size() != 3) throw InvalidArgument("--split needs three fractions");
      const auto parts = split(data, {f[0], f[1], f[2], gd.split_seed});
      scope.seed(gd.split_seed);
      const std::string train_path = gd.out_prefix + "_train.csv";
      const std::string test_path = gd.out_prefix + "_test.csv";
      const std::string holdout_path = gd.out_prefix + "_holdout.csv";
      save_csv(parts.train, train_path);
      save_csv(parts.test, test_path);
      save_csv(parts.holdout, holdout_path);
      for (const auto& p : {train_path, test_path, holdout_path})
        scope.output(p);
      emit({{"train", train_path},
            {"test", test_path},
            {"holdout", holdout_path},
            {"n", gd.n}});
    } else {
      if (gd.out.empty()) throw InvalidArgument("need --out or --split");
      save_csv(data, gd.out);
      scope.output(gd.out);
      emit({{"written", gd.out}, {"n", gd.n}});
    }
    scope.write();
  });

  // ---- train ----------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train an MLP classifier");
  struct {
    std::string data_csv, test_csv, history_csv, out;
    std::string dims = "2,16,2", activation = "relu", optimizer = "adam";
    std::string label_column = "label", lr_schedule;
    double lr = 1e-3;
    int epochs = 100, batch = 32;
    std::uint64_t seed = 0;
  } ta;
  tr->add_option("--data", ta.data_csv, "Training CSV")->required();
  tr->add_option("--test", ta.test_csv, "Optional held-out CSV for history");
  tr->add_option("--dims", ta.dims, "Layer widths, e.g. 4,16,2")
      ->capture_default_str();
  tr->add_option("--activation", ta.activation, "relu or tanh")
      ->check(CLI::IsMember({"relu", "tanh"}))
      ->capture_default_str();
  tr->add_option("--optimizer", ta.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  tr->add_option("--lr", ta.lr, "Learning rate")->capture_default_str();
  tr->add_option("--lr-schedule", ta.lr_schedule,
                 "EPOCH:MULTIPLIER list, e.g. 20:0.1,40:0.01");
  tr->add_option("--epochs", ta.epochs, "Epochs")->capture_default_str();
  tr->add_option("--batch", ta.batch, "Batch size")->capture_default_str();
  tr->add_option("--seed", ta.seed, "Init and shuffle seed")
      ->capture_default_str();
  tr->add_option("--label-column", ta.label_column, "CSV label column")
      ->capture_default_str();
  tr->add_option("--history", ta.history_csv, "Write per-epoch metrics CSV");
  tr->add_option("--out", ta.out, "Model file to write")->required();
  tr->callback([&] {
    ManifestScope scope(tr, invocation);
    scope.path = manifest_override;
    scope.seed(ta.seed);
    const auto data = load_csv(ta.data_csv, ta.label_column);
    scope.input(ta.data_csv);
    std::optional<Dataset> eval;
    if (!ta.test_csv.empty()) {
      eval = load_csv(ta.test_csv, ta.label_column);
      scope.input(ta.test_csv);
    }

    TrainConfig cfg;
    cfg.optimizer = parse_optimizer(ta.optimizer);
    cfg.learning_rate = ta.lr;
    cfg.epochs = ta.epochs;
    cfg.batch_size = ta.batch;
    cfg.seed = ta.seed;
    if (!ta.lr_schedule.empty()) cfg.lr_schedule = parse_schedule(ta.lr_schedule);

    auto init =
        mlp_init(parse_dims(ta.dims), parse_activation(ta.activation), ta.seed);
    const auto [model, history] = train(init, data, cfg, eval ? &*eval : nullptr);
    save_model(model, ta.out);
    scope.output(ta.out);

    if (!ta.history_csv.empty()) {
      std::ofstream out(ta.history_csv);
      if (!out) throw Error("cannot write '" + ta.history_csv + "'");
      out << "epoch,train_loss,train_acc,test_loss,test_acc\n";
      char buf[160];
      for (const auto& e : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                      e.train_loss, e.train_acc,
                      e.test_loss.value_or(std::nan("")),
                      e.test_acc.value_or(std::nan("")));
        out << buf;
      }
      scope.output(ta.history_csv);
    }
    nlohmann::json summary{{"written", ta.out},
                           {"train_acc", history.back().train_acc},
                           {"train_loss", history.back().train_loss}};
    if (history.back().test_acc) summary["test_acc"] = *history.back().test_acc;
    emit(summary);
    scope.write();
  });

  // ---- dp-train -------------------------------------------------------
  auto* dp = app.add_subcommand("dp-train", "Train with clipped, noised SGD");
  struct {
    std::string data_csv, out, dims = "2,16,2", activation = "relu";
    std::string label_column = "label";
    double lr = 0.1, clip = 1.0, noise = 1.0, delta = 1e-5;
    int epochs = 10, batch = 32;
    std::uint64_t seed = 0;
  } da;
  dp->add_option("--data", da.data_csv, "Training CSV")->required();
  dp->add_option("--dims", da.dims, "Layer widths")->capture_default_str();
  dp->add_option("--activation", da.activation, "relu or tanh")
      ->check(CLI::IsMember({"relu", "tanh"}))
      ->capture_default_str();
  dp->add_option("--lr", da.lr, "Learning rate")->capture_default_str();
  dp->add_option("--epochs", da.epochs, "Epochs")->capture_default_str();
  dp->add_option("--batch", da.batch, "Batch size")->capture_default_str();
  dp->add_option("--clip", da.clip, "Per-example gradient clip threshold C")
      ->capture_default_str();
  dp->add_option("--noise-multiplier", da.noise, "Noise multiplier z")
      ->capture_default_str();
  dp->add_option("--delta", da.delta, "Target delta")->capture_default_str();
  dp->add_option("--seed", da.seed, "Seed")->capture_default_str();
  dp->add_option("--label-column", da.label_column, "CSV label column")
      ->capture_default_str();
  dp->add_option("--out", da.out, "Model file to write")->required();
  dp->callback([&] {
    ManifestScope scope(dp, invocation);
    scope.path = manifest_override;
    scope.seed(da.seed);
    const auto data = load_csv(da.data_csv, da.label_column);
    scope.input(da.data_csv);

    DpConfig cfg;
    cfg.clip_threshold = da.clip;
    cfg.noise_multiplier = da.noise;
    cfg.target_delta = da.delta;
    cfg.epochs = da.epochs;
    cfg.batch_size = da.batch;
    cfg.learning_rate = da.lr;
    cfg.seed = da.seed;

    auto init =
        mlp_init(parse_dims(da.dims), parse_activation(da.activation), da.seed);
    const auto result = dp_train(init, data, cfg);
    save_model(result.model, da.out);
    scope.output(da.out);
    emit({{"written", da.out},
          {"spent_epsilon", result.spent_epsilon},
          {"best_rdp_order", result.best_rdp_order},
          {"steps", result.steps},
          {"sampling_rate", result.sampling_rate},
          {"delta", da.delta}});
    scope.write();
  });

  // ---- steal ----------------------------------------------------------
  auto* st = app.add_subcommand("steal", "Produce a stolen copy of a model");
  struct {
    std::string attack = "me", victim, data_csv, out;
    std::string dims = "2,16,2", activation = "relu", ft_schedule;
    std::string label_column = "label";
    double lr = 1e-3, lambda1 = 0.5, lambda2 = 0.5, tau = 1.5;
    int epochs = 100, batch = 32, timeout_ms = 5000, retries = 3;
    std::uint64_t seed = 0;
  } sa;
  st->add_option("--attack", sa.attack, "me, kd or ft")
      ->check(CLI::IsMember({"me", "kd", "ft"}))
      ->capture_default_str();
  st->add_option("--victim", sa.victim, "Victim model file or URL")->required();
  st->add_option("--data", sa.data_csv, "Attacker data CSV")->required();
  st->add_option("--dims", sa.dims, "Student layer widths (me/kd)")
      ->capture_default_str();
  st->add_option("--activation", sa.activation, "Student activation (me/kd)")
      ->check(CLI::IsMember({"relu", "tanh"}))
      ->capture_default_str();
  st->add_option("--lr", sa.lr, "Learning rate (me/kd)")->capture_default_str();
  st->add_option("--epochs", sa.epochs, "Epochs")->capture_default_str();
  st->add_option("--batch", sa.batch, "Batch size")->capture_default_str();
  st->add_option("--lambda1", sa.lambda1, "KD hard-label weight")
      ->capture_default_str();
  st->add_option("--lambda2", sa.lambda2, "KD soft-target weight")
      ->capture_default_str();
  st->add_option("--tau", sa.tau, "KD temperature")->capture_default_str();
  st->add_option("--ft-schedule", sa.ft_schedule,
                 "FT rates as EPOCH:LR, e.g. 1:0.05,11:0.01,21:0.001");
  st->add_option("--seed", sa.seed, "Seed")->capture_default_str();
  st->add_option("--label-column", sa.label_column, "CSV label column")
      ->capture_default_str();
  st->add_option("--timeout-ms", sa.timeout_ms, "Remote victim timeout")
      ->capture_default_str();
  st->add_option("--retries", sa.retries, "Remote victim retries")
      ->capture_default_str();
  st->add_option("--out", sa.out, "Stolen model file")->required();
  st->callback([&] {
    ManifestScope scope(st, invocation);
    scope.path = manifest_override;
    scope.seed(sa.seed);
    const auto data = load_csv(sa.data_csv, sa.label_column);
    scope.input(sa.data_csv);

    StealConfig cfg;
    cfg.lambda1 = sa.lambda1;
    cfg.lambda2 = sa.lambda2;
    cfg.tau = sa.tau;
    cfg.epochs = sa.epochs;
    cfg.learning_rate = sa.lr;
    cfg.batch_size = sa.batch;
    cfg.seed = sa.seed;

    MlpModel stolen;
    if (sa.attack == "ft") {
      cfg.attack = StealAttack::ft;
      cfg.ft_lr_schedule = parse_schedule(sa.ft_schedule);
      if (sa.victim.rfind("http", 0) == 0)
        throw InvalidArgument("fine-tuning needs white-box access: pass a file");
      const auto victim = load_model(sa.victim);
      scope.input(sa.victim);
      stolen = steal_ft(victim, data, cfg);
    } else {
      auto oracle = open_oracle(sa.victim, sa.timeout_ms, sa.retries);
      if (sa.victim.rfind("http", 0) != 0) scope.input(sa.victim);
      const auto dims = parse_dims(sa.dims);
      const auto act = parse_activation(sa.activation);
      if (sa.attack == "me") {
        cfg.attack = StealAttack::me;
        stolen = steal_me(*oracle, data.features, cfg, dims, act);
      } else {
        cfg.attack = StealAttack::kd;
        stolen = steal_kd(*oracle, data, cfg, dims, act);
      }
    }
    save_model(stolen, sa.out);
    scope.output(sa.out);
    emit({{"written", sa.out}, {"attack", sa.attack}});
    scope.write();
  });

  // ---- shadow-farm ----------------------------------------------------
  auto* sf = app.add_subcommand("shadow-farm",
                                "Train shadow models over the verification pools");
  struct {
    std::string members_csv, nonmembers_csv, out_dir;
    std::string dims = "2,16,2", activation = "relu", optimizer = "adam";
    std::string label_column = "label";
    double lr = 1e-3;
    int count = 32, epochs = 100, batch = 32;
    std::uint64_t seed = 0;
  } fa;
  sf->add_option("--members", fa.members_csv, "Member pool CSV")->required();
  sf->add_option("--nonmembers", fa.nonmembers_csv, "Non-member pool CSV")
      ->required();
  sf->add_option("--count", fa.count, "Number of shadow models")
      ->capture_default_str();
  sf->add_option("--dims", fa.dims, "Shadow layer widths")->capture_default_str();
  sf->add_option("--activation", fa.activation, "relu or tanh")
      ->check(CLI::IsMember({"relu", "tanh"}))
      ->capture_default_str();
  sf->add_option("--optimizer", fa.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  sf->add_option("--lr", fa.lr, "Learning rate")->capture_default_str();
  sf->add_option("--epochs", fa.epochs, "Epochs per shadow")
      ->capture_default_str();
  sf->add_option("--batch", fa.batch, "Batch size")->capture_default_str();
  sf->add_option("--seed", fa.seed, "Farm seed")->capture_default_str();
  sf->add_option("--label-column", fa.label_column, "CSV label column")
      ->capture_default_str();
  sf->add_option("--out", fa.out_dir, "Farm directory")->required();
  sf->callback([&] {
    ManifestScope scope(sf, invocation);
    scope.path = manifest_override;
    scope.seed(fa.seed);
    const auto members = load_csv(fa.members_csv, fa.label_column);
    const auto nonmembers = load_csv(fa.nonmembers_csv, fa.label_column);
    scope.input(fa.members_csv);
    scope.input(fa.nonmembers_csv);
    const auto base = concat(members, nonmembers);

    TrainConfig cfg;
    cfg.optimizer = parse_optimizer(fa.optimizer);
    cfg.learning_rate = fa.lr;
    cfg.epochs = fa.epochs;
    cfg.batch_size = fa.batch;
    const auto farm = build_farm(base, fa.count, parse_dims(fa.dims),
                                 parse_activation(fa.activation), cfg, fa.seed,
                                 static_cast<int>(members.size()));
    save_farm(farm, fa.out_dir);
    scope.output(fa.out_dir);
    emit({{"written", fa.out_dir},
          {"shadows", fa.count},
          {"samples", base.size()},
          {"members", members.size()}});
    scope.write();
  });

  // ---- find-sensitive -------------------------------------------------
  auto* fs = app.add_subcommand("find-sensitive",
                                "Rank member samples by privacy exposure");
  struct {
    std::string farm_dir, members_csv, nonmembers_csv, out;
    std::string label_column = "label";
  } na;
  fs->add_option("--farm", na.farm_dir, "Shadow-farm directory")->required();
  fs->add_option("--members", na.members_csv, "Member pool CSV")->required();
  fs->add_option("--nonmembers", na.nonmembers_csv, "Non-member pool CSV")
      ->required();
  fs->add_option("--label-column", na.label_column, "CSV label column")
      ->capture_default_str();
  fs->add_option("--out", na.out, "Output CSV")->required();
  fs->callback([&] {
    ManifestScope scope(fs, invocation);
    scope.path = manifest_override;
    const auto members = load_csv(na.members_csv, na.label_column);
    const auto nonmembers = load_csv(na.nonmembers_csv, na.label_column);
    scope.input(na.members_csv);
    scope.input(na.nonmembers_csv);
    const auto farm = load_farm(na.farm_dir, concat(members, nonmembers));

    const auto etas = eta_scores(farm);
    std::ofstream out(na.out);
    if (!out) throw Error("cannot write '" + na.out + "'");
    out << "sample_id,eta,mean_loss_in,mean_loss_out\n";
    char buf[160];
    int emitted = 0;
    for (const auto& e : etas) {
      if (e.sample_id >= farm.n_members) continue;  // member side only
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.sample_id,
                    e.eta, e.mean_loss_in, e.mean_loss_out);
      out << buf;
      ++emitted;
    }
    scope.output(na.out);
    emit({{"written", na.out}, {"rows", emitted}});
    scope.write();
  });

  // ---- verify ---------------------------------------------------------
  auto* vf = app.add_subcommand("verify", "Run one ownership test");
  VerifyArgs va;
  int verify_ns = 10;
  bool assert_stolen = false;
  std::string verify_out;
  add_verify_options(vf, va);
  vf->add_option("--n-s", verify_ns, "Samples exposed per side")
      ->capture_default_str();
  vf->add_flag("--assert-stolen", assert_stolen,
               "Exit 3 unless the verdict is 'stolen'");
  vf->add_option("--out", verify_out, "Verdict JSON path");
  vf->callback([&] {
    ManifestScope scope(vf, invocation);
    scope.path = manifest_override;
    scope.seed(va.seed);
    auto setup = prepare_verification(va, scope);
    const auto verdict = ownership_test(
        *setup.oracle, setup.pools, verify_ns, va.alpha, setup.attack,
        setup.mode, setup.farm_ctx ? &*setup.farm_ctx : nullptr, va.seed);

    const std::string json = verdict_to_json(verdict);
    if (!verify_out.empty()) {
      std::ofstream out(verify_out);
      if (!out) throw Error("cannot write '" + verify_out + "'");
      out << json << "\n";
      scope.output(verify_out);
    }
    std::cout << json << "\n";
    scope.write();
    if (assert_stolen && verdict.outcome == 0) exit_code = kExitNotStolen;
  });

  // ---- min-ns ---------------------------------------------------------
  auto* mn = app.add_subcommand("min-ns",
                                "Smallest n_s whose median p-value clears alpha");
  VerifyArgs ma;
  std::string grid_text = "5,10,20,50,100";
  int repeats = 9;
  std::string minns_out;
  add_verify_options(mn, ma);
  mn->add_option("--n-grid", grid_text, "Ascending n_s grid")
      ->capture_default_str();
  mn->add_option("--repeats", repeats, "Verifications per grid point")
      ->capture_default_str();
  mn->add_option("--out", minns_out, "Result JSON path");
  mn->callback([&] {
    ManifestScope scope(mn, invocation);
    scope.path = manifest_override;
    scope.seed(ma.seed);
    auto setup = prepare_verification(ma, scope);
    const auto grid = parse_int_list(grid_text);
    const auto found = min_exposed_search(
        *setup.oracle, setup.pools, ma.alpha, setup.attack, setup.mode,
        setup.farm_ctx ? &*setup.farm_ctx : nullptr, grid, repeats, ma.seed);

    nlohmann::json result{{"alpha", ma.alpha},
                          {"repeats", repeats},
                          {"grid", grid},
                          {"attack", ma.attack},
                          {"mode", ma.mode}};
    if (found)
      result["min_n_s"] = *found;
    else
      result["min_n_s"] = nullptr;
    if (!minns_out.empty()) {
      std::ofstream out(minns_out);
      if (!out) throw Error("cannot write '" + minns_out + "'");
      out << result.dump() << "\n";
      scope.output(minns_out);
    }
    emit(result);
    scope.write();
  });

  // ---- dp-bound -------------------------------------------------------
  auto* db = app.add_subcommand(
      "dp-bound", "Lower bound on ownership p-values under a privacy budget");
  struct {
    std::string eps_grid, ns_list = "10,20,100", out;
    double eps_max = 1.0;
    int eps_steps = 100;
    double sigma0 = 0.2324, sigma1 = 0.2324;
  } ba;
  db->add_option("--eps-grid", ba.eps_grid,
                 "Explicit epsilon list (overrides --eps-max/--eps-steps)");
  db->add_option("--eps-max", ba.eps_max, "Grid upper end")
      ->capture_default_str();
  db->add_option("--eps-steps", ba.eps_steps, "Grid point count")
      ->capture_default_str();
  db->add_option("--n-s-list", ba.ns_list, "Exposed sample sizes")
      ->capture_default_str();
  db->add_option("--sigma0", ba.sigma0, "Member score deviation")
      ->capture_default_str();
  db->add_option("--sigma1", ba.sigma1, "Non-member score deviation")
      ->capture_default_str();
  db->add_option("--out", ba.out, "CSV path")->required();
  db->callback([&] {
    ManifestScope scope(db, invocation);
    scope.path = manifest_override;
    std::vector<double> eps;
    if (!ba.eps_grid.empty()) {
      eps = parse_double_list(ba.eps_grid);
    } else {
      for (int i = 0; i <= ba.eps_steps; ++i)
        eps.push_back(ba.eps_max * i / ba.eps_steps);
    }
    const auto ns = parse_int_list(ba.ns_list);
    const auto points = bound_curve(eps, ns, ba.sigma0, ba.sigma1);
    std::ofstream out(ba.out);
    if (!out) throw Error("cannot write '" + ba.out + "'");
    out << bound_curve_csv(points);
    scope.output(ba.out);
    emit({{"written", ba.out}, {"rows", points.size()}});
    scope.write();
  });

  // ---- serve ----------------------------------------------------------
  auto* sv = app.add_subcommand("serve", "Serve a model file over HTTP");
  struct {
    std::string model;
    int port = 8080;
  } se;
  sv->add_option("--model", se.model, "Model file")->required();
  sv->add_option("--port", se.port, "Port to bind")->capture_default_str();
  sv->callback([&] {
    ManifestScope scope(sv, invocation);
    scope.path = manifest_override.empty() ? "veridip-serve.manifest.json"
                                           : manifest_override;
    scope.input(se.model);
    ModelServer server(load_model(se.model), se.port);
    scope.write();
    emit({{"serving", se.model},
          {"port", server.port()},
          {"url", server.base_url()}});
    server.run();
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return kExitRuntime;
  }
  return exit_code;
}
