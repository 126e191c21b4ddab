#include "cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "fsr/checkpoint.hpp"
#include "fsr/error.hpp"
#include "fsr/evaluate.hpp"
#include "fsr/pipeline.hpp"
#include "fsr/service.hpp"
#include "fsr/synth.hpp"

namespace fsr::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Every flag, with its config-file key equal to the long flag name.
struct Options {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string world;
  std::string model;
  std::string sinr;
  std::string profile = "full";
  std::size_t species = 32;
  std::vector<std::size_t> k = eval::kDefaultKs;
  std::size_t seeds = 1;
  std::vector<double> h;
  std::vector<std::string> ensemble;
  std::string host = "127.0.0.1";
  int port = 8080;
  json file;  // parsed --config
  bool seed_set = false;
  bool species_set = false;
};

bool passed(CLI::App& app, const std::string& flag) {
  const auto* opt = app.get_option_no_throw(flag);
  return opt != nullptr && opt->count() > 0;
}

// Fills options the user did not pass on the command line from the config
// file; command-line values win.
template <typename V>
void from_config(CLI::App& app, Options& o, const char* name, V& value) {
  if (o.file.contains(name) && !passed(app, std::string("--") + name)) {
    value = o.file.at(name).get<V>();
  }
}

json section(const Options& o, const char* name) {
  return o.file.contains(name) ? o.file.at(name) : json::object();
}

data::WorldConfig world_config(const Options& o) {
  json j = data::to_json(data::WorldConfig{});
  j.update(section(o, "world_config"));
  auto c = data::world_config_from_json(j);
  if (o.seed_set) c.seed = o.seed;
  if (o.species_set) c.n_species = o.species;
  return c;
}

model::ModelConfig model_config(const Options& o) {
  json j = model::to_json(o.profile == "benchmark" ? pipeline::benchmark_model_config()
                                                   : model::ModelConfig{});
  j.update(section(o, "model_config"));
  return model::model_config_from_json(j);
}

train::TrainConfig train_config(const Options& o) {
  train::TrainConfig base = o.profile == "benchmark" ? pipeline::benchmark_train_config(o.seed)
                                                     : train::TrainConfig{};
  base.seed = o.seed;
  auto c = train::train_config_from_json(section(o, "train_config"), base);
  c.seed = o.seed;
  return c;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

train::EpochCallback epoch_logger(std::ostream& err, const char* stage) {
  return [&err, stage](const train::EpochLog& l) {
    err << stage << " epoch " << l.epoch << " loss " << l.mean_loss << " lr " << l.lr
        << " examples " << l.examples << '\n';
  };
}

int do_synth(const Options& o, std::ostream& out) {
  require(o.out, "--out");
  const auto world = data::generate_synthetic_world(world_config(o));
  data::save_world(world, o.out);
  out << "wrote " << o.out << ": " << world.species.size() << " species ("
      << world.holdout_ids().size() << " held out), " << world.observations.size()
      << " observations\n";
  return 0;
}

int do_pretrain(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.world, "--world");
  require(o.out, "--out");
  const auto world = data::load_world(o.world);
  const auto ids = world.train_ids();
  const auto cfg = train_config(o);
  model::SinrModel<float> m(model_config(o), ids, train::derive_rng(cfg.seed, 20)());
  train::pretrain_sinr(m, world.observations.subset(ids), cfg, epoch_logger(err, "sinr"));
  model::save_checkpoint(m, o.out, cfg.seed, static_cast<int>(cfg.sinr_epochs));
  out << "wrote " << o.out << " (" << model::checksum(m.parameters()) << ")\n";
  return 0;
}

int do_train(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.world, "--world");
  require(o.model, "--model");
  require(o.out, "--out");
  const auto world = data::load_world(o.world);
  auto sinr = model::load_sinr(o.model);
  const auto cfg = train_config(o);
  const data::StubTextProvider text(world.texts(), sinr.config().text_dim);
  model::FsSinrModel<float> m(sinr.config(), train::derive_rng(cfg.seed, 21)());
  std::vector<std::uint32_t> seen;
  train::train_fsinr(m, &sinr.encoder, world.observations.subset(world.train_ids()),
                     {&text, nullptr}, cfg, &seen, epoch_logger(err, "fsinr"));
  for (const auto id : world.holdout_ids()) {
    if (std::find(seen.begin(), seen.end(), id) != seen.end()) {
      throw Error(ErrorCode::kDomainError, "held-out species reached training");
    }
  }
  model::save_checkpoint(m, o.out, cfg.seed, static_cast<int>(cfg.fsinr_epochs));
  out << "wrote " << o.out << " (" << model::checksum(m.parameters()) << ")\n";
  return 0;
}

int do_eval(const Options& o, std::ostream& out) {
  require(o.world, "--world");
  require(o.model, "--model");
  if (o.seeds == 0) throw CLI::ValidationError("--seeds", "must be at least 1");
  const auto world = data::load_world(o.world);
  auto fsinr = model::load_fsinr(o.model);
  std::optional<model::SinrModel<float>> sinr;
  if (!o.sinr.empty()) sinr.emplace(model::load_sinr(o.sinr));
  const data::StubTextProvider text(world.texts(), fsinr.config().text_dim);
  const auto data = pipeline::heldout_eval_data(world, &text);

  std::vector<eval::EvalRow> rows;
  std::vector<eval::EnsembleRow> ens_rows;
  std::vector<model::FsSinrModel<float>> members;
  for (const auto& path : o.ensemble) members.push_back(model::load_fsinr(path));
  std::vector<std::unique_ptr<fewshot::CellCache>> caches;
  std::vector<fewshot::EnsembleMember> ens;
  for (auto& m : members) {
    caches.push_back(std::make_unique<fewshot::CellCache>(m.encoder, world.config.grid));
    ens.push_back({&m, caches.back().get()});
  }
  for (std::size_t s = 0; s < o.seeds; ++s) {
    eval::EvalOptions opts;
    opts.ks = o.k;
    opts.seed = o.seed + s;
    opts.extra_h = o.h;
    auto part = eval::evaluate(fsinr, sinr ? &*sinr : nullptr, data, opts);
    rows.insert(rows.end(), part.begin(), part.end());
    if (!ens.empty()) {
      auto e = eval::evaluate_ensemble(ens, data, o.k, opts.seed);
      ens_rows.insert(ens_rows.end(), e.begin(), e.end());
    }
  }

  out << std::left << std::setw(12) << "method" << std::setw(5) << "k" << "MAP (mean ± std over "
      << o.seeds << " seed" << (o.seeds == 1 ? "" : "s") << ")\n";
  for (const auto& [key, c] : eval::summarize(rows)) {
    out << std::setw(12) << key.first << std::setw(5) << key.second << std::fixed
        << std::setprecision(4) << c.map.mean << " ± " << c.map.std << '\n';
  }
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / "report.json") << eval::report_json(rows, ens_rows, o.h).dump(2)
                                                   << '\n';
    for (const char* method : {eval::kFsSinr, eval::kFsSinrText, eval::kPrototype, eval::kActive,
                               eval::kLogReg}) {
      if (std::any_of(rows.begin(), rows.end(), [&](const auto& r) { return r.method == method; })) {
        eval::write_csv(rows, method, fs::path(o.out) / (std::string(method) + ".csv"), o.h);
      }
    }
    out << "wrote " << o.out << "/report.json\n";
  }
  return 0;
}

int do_serve(const Options& o, std::ostream& out) {
  if (o.model.empty() && o.ensemble.empty()) throw CLI::RequiredError("--model");
  std::vector<model::FsSinrModel<float>> models;
  if (!o.model.empty()) models.push_back(model::load_fsinr(o.model));
  for (const auto& path : o.ensemble) models.push_back(model::load_fsinr(path));
  std::vector<model::FsSinrModel<float>*> ptrs;
  for (auto& m : models) ptrs.push_back(&m);
  std::map<std::string, geo::GridSpec> presets{{"global", geo::GridSpec{}}};
  if (!o.world.empty()) presets["world"] = data::load_world(o.world).config.grid;
  const service::InferenceService svc(ptrs, presets);
  out << "serving " << ptrs.size() << " model(s) on http://" << o.host << ':' << o.port << "/api/\n"
      << std::flush;
  if (!service::serve(svc, o.host, o.port)) {
    throw Error(ErrorCode::kIoError, "cannot listen on port " + std::to_string(o.port));
  }
  return 0;
}

int do_inspect(const Options& o, std::ostream& out) {
  require(o.model, "--model");
  const auto info = model::read_checkpoint_info(o.model);
  json j{{"kind", info.kind},
         {"config", model::to_json(info.config)},
         {"seed", info.seed},
         {"epoch", info.epoch}};
  if (info.kind == "sinr") {
    auto m = model::load_sinr(o.model);
    j["species_ids"] = info.species_ids;
    j["parameter_counts"] = model::to_json(m.counts());
    j["checksum"] = model::checksum(m.parameters());
  } else {
    auto m = model::load_fsinr(o.model);
    j["parameter_counts"] = model::to_json(m.counts());
    j["checksum"] = model::checksum(m.parameters());
  }
  out << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot species range estimation"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON file holding any flag plus world_config, "
                                          "model_config and train_config sections");
    sub->add_option("--seed", o.seed, "Seed for all randomness");
  };
  auto add_profile = [&](CLI::App* sub) {
    sub->add_option("--profile", o.profile, "full (default sizes) or benchmark (reduced width)")
        ->check(CLI::IsMember({"full", "benchmark"}));
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic world directory");
  add_common(synth);
  synth->add_option("--species", o.species, "Number of species");
  synth->add_option("--out", o.out, "Output directory");

  auto* pretrain = app.add_subcommand("pretrain", "Train the SINR location encoder and classifier");
  add_common(pretrain);
  add_profile(pretrain);
  pretrain->add_option("--world", o.world, "World directory");
  pretrain->add_option("--out", o.out, "Checkpoint base path");

  auto* trainc = app.add_subcommand("train", "Train FS-SINR from a SINR checkpoint");
  add_common(trainc);
  add_profile(trainc);
  trainc->add_option("--world", o.world, "World directory");
  trainc->add_option("--model", o.model, "SINR checkpoint base path");
  trainc->add_option("--out", o.out, "Checkpoint base path");

  auto* evalc = app.add_subcommand("eval", "Evaluate on the held-out species");
  evalc->set_help_flag("--help", "Print this help message and exit");  // -h is not free
  add_common(evalc);
  evalc->add_option("--world", o.world, "World directory");
  evalc->add_option("--model", o.model, "FS-SINR checkpoint base path");
  evalc->add_option("--sinr", o.sinr, "SINR checkpoint for the baselines");
  evalc->add_option("--k", o.k, "Context sizes")->delimiter(',');
  evalc->add_option("--seeds", o.seeds, "Context draws per species (seeds seed..seed+n-1)");
  evalc->add_option("--h", o.h, "Extra distance-weighting strengths")->delimiter(',');
  evalc->add_option("--ensemble", o.ensemble, "FS-SINR checkpoints for uncertainty metrics")
      ->delimiter(',');
  evalc->add_option("--out", o.out, "Report directory");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP inference API");
  add_common(serve);
  serve->add_option("--model", o.model, "FS-SINR checkpoint base path");
  serve->add_option("--ensemble", o.ensemble, "Further FS-SINR checkpoints")->delimiter(',');
  serve->add_option("--world", o.world, "World directory for the 'world' grid preset");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port");

  auto* inspect = app.add_subcommand("inspect", "Describe a checkpoint");
  add_common(inspect);
  inspect->add_option("--model", o.model, "Checkpoint base path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    auto* sub = app.get_subcommands().front();
    if (!o.config.empty()) {
      std::ifstream in(o.config);
      if (!in) throw Error(ErrorCode::kIoError, "cannot open " + o.config);
      o.file = json::parse(in, nullptr, false);
      if (o.file.is_discarded() || !o.file.is_object()) {
        throw Error(ErrorCode::kParseError, o.config + " is not a JSON object");
      }
      from_config(*sub, o, "seed", o.seed);
      from_config(*sub, o, "out", o.out);
      from_config(*sub, o, "world", o.world);
      from_config(*sub, o, "model", o.model);
      from_config(*sub, o, "sinr", o.sinr);
      from_config(*sub, o, "profile", o.profile);
      from_config(*sub, o, "species", o.species);
      from_config(*sub, o, "k", o.k);
      from_config(*sub, o, "seeds", o.seeds);
      from_config(*sub, o, "h", o.h);
      from_config(*sub, o, "ensemble", o.ensemble);
      from_config(*sub, o, "host", o.host);
      from_config(*sub, o, "port", o.port);
    }
    o.seed_set = passed(*sub, "--seed") || o.file.contains("seed");
    o.species_set = passed(*sub, "--species") || o.file.contains("species");
    if (sub == synth) return do_synth(o, out);
    if (sub == pretrain) return do_pretrain(o, out, err);
    if (sub == trainc) return do_train(o, out, err);
    if (sub == evalc) return do_eval(o, out);
    if (sub == serve) return do_serve(o, out);
    return do_inspect(o, out);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: bad config value: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fsr::cli
