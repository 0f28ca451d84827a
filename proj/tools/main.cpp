#include <iostream>
#include <map>
#include <memory>

#include "CLI11.hpp"
#include "commands.hpp"
#include "roomsense/error.hpp"
#include "roomsense/io.hpp"
#include "run_config.hpp"

using nlohmann::json;
using namespace roomsense;

namespace {

std::string flag_name(std::string key) {
  for (auto& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

struct Parsed {
  std::string config, out;
  std::uint64_t seed = 0;
  bool dry_run = false;
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  CLI::Option* config_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

int fail(int code, const std::string& what) {
  std::cerr << "roomsense: " << what << "\n";
  return code;
}

int execute(const cli::Command& cmd, const Parsed& p) {
  cli::RunRequest req;
  req.command = cmd.name;
  if (p.config_opt->count()) req.config_path = p.config;
  if (p.out_opt->count()) req.out = p.out;
  if (p.seed_opt->count()) req.seed = p.seed;
  req.sets = p.sets;
  req.dry_run = p.dry_run;
  for (const auto& [key, opt] : p.options)
    if (opt->count()) req.flags[key] = p.values.at(key);

  json cfg;
  try {
    cfg = cli::resolve(cmd.defaults, req);
    if (!cfg.at("out").is_string() || cfg.at("out").get<std::string>().empty())
      throw ConfigError("key 'out' must name a directory");
    cmd.validate(cfg);
  } catch (const DivergenceError& e) {
    return fail(3, e.what());
  } catch (const ConfigError& e) {
    return fail(1, e.what());
  } catch (const json::exception& e) {
    return fail(1, std::string("invalid config: ") + e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }

  if (p.dry_run) {
    std::cout << cfg.dump(2) << "\nconfiguration valid, nothing written\n";
    return 0;
  }

  try {
    const cli::RunContext ctx(cmd.name, cfg.at("out").get<std::string>(), false);
    ctx.dir();
    io::write_json(ctx.path("config.json"), cfg);
    cmd.run(cfg, ctx);
  } catch (const DivergenceError& e) {
    return fail(3, std::string("training diverged: ") + e.what());
  } catch (const ConfigError& e) {
    return fail(1, e.what());
  } catch (const std::exception& e) {
    return fail(2, e.what());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occupancy and open-window detection from gas-sensor time series"};
  app.set_version_flag("--version", std::string(cli::kVersion));
  app.require_subcommand(1);

  std::vector<std::unique_ptr<Parsed>> parsed;
  std::vector<CLI::App*> subs;
  for (const auto& cmd : cli::commands()) {
    auto* sub = app.add_subcommand(cmd.name, cmd.summary);
    auto p = std::make_unique<Parsed>();
    p->config_opt = sub->add_option("--config", p->config, "JSON config file");
    p->out_opt = sub->add_option("--out", p->out, "Output directory (env ROOMSENSE_OUT)");
    p->seed_opt = sub->add_option("--seed", p->seed, "Seed overriding every seed in the config");
    sub->add_flag("--dry-run", p->dry_run, "Validate the resolved config, write nothing");
    sub->add_option("--set", p->sets, "Nested override, e.g. --set fit.epochs=20")->take_all();
    for (const auto& [key, value] : cmd.defaults.items()) {
      if (key == "seed" || key == "out") continue;
      p->values[key];
      p->options[key] = sub->add_option(flag_name(key), p->values[key], "default: " + value.dump());
    }
    subs.push_back(sub);
    parsed.push_back(std::move(p));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed()) return execute(cli::commands()[i], *parsed[i]);
  return 1;
}
