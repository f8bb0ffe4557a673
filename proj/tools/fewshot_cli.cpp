// Command-line driver. Talks to the library only through the C interface.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fewshot/fewshot.h"

namespace {

using nlohmann::json;

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kInputData = 3, kNumeric = 4, kIo = 5 };

struct ConfigError {
  std::string what;
};

int exit_code(fsl_status status) {
  switch (status) {
    case FSL_OK: return kOk;
    case FSL_CONFIG:
    case FSL_INVALID_ARGUMENT: return kConfig;
    case FSL_INPUT_DATA: return kInputData;
    case FSL_NUMERIC: return kNumeric;
    case FSL_IO: return kIo;
    default: return kFailure;
  }
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError{"cannot open config file " + path};
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError{path + ": " + e.what()};
  }
}

// key.sub=value; value is JSON when it parses, a plain string otherwise.
void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError{"--set expects key=value, got '" + assignment + "'"};
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError{"--set: empty path component in '" + key + "'"};
    if (!node->is_object()) throw ConfigError{"--set: '" + key + "' goes through a non-object value"};
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

struct Options {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  unsigned long long seed = 0;
  bool seed_given = false;
  unsigned threads = 0;
  bool print = false;
};

int run(const std::string& command, const Options& opt) {
  json config;
  try {
    config = load_config(opt.config_path);
    if (!config.is_object()) throw ConfigError{"config must be a JSON object"};
    for (const auto& o : opt.overrides) apply_override(config, o);
    if (opt.seed_given) config["seed"] = opt.seed;
  } catch (const ConfigError& e) {
    std::cerr << "fewshot " << command << ": config error: " << e.what << '\n';
    return kConfig;
  }

  if (fsl_set_workers(opt.threads) != FSL_OK) {
    std::cerr << "fewshot: " << fsl_last_error() << '\n';
    return kConfig;
  }
  const std::string out_dir = opt.out_dir.empty() ? "results/" + command : opt.out_dir;
  char* report = nullptr;
  const fsl_status status =
      fsl_run_experiment(command.c_str(), config.dump().c_str(), out_dir.c_str(), opt.print ? &report : nullptr);
  if (status != FSL_OK) {
    std::cerr << "fewshot " << command << ": " << fsl_status_name(status) << ": " << fsl_last_error() << '\n';
    return exit_code(status);
  }
  if (report != nullptr) {
    std::cout << report << '\n';
    fsl_string_free(report);
  } else {
    std::cout << "wrote " << out_dir << "/report.json\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel few-shot learning experiments"};
  app.set_version_flag("--version", std::string(fsl_version()));
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"orthogonality", "Quasi-orthogonality of centered feature vectors across kernels and dimensions"},
      {"volume-ratio", "Monte-Carlo ball or cap pre-image volume ratio sweeps"},
      {"bounds", "Learning-bound sandwiches on synthetic two-ball data"},
      {"fewshot-roc", "Few-shot classifier ROC/AUROC on feature CSV tables"},
      {"ingest-check", "Parse and summarise a feature CSV table"},
      {"synth-features", "Write separable synthetic train/test feature tables"},
  };

  std::vector<Options> options(std::size(subs));
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    CLI::App* sub = app.add_subcommand(subs[i].name, subs[i].help);
    Options& o = options[i];
    sub->add_option("-c,--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out_dir, "Output directory (default results/<command>)");
    sub->add_option("--set", o.overrides, "Override a config field, key[.sub]=value (JSON or string)");
    sub->add_option_function<unsigned long long>(
        "--seed", [&o](const unsigned long long& s) { o.seed = s, o.seed_given = true; }, "Root RNG seed");
    sub->add_option("-j,--threads", o.threads, "Worker threads, 0 = all cores");
    sub->add_flag("--print", o.print, "Print the report JSON to stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  for (std::size_t i = 0; i < std::size(subs); ++i)
    if (app.got_subcommand(subs[i].name)) return run(subs[i].name, options[i]);
  return kConfig;
}
