#include <CLI11.hpp>
#include <iostream>
#include <nlohmann/json.hpp>

#include "dfr/commands.hpp"

// Experiments are JSON documents; flags only override scalar config fields.
int main(int argc, char** argv) {
  CLI::App app{"Deep feature reweighting: group-robust last-layer retraining"};
  app.require_subcommand(1);

  struct SubState {
    CLI::App* sub = nullptr;
    std::string config_path;
    std::string out_dir;
    long long seed = 0;
  };
  const std::pair<const char*, const char*> commands[] = {
      {"generate", "Generate a synthetic spurious-correlation dataset"},
      {"train-erm", "Train the MLP feature extractor by ERM"},
      {"extract", "Extract penultimate-layer embeddings with a trained model"},
      {"dfr", "Retrain the last layer on group-balanced data"},
      {"evaluate", "Evaluate a saved head on an embedding file"},
      {"sweep", "Run a sweep/ablation (pcorr, retrains, l1)"},
      {"verify", "Run the full oracle and invariant suite"},
  };
  std::vector<SubState> subs(std::size(commands));
  for (size_t i = 0; i < std::size(commands); ++i) {
    auto& st = subs[i];
    st.sub = app.add_subcommand(commands[i].first, commands[i].second);
    st.sub->add_option("-c,--config", st.config_path, "JSON config file");
    st.sub->add_option("--out-dir", st.out_dir, "Override config out_dir");
    st.sub->add_option("--seed", st.seed, "Override config seed");
  }

  CLI11_PARSE(app, argc, argv);

  for (size_t i = 0; i < std::size(commands); ++i) {
    const auto& st = subs[i];
    if (!st.sub->parsed()) continue;
    try {
      nlohmann::json config = st.config_path.empty()
                                  ? nlohmann::json::object()
                                  : dfr::cmd::load_config_file(st.config_path);
      if (st.sub->count("--out-dir")) config["out_dir"] = st.out_dir;
      if (st.sub->count("--seed")) config["seed"] = st.seed;
      return dfr::cmd::run_command(commands[i].first, config, std::cout, std::cerr);
    } catch (const std::exception& e) {
      nlohmann::json error;
      error["error"] = {{"command", commands[i].first}, {"message", e.what()}};
      std::cerr << error.dump() << "\n";
      return 1;
    }
  }
  return 1;
}
