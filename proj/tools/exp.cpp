#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "subsetvis/error.hpp"
#include "subsetvis/experiments.hpp"

namespace fs = std::filesystem;
namespace ex = subsetvis::experiments;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct DataArgs {
  std::string jsonl;
  std::string csv;
  std::string label_column = "label";
  std::string split = "20x29,69";
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--data", d.jsonl, "JSON-lines records {label, views}");
  cmd->add_option("--csv", d.csv, "Flat numeric CSV instead of --data");
  cmd->add_option("--label-column", d.label_column, "Category column of --csv");
  cmd->add_option("--split", d.split, "View lengths of --csv rows, e.g. 20x29,69");
}

ex::MultiViewRecordSet load(const DataArgs& d) {
  if (!d.jsonl.empty()) return ex::load_jsonl(read_file(d.jsonl));
  if (!d.csv.empty()) {
    const auto lengths = ex::parse_view_split(d.split);
    return ex::load_flat_csv(read_file(d.csv), d.label_column, lengths);
  }
  throw std::runtime_error("one of --data or --csv is required");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SEN experiment harness"};
  app.require_subcommand(1);

  DataArgs data;
  std::string out;
  std::uint64_t seed = 7;

  auto* run = app.add_subcommand("run", "Feature-replacement experiment");
  add_data_options(run, data);
  std::vector<std::string> methods{"sen", "concat"};
  std::vector<std::size_t> replace{0, 5, 10, 15, 20, 25};
  std::size_t trials = 5;
  std::size_t max_epochs = 2000;
  int restarts = 10;
  run->add_option("--methods", methods, "sen and/or concat")->delimiter(',');
  run->add_option("--replace", replace, "Replaced view counts")->delimiter(',');
  run->add_option("--trials", trials, "Trials per cell");
  run->add_option("--seed", seed, "Base seed");
  run->add_option("--max-epochs", max_epochs, "SEN epoch cap");
  run->add_option("--kmeans-restarts", restarts, "k-means restarts");
  run->add_option("--out", out, "Output directory")->required();

  auto* bench = app.add_subcommand("bench", "SEN training-time grid");
  std::vector<std::size_t> subsets{100, 300, 500};
  std::vector<std::size_t> features{10, 15, 20, 25, 30};
  std::size_t dims = 20, reps = 5;
  bench->add_option("--subsets", subsets, "Subset counts")->delimiter(',');
  bench->add_option("--features", features, "Feature counts")->delimiter(',');
  bench->add_option("--dims", dims, "Feature vector length");
  bench->add_option("--reps", reps, "Repetitions per cell");
  bench->add_option("--seed", seed, "Base seed");
  bench->add_option("--out", out, "CSV output")->required();

  auto* embed = app.add_subcommand("embed", "Train a SEN on records and export embeddings");
  add_data_options(embed, data);
  embed->add_option("--seed", seed, "Training seed");
  embed->add_option("--out", out, "JSON-lines output")->required();

  auto* synth = app.add_subcommand("synth", "Write a multi-view surrogate data set");
  ex::SurrogateConfig sc;
  std::string split = "20x29,69";
  synth->add_option("--categories", sc.categories, "Category count");
  synth->add_option("--per-category", sc.per_category, "Records per category");
  synth->add_option("--split", split, "View lengths");
  synth->add_option("--noise", sc.noise, "Within-category spread");
  synth->add_option("--seed", seed, "Seed");
  synth->add_option("--out", out, "JSON-lines output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto rs = load(data);
      ex::ExperimentConfig cfg;
      cfg.methods.clear();
      for (const auto& m : methods) cfg.methods.push_back(ex::parse_method(m));
      cfg.replacement_counts = replace;
      cfg.trials = trials;
      cfg.seed = seed;
      cfg.sen.max_epochs = max_epochs;
      cfg.kmeans_restarts = restarts;
      const auto report = ex::run_experiment(rs, cfg, [](const ex::CellResult& c) {
        std::cerr << ex::to_string(c.method) << " m=" << c.replaced << " trial=" << c.trial
                  << " acc=" << c.report.acc << " (" << c.seconds << " s)\n";
      });
      write_file(fs::path(out) / "report.csv", ex::report_csv(report));
      write_file(fs::path(out) / "report.json", ex::report_json(report).dump(2) + "\n");
      std::cout << ex::report_csv(report);
    } else if (*bench) {
      ex::BenchConfig cfg;
      cfg.subset_counts = subsets;
      cfg.feature_counts = features;
      cfg.feature_dims = dims;
      cfg.repetitions = reps;
      cfg.seed = seed;
      const auto cells = ex::bench_efficiency(cfg, [](const ex::BenchCell& c) {
        std::cerr << c.subsets << "x" << c.features << ": " << c.mean_seconds << " s\n";
      });
      write_file(out, ex::bench_csv(cells));
      std::cout << ex::bench_csv(cells);
    } else if (*embed) {
      const auto rs = load(data);
      subsetvis::sen::TrainConfig cfg;
      cfg.seed = seed;
      const auto emb = ex::sen_embed(rs, cfg);
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < rs.size(); ++i) ids.push_back("r" + std::to_string(i));
      write_file(out, subsetvis::sen::embeddings_jsonl(emb, ids));
    } else if (*synth) {
      sc.view_dims = ex::parse_view_split(split);
      sc.seed = seed;
      write_file(out, ex::to_jsonl(ex::make_surrogate(sc)));
    }
  } catch (const subsetvis::Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
