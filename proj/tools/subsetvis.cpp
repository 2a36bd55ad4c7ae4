#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "subsetvis/error.hpp"
#include "subsetvis/features.hpp"
#include "subsetvis/sen.hpp"
#include "subsetvis/synthetic.hpp"
#include "subsetvis/tsne.hpp"

namespace fs = std::filesystem;
using namespace subsetvis;

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

// "Week=Sat,Sun" -> filter on Week.
Filter parse_where(const Dataset& ds, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw std::runtime_error("expected Attribute=bin[,bin...] in '" + text + "'");
  const auto id = ds.attribute_id(text.substr(0, eq));
  const auto& attr = ds.attribute(id);
  std::vector<BinIndex> bins;
  std::stringstream ss(text.substr(eq + 1));
  std::string label;
  while (std::getline(ss, label, ',')) {
    const auto it = std::find(attr.bins.begin(), attr.bins.end(), label);
    if (it == attr.bins.end()) throw std::runtime_error("'" + label + "' is not a bin of " + attr.name);
    bins.push_back(static_cast<BinIndex>(it - attr.bins.begin()));
  }
  return make_filter(ds, id, bins);
}

struct SliceArgs {
  std::string csv, schema, attribute;
  std::vector<std::string> where;
};

struct Sliced {
  Dataset dataset;
  std::vector<Subset> subsets;
};

Sliced sliced_subsets(const SliceArgs& a) {
  auto ds_out = ingest(read_file(a.csv), parse_schema_config(nlohmann::json::parse(read_file(a.schema))));
  Selection sel;
  for (const auto& w : a.where) {
    auto f = parse_where(ds_out, w);
    sel.path.push_back(f.attribute);
    if (!is_hidden(f, ds_out)) sel.filters.push_back(std::move(f));
  }
  auto subsets = slice(ds_out, sel, ds_out.attribute_id(a.attribute));
  std::vector<AttributeTuple> tuples;
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    auto& s = subsets[i];
    s.id = "s" + std::to_string(i + 1);
    std::vector<AttributeId> filter_attrs;
    for (const auto& f : s.filters) filter_attrs.push_back(f.attribute);
    auto skip = sel.path;
    skip.insert(skip.end(), s.slicing_attributes.begin(), s.slicing_attributes.end());
    for (auto& t : feature_tuples(ds_out, filter_attrs, skip)) tuples.push_back(std::move(t));
    if (!filter_attrs.empty()) tuples.push_back(canonical_tuple(filter_attrs));
  }
  const auto cube = cube_build(ds_out, tuples);
  for (auto& s : subsets) extract_features(s, ds_out, cube, sel.path);
  return {std::move(ds_out), std::move(subsets)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subsetvis: slice tabular data into subsets, embed and project them"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Write a crime-log style CSV and its schema");
  std::size_t records = 20000;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  synth->add_option("--records", records, "Record count");
  synth->add_option("--seed", seed, "Seed");
  synth->add_option("--out-dir", out_dir, "Writes crime.csv and crime.schema.json here");

  SliceArgs sa;
  auto add_slice = [&](CLI::App* cmd) {
    cmd->add_option("--csv", sa.csv, "Input CSV")->required();
    cmd->add_option("--schema", sa.schema, "Schema config JSON")->required();
    cmd->add_option("--attribute", sa.attribute, "Slicing attribute")->required();
    cmd->add_option("--where", sa.where, "Restrict first, e.g. Week=Sat,Sun (repeatable)");
  };
  auto* features = app.add_subcommand("features", "Slice and export subset features as JSON lines");
  add_slice(features);
  std::string out;
  features->add_option("--out", out, "Output file (stdout if omitted)");

  auto* project = app.add_subcommand("project", "Slice, train a SEN and export embeddings and 2-D coordinates");
  add_slice(project);
  std::string emb_out, coords_out;
  project->add_option("--seed", seed, "Training and t-SNE seed");
  project->add_option("--embeddings", emb_out, "Embeddings JSON lines")->required();
  project->add_option("--coords", coords_out, "Coordinates JSON lines")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto t = make_crime_like(records, seed);
      write_file(fs::path(out_dir) / "crime.csv", t.csv);
      write_file(fs::path(out_dir) / "crime.schema.json", t.schema.dump(2) + "\n");
    } else if (*features) {
      const auto [ds, subsets] = sliced_subsets(sa);
      const auto text = features_jsonl(subsets, ds);
      if (out.empty()) {
        std::cout << text;
      } else {
        write_file(out, text);
      }
    } else if (*project) {
      const auto subsets = sliced_subsets(sa).subsets;
      sen::TrainConfig tc;
      tc.seed = seed;
      const auto model = sen::train(sen::TrainingData::from_subsets(subsets), tc);
      tsne::TsneConfig pc;
      pc.seed = seed;
      const auto proj = tsne::tsne(model.embeddings, pc);
      std::vector<std::string> ids;
      for (const auto& s : subsets) ids.push_back(s.id);
      write_file(emb_out, sen::embeddings_jsonl(model.embeddings, ids));
      write_file(coords_out, tsne::coords_jsonl(proj.coords, ids));
      std::cerr << "trained " << model.epochs << " epochs, final loss " << model.loss_history.back() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
