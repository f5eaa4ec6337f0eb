#include "mobinet/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace mobinet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError(file.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(file.string() + ": write failed");
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError(file.string() + ": missing input");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void persist_run_info(const RunConfig& cfg, const std::string& command) {
  const RunLayout layout{cfg.output_dir};
  write_text(layout.root / "config" / (command + ".conf"), cfg.to_text());
  write_text(layout.root / "seeds.json", cfg.seed_record());
}

template <typename Fn>
void run_stage(const std::string& stage, Fn&& fn) {
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::vector<MobilityNetwork> load_required(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": missing input directory");
  auto nets = load_networks(dir);
  if (nets.empty()) throw IoError(dir.string() + ": no network files");
  return nets;
}

DistanceMatrix load_distances(const RunLayout& layout, Index n) {
  if (!fs::exists(layout.tessellation()))
    throw IoError(layout.tessellation().string() + ": missing input");
  const Tessellation tess = load_tessellation_geojson(layout.tessellation());
  if (tess.size() != n)
    throw ConfigError("tessellation has " + std::to_string(tess.size()) +
                      " tiles but networks have " + std::to_string(n) + " nodes");
  return distance_matrix(tess);
}

void replace_networks(std::span<const MobilityNetwork> nets, const fs::path& dir) {
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".csv") fs::remove(entry.path());
  }
  fs::create_directories(dir);
  save_networks(nets, dir);
}

GenerationMode generation_mode(const RunConfig& cfg, const std::string& stage) {
  return cfg.generation == GenerationKind::kExpected ? GenerationMode::expected()
                                                     : GenerationMode::multinomial(cfg.stage_seed(stage));
}

}  // namespace

void cmd_ingest(const RunConfig& cfg) {
  run_stage("ingest", [&] {
    const RunLayout layout{cfg.output_dir};
    if (cfg.trips.empty()) throw ConfigError("ingest.trips: no trip files given");
    IngestReport report;
    std::vector<TripRecord> records;
    for (const auto& file : cfg.trips) {
      auto part = read_trips_csv(file, report);
      records.insert(records.end(), part.begin(), part.end());
    }
    const auto kept = filter_trips(records, cfg.min_duration_s);
    report.filtered_short = records.size() - kept.size();

    const Tessellation tess = build_grid_tessellation(cfg.resolved_bbox(), cfg.rows, cfg.cols);
    DailyNetworks daily = build_daily_networks(kept, tess);
    report.dropped_outside = daily.dropped_outside;
    report.retained = kept.size() - daily.dropped_outside;
    report.days = daily.networks.size();
    if (daily.networks.size() <= cfg.test_count)
      throw ConfigError("ingest: " + std::to_string(daily.networks.size()) +
                        " days available, need more than ingest.test_count = " +
                        std::to_string(cfg.test_count));
    const NetworkSplit split =
        split_networks(daily.networks, cfg.test_count, cfg.stage_seed("split"), cfg.split);

    save_tessellation_geojson(tess, layout.tessellation());
    replace_networks(daily.networks, layout.networks("all"));
    replace_networks(split.train, layout.networks("train"));
    replace_networks(split.test, layout.networks("test"));
    write_text(layout.root / "ingest_report.json", report.to_json());
    json s;
    s["train"] = json::array();
    s["test"] = json::array();
    for (const auto& n : split.train) s["train"].push_back(n.date());
    for (const auto& n : split.test) s["test"].push_back(n.date());
    write_text(layout.root / "split.json", s.dump(2) + "\n");
    persist_run_info(cfg, "ingest");
    std::cerr << "ingest: " << report.days << " days, " << split.train.size() << " train / "
              << split.test.size() << " test\n";
  });
}

void cmd_fit_gravity(const RunConfig& cfg) {
  run_stage("fit-gravity", [&] {
    const RunLayout layout{cfg.output_dir};
    const auto train = load_required(layout.networks("train"));
    const DistanceMatrix dist = load_distances(layout, train.front().n());
    GravityFitOptions opt;
    opt.deterrence = cfg.deterrence;
    opt.seed = cfg.stage_seed("gravity-fit");
    const GravityParams params = fit_gravity(train, dist, opt);
    write_text(layout.gravity_params(), params.to_json());
    persist_run_info(cfg, "fit-gravity");
    std::cerr << "fit-gravity: beta1 = " << params.beta1 << ", beta2 = " << params.beta2 << "\n";
  });
}

void cmd_train_mogan(const RunConfig& cfg) {
  run_stage("train-mogan", [&] {
    const RunLayout layout{cfg.output_dir};
    const auto train_set = load_required(layout.networks("train"));
    GanConfig gan = cfg.gan;
    gan.seed = cfg.stage_seed("gan");
    const fs::path snapshots = layout.mogan_dir() / "snapshots";
    if (fs::exists(snapshots)) fs::remove_all(snapshots);
    auto hook = [&](int epoch, GanModel& model) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%05d", epoch);
      const auto nets = sample(model, 4, derive_seed(gan.seed, "snapshot", static_cast<std::uint64_t>(epoch)),
                               cfg.round_samples, std::string(name));
      replace_networks(nets, snapshots / name);
    };
    auto [model, history] = train(train_set, gan, hook);
    fs::create_directories(layout.mogan_dir());
    model.save(layout.mogan_checkpoint());
    history.write_csv(layout.mogan_dir() / "history.csv");
    persist_run_info(cfg, "train-mogan");
    if (!history.records.empty()) {
      const auto& last = history.records.back();
      std::cerr << "train-mogan: " << history.records.size() << " iterations, final D(x) = "
                << last.real_score << ", D(G(z)) = " << last.fake_score << "\n";
    }
  });
}

void cmd_generate(const RunConfig& cfg, const std::string& model, const std::string& days) {
  run_stage("generate:" + model, [&] {
    const RunLayout layout{cfg.output_dir};
    if (days != "test" && days != "train" && days != "all")
      throw ConfigError("--days: expected test, train or all");
    const auto reference = load_required(layout.networks(days));
    std::vector<MobilityNetwork> out;
    if (model == "gravity") {
      const DistanceMatrix dist = load_distances(layout, reference.front().n());
      const GravityParams params = GravityParams::from_json(read_text(layout.gravity_params()));
      out = gravity_generate_set(reference, dist, params, generation_mode(cfg, "gravity-generate"));
    } else if (model == "radiation") {
      const DistanceMatrix dist = load_distances(layout, reference.front().n());
      out = radiation_generate_set(reference, dist, generation_mode(cfg, "radiation-generate"));
    } else if (model == "mogan") {
      if (!fs::exists(layout.mogan_checkpoint()))
        throw IoError(layout.mogan_checkpoint().string() + ": missing input");
      GanModel gan = GanModel::load(layout.mogan_checkpoint());
      out = sample(gan, static_cast<Index>(reference.size()), cfg.stage_seed("mogan-sample"),
                   cfg.round_samples);
      if (out.front().n() != reference.front().n())
        throw ConfigError("generator produces " + std::to_string(out.front().n()) +
                          " nodes but reference networks have " +
                          std::to_string(reference.front().n()));
    } else {
      throw ConfigError("--model: expected gravity, radiation or mogan, got '" + model + "'");
    }
    replace_networks(out, layout.synthetic(model));
    persist_run_info(cfg, "generate-" + model);
    std::cerr << "generate: " << out.size() << " " << model << " networks\n";
  });
}

void cmd_evaluate(const RunConfig& cfg) {
  run_stage("evaluate", [&] {
    const RunLayout layout{cfg.output_dir};
    const auto test = load_required(layout.networks("test"));
    std::vector<ModelSet> models;
    for (const auto& name : cfg.models) {
      auto nets = load_required(layout.synthetic(name));
      for (const auto& n : nets)
        if (n.n() != test.front().n())
          throw ConfigError("synthetic/" + name + " networks have " + std::to_string(n.n()) +
                            " nodes, test networks have " + std::to_string(test.front().n()));
      models.push_back({name, std::move(nets)});
    }
    const DistanceMatrix dist = load_distances(layout, test.front().n());

    ProtocolConfig pc;
    pc.dataset = cfg.dataset;
    pc.seed = cfg.stage_seed("eval");
    pc.metrics = cfg.metrics;
    pc.cross_channel = cfg.cross_channel;
    pc.eval.dist = &dist;
    pc.eval.epsilon = cfg.epsilon;
    pc.eval.bins = cfg.bins;
    pc.eval.cut_mode = cfg.cd_exact ? CutMode::kExact : CutMode::kSdp;
    pc.eval.sdp.roundings = cfg.sdp_roundings;
    pc.eval.sdp.max_iterations = cfg.sdp_iterations;
    pc.eval.threads = cfg.threads;

    const ProtocolResult result = run_protocol(test, models, pc);
    if (fs::exists(layout.scores_dir())) fs::remove_all(layout.scores_dir());
    result.scores.save(layout.scores_dir());
    result.report.write(layout.eval_dir(), result.scores);
    persist_run_info(cfg, "evaluate");
    std::cerr << "evaluate: report written to " << (layout.eval_dir() / "report.json").string() << "\n";
  });
}

void cmd_report(const RunConfig& cfg) {
  run_stage("report", [&] {
    const RunLayout layout{cfg.output_dir};
    if (!fs::exists(layout.scores_dir() / "manifest.json"))
      throw IoError((layout.scores_dir() / "manifest.json").string() + ": missing input");
    const RawScores scores = RawScores::load(layout.scores_dir());
    DivergenceReport::from_scores(scores).write(layout.eval_dir(), scores);
    persist_run_info(cfg, "report");
  });
}

}  // namespace mobinet
