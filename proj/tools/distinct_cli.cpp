// Command-line front end: gen-data, train, detect, evaluate, retrieve, sample,
// viewselect, export-features.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "distinct/applications.hpp"
#include "distinct/config.hpp"
#include "distinct/io.hpp"
#include "distinct/log.hpp"
#include "distinct/metrics.hpp"
#include "distinct/pipeline.hpp"

namespace fs = std::filesystem;
using namespace distinct;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// DISTINCT_SEED wins over every other source of a seed.
std::uint64_t effective_seed(std::uint64_t seed) {
  if (const char* env = std::getenv("DISTINCT_SEED"); env && *env) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(env, &pos);
      if (pos == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("DISTINCT_SEED is not an unsigned integer: '") + env + "'");
  }
  return seed;
}

std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
  if (parts.size() != 3 || parts[2] <= 0 || parts[1] < parts[0]) {
    throw ConfigError("expected lo:hi:step with step > 0, got '" + text + "'");
  }
  std::vector<double> out;
  const auto steps = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (std::size_t i = 0; i <= steps; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  return out;
}

Box parse_box(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
  if (v.size() != 6) throw ConfigError("--focus expects x0,y0,z0,x1,y1,z1");
  Box b{{std::min(v[0], v[3]), std::min(v[1], v[4]), std::min(v[2], v[5])},
        {std::max(v[0], v[3]), std::max(v[1], v[4]), std::max(v[2], v[5])}};
  return b;
}

std::vector<Vec3> gather(const PointCloud& pc, const std::vector<std::size_t>& idx) {
  std::vector<Vec3> out;
  for (std::size_t i : idx) out.push_back(pc.points[i]);
  return out;
}

struct TrainArgs {
  fs::path data, config, out, log;
  std::string mode;
  std::vector<std::string> sets;
  std::optional<std::size_t> epochs, batch_size, clusters, points;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  std::map<std::string, std::string> kv;
  if (!a.config.empty()) kv = parse_key_values(read_text(a.config));
  for (const std::string& s : a.sets) {
    const auto more = parse_key_values(s);
    if (more.empty()) throw ConfigError("--set expects key=value, got '" + s + "'");
    for (const auto& [k, v] : more) kv[k] = v;
  }
  if (!a.mode.empty()) kv["mode"] = a.mode;
  if (a.epochs) kv["epochs"] = std::to_string(*a.epochs);
  if (a.batch_size) kv["batch_size"] = std::to_string(*a.batch_size);
  if (a.clusters) kv["clusters"] = std::to_string(*a.clusters);
  if (a.points) kv["points"] = std::to_string(*a.points);
  if (a.lr) kv["lr"] = num(*a.lr);
  if (a.seed) kv["seed"] = std::to_string(*a.seed);
  TrainConfig cfg = apply_config(TrainConfig{}, kv);
  cfg.seed = effective_seed(cfg.seed);
  cfg.validate();

  const Dataset ds = load_dataset(a.data);
  const fs::path log_path = a.log.empty() ? fs::path(a.out.string() + ".metrics.csv") : a.log;
  try {
    const TrainResult res = train(ds, cfg, [](std::size_t epoch, const TrainLog& log, const Checkpoint&) {
      double total = 0.0;
      std::size_t n = 0;
      for (const BatchRecord& r : log.rows) {
        if (r.epoch != epoch) continue;
        total += r.loss.total;
        ++n;
      }
      log_info("epoch " + std::to_string(epoch) + " loss " + num(n ? total / static_cast<double>(n) : 0.0) +
               " changes " + std::to_string(log.epoch_changes.back()));
    });
    save_checkpoint(a.out, res.checkpoint);
    write_metrics_log(log_path, res.log);
  } catch (const TrainingAborted& e) {
    const fs::path last = a.out.string() + ".last_good";
    save_checkpoint(last, e.last_good);
    write_metrics_log(log_path, e.log);
    std::cerr << "training aborted: " << e.what() << "; last good state saved to " << last << "\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised per-point distinctiveness for 3D point clouds"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic two-family dataset");
  std::string preset_name = "twin-vs-quad";
  std::size_t count = 30, gen_n = 256;
  std::uint64_t gen_seed = 1;
  fs::path gen_out;
  gen->add_option("--preset", preset_name, "twin-vs-quad or quad-vs-tail")
      ->check(CLI::IsMember({"twin-vs-quad", "quad-vs-tail"}));
  gen->add_option("--count", count, "shapes per family")->check(CLI::PositiveNumber);
  gen->add_option("--n", gen_n, "working points per shape (master clouds hold 4n)")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train the encoder without labels");
  TrainArgs ta;
  tr->add_option("--data", ta.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--config", ta.config, "key=value config file")->check(CLI::ExistingFile);
  tr->add_option("--out", ta.out, "checkpoint path")->required();
  tr->add_option("--mode", ta.mode, "unsupervised, weakly-supervised, w/o-Atten, w/o-Cont, A-Center-Cont");
  tr->add_option("--set", ta.sets, "extra key=value overrides (repeatable)");
  tr->add_option("--epochs", ta.epochs);
  tr->add_option("--batch-size", ta.batch_size);
  tr->add_option("--clusters", ta.clusters);
  tr->add_option("--points", ta.points);
  tr->add_option("--lr", ta.lr);
  tr->add_option("--seed", ta.seed);
  tr->add_option("--log", ta.log, "metrics CSV (default: <out>.metrics.csv)");

  // detect
  auto* det = app.add_subcommand("detect", "Write the distinctiveness field of a cloud as PLY");
  fs::path det_ckpt, det_in, det_out;
  bool det_no_colors = false;
  std::size_t det_samples = 0;
  det->add_option("--ckpt", det_ckpt)->required()->check(CLI::ExistingFile);
  det->add_option("--in", det_in, "XYZ, PLY or OBJ")->required()->check(CLI::ExistingFile);
  det->add_option("--out", det_out)->required();
  det->add_flag("--no-colors", det_no_colors, "omit the RGB colormap");
  det->add_option("--samples", det_samples, "surface samples for OBJ input (default: checkpoint N)");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
  fs::path ev_ckpt, ev_data, ev_out, ev_ref;
  bool ev_fne = false, ev_ret = false;
  std::string ev_sweep = "0:0.2:0.01", ev_budgets = "256,128,64,32";
  double ev_dt = 0.7;
  std::uint64_t ev_seed = 1;
  ev->add_option("--ckpt", ev_ckpt)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data)->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", ev_out, "CSV with metric,parameter,value rows")->required();
  ev->add_flag("--fne-fpe", ev_fne, "FNE/FPE sweep of thresholded detections");
  ev->add_option("--r-sweep", ev_sweep, "lo:hi:step");
  ev->add_option("--dt", ev_dt, "distinctiveness threshold");
  ev->add_option("--reference", ev_ref, "checkpoint whose detections are the ground truth (default: pod masks)")
      ->check(CLI::ExistingFile);
  ev->add_flag("--retention", ev_ret, "cluster retention under preference downsampling");
  ev->add_option("--budgets", ev_budgets, "comma-separated K values");
  ev->add_option("--seed", ev_seed, "downsampling seed");

  // retrieve
  auto* rt = app.add_subcommand("retrieve", "Nearest shapes by distinctiveness-guided feature");
  fs::path rt_ckpt, rt_db, rt_query, rt_out;
  std::size_t rt_topk = 5;
  double rt_delta = kDefaultDeltaD;
  std::string rt_feature = "h";
  rt->add_option("--ckpt", rt_ckpt)->required()->check(CLI::ExistingFile);
  rt->add_option("--db", rt_db, "dataset directory to index")->required()->check(CLI::ExistingDirectory);
  rt->add_option("--query", rt_query, "query cloud")->required()->check(CLI::ExistingFile);
  rt->add_option("--topk", rt_topk)->check(CLI::PositiveNumber);
  rt->add_option("--delta-d", rt_delta);
  rt->add_option("--feature", rt_feature, "h or g")->check(CLI::IsMember({"h", "g"}));
  rt->add_option("--out", rt_out, "optional CSV of hits");

  // sample
  auto* sm = app.add_subcommand("sample", "Distinctiveness-adaptive Poisson-disk sampling");
  fs::path sm_ckpt, sm_in, sm_out;
  double sm_rmin = 0.02, sm_rmax = 0.08;
  std::uint64_t sm_seed = 1;
  sm->add_option("--ckpt", sm_ckpt)->required()->check(CLI::ExistingFile);
  sm->add_option("--in", sm_in)->required()->check(CLI::ExistingFile);
  sm->add_option("--rmin", sm_rmin, "radius at d = 1, in input units")->required();
  sm->add_option("--rmax", sm_rmax, "radius at d = 0, in input units")->required();
  sm->add_option("--out", sm_out)->required();
  sm->add_option("--seed", sm_seed);

  // viewselect
  auto* vs = app.add_subcommand("viewselect", "Rank hemisphere views by visible distinctiveness");
  fs::path vs_ckpt, vs_scene, vs_out;
  std::string vs_focus;
  std::size_t vs_views = 50, vs_res = 64;
  double vs_patch = 0.0;
  std::uint64_t vs_seed = 1;
  vs->add_option("--ckpt", vs_ckpt)->required()->check(CLI::ExistingFile);
  vs->add_option("--scene", vs_scene)->required()->check(CLI::ExistingFile);
  vs->add_option("--focus", vs_focus, "x0,y0,z0,x1,y1,z1");
  vs->add_option("--views", vs_views)->check(CLI::PositiveNumber);
  vs->add_option("--resolution", vs_res);
  vs->add_option("--patch", vs_patch, "patch diameter (default: half the scene diameter)");
  vs->add_option("--seed", vs_seed);
  vs->add_option("--out", vs_out)->required();

  // export-features
  auto* ex = app.add_subcommand("export-features", "Dump the memory bank and assignments");
  fs::path ex_ckpt, ex_data, ex_out;
  ex->add_option("--ckpt", ex_ckpt)->required()->check(CLI::ExistingFile);
  ex->add_option("--data", ex_data)->required()->check(CLI::ExistingDirectory);
  ex->add_option("--out", ex_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      const Dataset ds = build_dataset(preset(preset_name, count), gen_n, effective_seed(gen_seed));
      save_dataset(gen_out, ds);
      log_info("wrote " + std::to_string(ds.size()) + " shapes to " + gen_out.string());
      return 0;
    }
    if (*tr) return run_train(ta);
    if (*det) {
      const Checkpoint ck = load_checkpoint(det_ckpt);
      const PointCloud pc = read_cloud(det_in, det_samples ? det_samples : ck.config.points, ck.seed);
      const DistinctivenessField f = detect(ck, pc);
      if (f.degenerate) log_warning("distinctiveness range collapsed; writing zeros");
      write_ply(det_out, pc, &f.values, !det_no_colors);
      return 0;
    }
    if (*ev) {
      const Checkpoint ck = load_checkpoint(ev_ckpt);
      const Dataset ds = load_dataset(ev_data);
      std::vector<std::vector<std::string>> rows;
      const auto labels = ds.family_labels();
      const auto pred = evaluate_assignments(ck, ds);
      rows.push_back({"accuracy", "", num(best_permutation_accuracy(pred, labels, std::max<std::size_t>(
                                                                                     ck.bank.clusters, 2)))});
      rows.push_back({"ari", "", num(adjusted_rand_index(pred, labels))});
      const SubstructureContrast sc = substructure_contrast(ck, ds);
      rows.push_back({"masked_mean_d", "", num(sc.masked_mean)});
      rows.push_back({"unmasked_mean_d", "", num(sc.unmasked_mean)});
      rows.push_back({"masked_ratio", "", num(sc.ratio)});
      if (ev_fne) {
        std::optional<Checkpoint> ref;
        if (!ev_ref.empty()) ref = load_checkpoint(ev_ref);
        const std::vector<double> rs = parse_range(ev_sweep);
        std::vector<double> fne(rs.size(), 0.0), fpe(rs.size(), 0.0);
        std::size_t used = 0;
        for (const DatasetRecord& rec : ds.records) {
          const RecordDetection mine = detect_record(ck, rec);
          const auto q = gather(mine.view.cloud, threshold_regions(mine.field.values, ev_dt));
          std::vector<Vec3> truth;
          if (ref) {
            const RecordDetection theirs = detect_record(*ref, rec);
            truth = gather(theirs.view.cloud, threshold_regions(theirs.field.values, ev_dt));
          } else {
            for (std::size_t i = 0; i < mine.view.source.size(); ++i)
              if (rec.substructure_mask[mine.view.source[i]]) truth.push_back(mine.view.cloud.points[i]);
          }
          if (truth.empty() || q.empty()) continue;
          const double diameter = bounding_sphere_diameter(mine.view.cloud);
          for (std::size_t k = 0; k < rs.size(); ++k) {
            const FneFpe e = fne_fpe(truth, q, rs[k], diameter);
            fne[k] += e.fne;
            fpe[k] += e.fpe;
          }
          ++used;
        }
        if (used == 0) throw std::runtime_error("no shape has both a ground-truth and a detected set");
        for (std::size_t k = 0; k < rs.size(); ++k) {
          rows.push_back({"fne", "r=" + num(rs[k]), num(fne[k] / static_cast<double>(used))});
          rows.push_back({"fpe", "r=" + num(rs[k]), num(fpe[k] / static_cast<double>(used))});
        }
      }
      if (ev_ret) {
        std::vector<std::size_t> budgets;
        std::stringstream ss(ev_budgets);
        std::string item;
        while (std::getline(ss, item, ',')) budgets.push_back(std::stoul(item));
        const std::vector<PreferenceMode> modes = {PreferenceMode::distinctiveness, PreferenceMode::curvature,
                                                   PreferenceMode::random};
        const RetentionTable t = cluster_retention(ck, ds, budgets, modes, ev_seed);
        for (PreferenceMode m : modes)
          for (std::size_t k : budgets)
            rows.push_back({"retention", to_string(m) + "@" + std::to_string(k), num(t.accuracy.at({m, k}))});
      }
      write_csv(ev_out, {"metric", "parameter", "value"}, rows);
      return 0;
    }
    if (*rt) {
      const Checkpoint ck = load_checkpoint(rt_ckpt);
      const Dataset ds = load_dataset(rt_db);
      const RetrievalIndex index = build_index(ck, ds, rt_delta);
      const PointCloud q = normalize_unit_sphere(read_cloud(rt_query, ck.config.points, ck.seed));
      const RetrievalEntry e = describe(ck, q, rt_delta);
      const RetrievalFeature feature = rt_feature == "h" ? RetrievalFeature::h : RetrievalFeature::g;
      const auto hits = retrieve(index, feature == RetrievalFeature::h ? e.h : e.g, rt_topk, feature);
      std::vector<std::vector<std::string>> rows;
      for (std::size_t i = 0; i < hits.size(); ++i) {
        std::cout << i + 1 << " " << hits[i].shape_id << " " << num(hits[i].distance) << "\n";
        rows.push_back({std::to_string(i + 1), hits[i].shape_id, num(hits[i].distance)});
      }
      if (!rt_out.empty()) write_csv(rt_out, {"rank", "shape_id", "distance"}, rows);
      return 0;
    }
    if (*sm) {
      const Checkpoint ck = load_checkpoint(sm_ckpt);
      const PointCloud pc = read_cloud(sm_in, ck.config.points, ck.seed);
      const DistinctivenessField f = detect(ck, pc);
      Rng rng(effective_seed(sm_seed));
      const auto idx = adaptive_poisson_sample(pc, f.values, sm_rmin, sm_rmax, rng);
      PointCloud out;
      out.shape_id = pc.shape_id;
      out.points = gather(pc, idx);
      write_xyz(sm_out, out);
      log_info("kept " + std::to_string(idx.size()) + " of " + std::to_string(pc.size()) + " points");
      return 0;
    }
    if (*vs) {
      const Checkpoint ck = load_checkpoint(vs_ckpt);
      const PointCloud scene = read_cloud(vs_scene, 8 * ck.config.points, ck.seed);
      const double patch = vs_patch > 0 ? vs_patch : 0.5 * bounding_sphere_diameter(scene);
      const std::vector<double> d = scene_distinctiveness(scene, ck, patch, effective_seed(vs_seed));
      std::optional<Box> focus;
      if (!vs_focus.empty()) focus = parse_box(vs_focus);
      const auto views = select_views(scene, d, vs_views, focus, vs_res);
      std::vector<std::vector<std::string>> rows;
      for (std::size_t i = 0; i < views.size(); ++i) {
        const ViewScore& v = views[i];
        rows.push_back({std::to_string(i + 1), std::to_string(v.index), num(v.direction.x), num(v.direction.y),
                        num(v.direction.z), num(v.camera_distance), num(v.score), std::to_string(v.visible)});
      }
      write_csv(vs_out, {"rank", "lattice_index", "dx", "dy", "dz", "camera_distance", "score", "visible"}, rows);
      return 0;
    }
    if (*ex) {
      const Checkpoint ck = load_checkpoint(ex_ckpt);
      const Dataset ds = load_dataset(ex_data);
      std::map<std::string, std::string> family;
      for (const DatasetRecord& r : ds.records) family[r.shape_id] = r.family_name;
      std::vector<std::string> header = {"shape_id", "family", "assignment"};
      for (std::size_t c = 0; c < ck.bank.bank.cols; ++c) header.push_back("f" + std::to_string(c));
      std::vector<std::vector<std::string>> rows;
      for (std::size_t i = 0; i < ck.bank.bank.rows; ++i) {
        const std::string& id = ck.bank.shape_ids.at(i);
        const auto it = family.find(id);
        if (it == family.end()) throw std::runtime_error("bank shape '" + id + "' is not in the dataset");
        std::vector<std::string> row = {id, it->second, std::to_string(ck.bank.assignments.at(i))};
        for (std::size_t c = 0; c < ck.bank.bank.cols; ++c) row.push_back(num(ck.bank.bank(i, c)));
        rows.push_back(std::move(row));
      }
      write_csv(ex_out, header, rows);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
