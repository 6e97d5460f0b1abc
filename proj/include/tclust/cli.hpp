#pragma once

// Command-line front end. Needs CLI11.hpp and json.hpp on the include path.
//
//   tclust cluster  --dataset SRC --k K [--core-dims 4,4] [--init hosvd1]
//                   [--max-outer N] [--seeds 0,1,2] [--out result.json]
//                   [--trace trace.csv]
//   tclust metrics  --truth FILE --pred FILE
//   tclust synth    --k K --per-cluster M --slice-shape 8,8 --out data.tcls
//   tclust inspect  --dataset SRC
//
// SRC is a .tcls path or idx:IMAGES[,LABELS]. Exit codes: 0 success,
// 2 invalid input, 1 numerical failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tclust/cluster.hpp"
#include "tclust/errors.hpp"
#include "tclust/io.hpp"
#include "tclust/metrics.hpp"

namespace tclust {

namespace cli {

using nlohmann::ordered_json;

struct SourceOptions {
  std::string dataset;
  std::vector<Label> classes;
  std::size_t random_classes = 0;
  std::size_t per_class = 0;
  std::uint64_t sample_seed = 0;
};

inline void add_source_options(CLI::App &cmd, SourceOptions &o) {
  cmd.add_option("--dataset", o.dataset, "TCLS file or idx:IMAGES[,LABELS]")
      ->required();
  cmd.add_option("--classes", o.classes, "keep only these classes")
      ->delimiter(',');
  cmd.add_option("--random-classes", o.random_classes,
                 "keep this many seeded-random classes");
  cmd.add_option("--per-class", o.per_class,
                 "seeded subsample of this many samples per class");
  cmd.add_option("--sample-seed", o.sample_seed, "seed for class/sample choice");
}

inline Dataset load_source(const SourceOptions &o) {
  Dataset ds;
  if (o.dataset.rfind("idx:", 0) == 0) {
    const std::string rest = o.dataset.substr(4);
    const auto comma = rest.find(',');
    ds = comma == std::string::npos
             ? load_idx(rest)
             : load_idx(rest.substr(0, comma), rest.substr(comma + 1));
  } else {
    ds = load_dense(o.dataset);
  }
  ds.validate();
  if (!o.classes.empty() && o.random_classes > 0)
    throw ValidationError("--classes and --random-classes are exclusive");
  std::vector<Label> classes = o.classes;
  if (o.random_classes > 0)
    classes = choose_classes(ds, o.random_classes, o.sample_seed);
  if (!classes.empty() || o.per_class > 0) {
    if (!ds.labels)
      throw ValidationError("class selection needs a labelled dataset");
    std::size_t per = o.per_class;
    if (per == 0) { // all members of the chosen classes
      per = ds.samples();
      for (Label c : classes)
        per = std::min<std::size_t>(
            per, static_cast<std::size_t>(
                     std::count(ds.labels->begin(), ds.labels->end(), c)));
    }
    ds = subsample_per_class(ds, classes, per, o.sample_seed);
  }
  return ds;
}

inline ordered_json source_json(const SourceOptions &o) {
  return {{"dataset", o.dataset},
          {"classes", o.classes},
          {"random_classes", o.random_classes},
          {"per_class", o.per_class},
          {"sample_seed", o.sample_seed}};
}

inline std::vector<Label> read_label_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError("cannot open label file '" + path + "'");
  std::vector<Label> out;
  std::string tok;
  while (in >> tok) {
    std::stringstream parts(tok);
    std::string item;
    while (std::getline(parts, item, ','))
      if (!item.empty()) {
        std::size_t used = 0;
        Label v = 0;
        try {
          v = std::stoll(item, &used);
        } catch (const std::exception &) {
          used = 0;
        }
        if (used != item.size())
          throw FormatError("label file '" + path + "': bad token '" + item +
                            "'");
        out.push_back(v);
      }
  }
  return out;
}

inline void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw ValidationError("cannot write '" + path + "'");
  out << text;
  if (!out)
    throw ValidationError("short write to '" + path + "'");
}

struct ClusterOptions {
  SourceOptions source;
  int k = 0;
  std::vector<std::size_t> core_dims;
  std::string init = "hosvd1";
  int max_outer = 250;
  std::vector<std::uint64_t> seeds{0};
  std::string out;
  std::string trace;
  int jobs = 1;
};

struct SeedRun {
  std::uint64_t seed = 0;
  ClusteringResult result;
  double seconds = 0.0;
};

inline ordered_json config_json(const ClusterOptions &o,
                                const ClusterConfig &cfg) {
  return {{"source", source_json(o.source)},
          {"k", cfg.clusters},
          {"core_dims", cfg.core_dims},
          {"init", std::string(to_string(cfg.init))},
          {"max_outer", cfg.max_outer},
          {"seeds", o.seeds},
          {"factor_sweeps_per_outer", cfg.factor_sweeps_per_outer},
          {"rtr_first_call_outer", cfg.rtr_first_call_outer},
          {"rtr_subsequent_outer", cfg.rtr_subsequent_outer},
          {"rtr_max_inner", cfg.rtr_max_inner},
          {"rtr_grad_tol", cfg.rtr_grad_tol},
          {"early_stop_rel_tol", cfg.early_stop_rel_tol},
          {"kmeans_restarts", cfg.kmeans.restarts},
          {"kmeans_max_iterations", cfg.kmeans.max_iterations}};
}

inline double mean(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v)
    s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double stddev(const std::vector<double> &v) {
  if (v.size() < 2)
    return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v)
    s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline int run_cluster(const ClusterOptions &o, std::ostream &out) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  if (o.seeds.empty())
    throw ValidationError("at least one seed is required");
  if (o.jobs < 1)
    throw ValidationError("--jobs must be at least 1");
  const Dataset ds = load_source(o.source);

  ClusterConfig base;
  base.clusters = o.k;
  base.core_dims = o.core_dims;
  base.init = parse_init_strategy(o.init);
  base.max_outer = o.max_outer;
  const ClusterConfig cfg = resolve_config(ds.tensor, base);

  std::vector<std::optional<SeedRun>> runs(o.seeds.size());
  std::vector<std::exception_ptr> errors(o.seeds.size());
  auto work = [&](std::size_t i) {
    try {
      ClusterConfig c = cfg;
      c.seed = o.seeds[i];
      const auto t0 = clock::now();
      ClusteringResult r = fit(ds.tensor, c);
      runs[i] = SeedRun{o.seeds[i], std::move(r),
                        std::chrono::duration<double>(clock::now() - t0).count()};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (o.jobs == 1) {
    for (std::size_t i = 0; i < o.seeds.size(); ++i)
      work(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < o.jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < o.seeds.size();)
          work(i);
      });
    for (auto &t : pool)
      t.join();
  }
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);

  ordered_json doc;
  doc["config"] = config_json(o, cfg);
  doc["dataset"] = {{"name", ds.name},
                    {"shape", ds.tensor.shape()},
                    {"labelled", ds.labels.has_value()}};
  ordered_json run_docs = ordered_json::array();
  std::vector<double> acs, nmis;
  std::ostringstream csv;
  csv << "seed,iteration,f,h,rtr_iterations,rtr_inner,rtr_grad_norm,rtr_stop\n";
  csv.precision(17);
  for (const auto &r : runs) {
    const auto &res = r->result;
    ordered_json rd;
    rd["seed"] = r->seed;
    if (ds.labels) {
      const auto pred = to_labels(res.labels);
      const double ac = accuracy(*ds.labels, pred);
      const double n = nmi(*ds.labels, pred);
      acs.push_back(ac);
      nmis.push_back(n);
      rd["ac"] = ac;
      rd["nmi"] = n;
    } else {
      rd["ac"] = nullptr;
      rd["nmi"] = nullptr;
    }
    rd["outer_iterations"] = res.diagnostics.size();
    rd["final_error"] = res.factors.error_trace.empty()
                            ? ordered_json(nullptr)
                            : ordered_json(res.factors.error_trace.back());
    rd["error_trace"] = res.factors.error_trace;
    if (res.init_rtr)
      rd["init_rtr"] = {{"iterations", res.init_rtr->outer_iterations},
                        {"grad_norm", res.init_rtr->final_grad_norm()},
                        {"stop", std::string(to_string(res.init_rtr->reason))}};
    rd["labels"] = res.labels;
    rd["timing"] = {{"seconds", r->seconds}};
    run_docs.push_back(std::move(rd));

    for (const auto &d : res.diagnostics)
      csv << r->seed << ',' << d.iteration << ',' << d.f << ',' << d.h << ','
          << d.rtr.outer_iterations << ',' << d.rtr.inner_iterations << ','
          << d.rtr.final_grad_norm() << ',' << to_string(d.rtr.reason) << '\n';
  }
  doc["runs"] = std::move(run_docs);
  ordered_json summary = {{"seeds", o.seeds.size()}};
  if (ds.labels) {
    summary["ac_mean"] = mean(acs);
    summary["ac_std"] = stddev(acs);
    summary["nmi_mean"] = mean(nmis);
    summary["nmi_std"] = stddev(nmis);
  }
  doc["summary"] = std::move(summary);
  doc["timing"] = {
      {"seconds", std::chrono::duration<double>(clock::now() - start).count()}};

  const std::string text = doc.dump(2) + "\n";
  if (o.out.empty())
    out << text;
  else
    write_text(o.out, text);
  if (!o.trace.empty())
    write_text(o.trace, csv.str());
  return 0;
}

inline ordered_json inspect_json(const Dataset &ds) {
  ordered_json j;
  j["name"] = ds.name;
  j["shape"] = ds.tensor.shape();
  j["samples"] = ds.samples();
  const auto data = ds.tensor.data();
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  double sum = 0.0;
  for (double v : data)
    sum += v;
  j["min"] = *lo;
  j["max"] = *hi;
  j["mean"] = sum / static_cast<double>(data.size());
  j["frobenius_norm"] = frob_norm(ds.tensor);
  if (ds.labels) {
    std::map<Label, std::size_t> counts;
    for (Label l : *ds.labels)
      ++counts[l];
    ordered_json c = ordered_json::object();
    for (const auto &[l, n] : counts)
      c[std::to_string(l)] = n;
    j["class_counts"] = std::move(c);
  } else {
    j["class_counts"] = nullptr;
  }
  return j;
}

} // namespace cli

/// Runs the CLI on `args` (program name excluded).
inline int run_cli(std::vector<std::string> args, std::ostream &out = std::cout,
                   std::ostream &err = std::cerr) {
  CLI::App app{"Tensor clustering with a heterogeneous Tucker model", "tclust"};
  app.require_subcommand(1);

  cli::ClusterOptions copt;
  auto *cluster = app.add_subcommand("cluster", "cluster a dataset");
  cli::add_source_options(*cluster, copt.source);
  cluster->add_option("--k", copt.k, "number of clusters")->required();
  cluster->add_option("--core-dims", copt.core_dims, "J_1,...,J_{N-1}")
      ->delimiter(',');
  cluster->add_option("--init", copt.init, "random | hosvd1 | hosvd2")
      ->check(CLI::IsMember({"random", "hosvd1", "hosvd2"}));
  cluster->add_option("--max-outer", copt.max_outer, "outer iteration budget");
  cluster->add_option("--seeds", copt.seeds, "comma-separated seeds")
      ->delimiter(',');
  cluster->add_option("--out", copt.out, "result JSON path (stdout if omitted)");
  cluster->add_option("--trace", copt.trace, "per-iteration CSV trace path");
  cluster->add_option("--jobs", copt.jobs, "seeds fitted concurrently");

  std::string truth_path, pred_path;
  auto *metrics = app.add_subcommand("metrics", "score predicted labels");
  metrics->add_option("--truth", truth_path, "ground-truth label file")
      ->required();
  metrics->add_option("--pred", pred_path, "predicted label file")->required();

  SynthConfig scfg;
  std::string synth_out;
  auto *synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--k", scfg.clusters, "number of clusters")->required();
  synth->add_option("--per-cluster", scfg.per_cluster, "samples per cluster");
  synth->add_option("--slice-shape", scfg.slice_shape, "slice extents")
      ->delimiter(',');
  synth->add_option("--sigma", scfg.sigma, "noise standard deviation");
  synth->add_option("--separation", scfg.separation,
                    "minimum pairwise centroid distance");
  synth->add_option("--rank", scfg.rank, "multilinear rank of the centroids");
  synth->add_option("--seed", scfg.seed, "generator seed");
  synth->add_option("--out", synth_out, "output TCLS path")->required();

  cli::SourceOptions iopt;
  auto *inspect = app.add_subcommand("inspect", "summarize a dataset");
  cli::add_source_options(*inspect, iopt);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (cluster->parsed())
      return cli::run_cluster(copt, out);
    if (metrics->parsed()) {
      const auto truth = cli::read_label_file(truth_path);
      const auto pred = cli::read_label_file(pred_path);
      nlohmann::ordered_json j = {{"samples", truth.size()},
                                  {"ac", accuracy(truth, pred)},
                                  {"nmi", nmi(truth, pred)}};
      out << j.dump(2) << "\n";
      return 0;
    }
    if (synth->parsed()) {
      save_dense(synth_out, synth_clusters(scfg).data);
      return 0;
    }
    if (inspect->parsed()) {
      out << cli::inspect_json(cli::load_source(iopt)).dump(2) << "\n";
      return 0;
    }
  } catch (const ValidationError &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError &e) {
    err << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    err << "failure: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

inline int run_cli(int argc, char **argv) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc));
}

} // namespace tclust
