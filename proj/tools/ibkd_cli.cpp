#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "ibkd/config.hpp"
#include "ibkd/dataio.hpp"
#include "ibkd/encoder.hpp"
#include "ibkd/error.hpp"
#include "ibkd/evalsuite.hpp"
#include "ibkd/parallel.hpp"
#include "ibkd/pipeline.hpp"
#include "ibkd/trainer.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace ibkd;
using Args = std::map<std::string, std::string>;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

// Flags that name files a command writes; replay redirects these.
const std::map<std::string, std::vector<std::string>> kOutputFlags = {
    {"gen-synthetic", {"out"}},
    {"distill", {"out", "history"}},
    {"finetune", {"out", "history"}},
    {"evaluate", {"out", "rankings"}},
    {"diagnose", {"out", "covariance"}},
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Config, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Data, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorKind::Data, "failed writing '" + path + "'");
}

std::string arg(const Args& a, const std::string& key, const std::string& fallback = "") {
  auto it = a.find(key);
  return it == a.end() ? fallback : it->second;
}

cli::RunManifest start_manifest(const std::string& command, const Args& args) {
  cli::RunManifest m;
  m.command = command;
  m.args = args;
  m.started_at = cli::utc_now();
  m.extra["threads"] = parallel::configured_threads();
  return m;
}

void add_data_inputs(cli::RunManifest& m, const std::string& dir) {
  for (const auto& f : dataio::dataset_files()) m.add_input("data/" + f, (fs::path(dir) / f).string());
}

DistillConfig load_config(const std::string& path, cli::RunManifest& m) {
  auto cfg = DistillConfig::from_json_text(read_text(path));
  cfg.validate();
  for (const auto& w : cfg.range_warnings()) std::cerr << "warning: " << w << '\n';
  m.add_input("config", path);
  m.config = nlohmann::ordered_json::parse(cfg.to_json_text());
  m.seed = cfg.seed;
  return cfg;
}

std::string manifest_path_for(const std::string& out) { return out + ".manifest.json"; }

int cmd_gen_synthetic(const Args& a) {
  auto m = start_manifest("gen-synthetic", a);
  dataio::SyntheticSpec spec;
  if (const auto p = arg(a, "spec"); !p.empty()) {
    spec = dataio::SyntheticSpec::from_json_text(read_text(p));
    m.add_input("spec", p);
  }
  spec.validate();
  m.config = nlohmann::ordered_json::parse(spec.to_json_text());
  m.seed = spec.seed;
  const std::string dir = arg(a, "out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Data, "cannot create '" + dir + "': " + ec.message());
  const auto ds = dataio::gen_synthetic(spec);
  dataio::write_dataset(dir, ds);
  for (const auto& f : dataio::dataset_files()) m.add_output(f, (fs::path(dir) / f).string());
  const double mrr = dataio::teacher_mrr_at_10(ds);
  m.extra["teacher_mrr@10"] = mrr;
  m.finalize();
  m.write((fs::path(dir) / "manifest.json").string());
  std::cout << "wrote " << dataio::dataset_files().size() << " files to " << dir << "; teacher mrr@10 = "
            << std::setprecision(6) << mrr << '\n';
  return kOk;
}

void write_history(const std::string& path, const trainer::TrainHistory& h) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Data, "cannot write '" + path + "'");
  h.write_csv(out);
}

int run_stage(const std::string& command, const Args& a) {
  auto m = start_manifest(command, a);
  const auto cfg = load_config(arg(a, "config"), m);
  const std::string data_dir = arg(a, "data");
  add_data_inputs(m, data_dir);
  const auto ds = dataio::read_dataset(data_dir);
  const std::string out = arg(a, "out");
  const std::string history = arg(a, "history", out + ".history.csv");

  encoder::StudentModel student;
  if (command == "distill") {
    student = encoder::StudentModel::init(pipeline::student_spec(cfg, ds), cfg.seed);
  } else {
    m.add_input("checkpoint", arg(a, "ckpt"));
    student = encoder::load_checkpoint(arg(a, "ckpt"));
    pipeline::check_compatible(student, ds);
    if (cfg.reduce_to && *cfg.reduce_to >= student.spec.d_out()) {
      fail(ErrorKind::Config, "reduce_to must be below the checkpoint's output width " +
                                  std::to_string(student.spec.d_out()));
    }
  }
  m.add_output("checkpoint", out);
  m.add_output("history", history, false);
  const std::string mpath = manifest_path_for(out);
  m.write(mpath);

  trainer::StageResult result;
  try {
    if (command == "distill") {
      const encoder::TeacherModel teacher(ds.teacher);
      const auto in = pipeline::distill_inputs(ds);
      result = trainer::run_distill_stage(cfg, teacher, std::move(student), in.ids, in.inputs);
    } else {
      result = trainer::run_finetune_stage(cfg, std::move(student), ds.supervised);
    }
  } catch (const trainer::TrainingAborted& e) {
    write_history(history, e.history());
    m.status = "aborted";
    m.finished_at = cli::utc_now();
    m.write(mpath);
    throw;
  }
  encoder::save_checkpoint(out, result.student);
  write_history(history, result.history);
  m.finalize();
  m.write(mpath);
  const auto& last = result.history.epochs;
  std::cout << command << ": " << last.size() << " epochs";
  if (!last.empty()) std::cout << ", final loss " << std::setprecision(6) << last.back().total;
  std::cout << "; checkpoint " << out << '\n';
  return kOk;
}

struct Subject {
  std::optional<encoder::StudentModel> student;
  std::optional<encoder::TeacherModel> teacher;
  pipeline::Embedder embed;
};

// Either the checkpoint named by --ckpt or the dataset's teacher.
void load_subject(Subject& s, const Args& a, const dataio::Dataset& ds, cli::RunManifest& m) {
  if (arg(a, "teacher") == "true") {
    s.teacher.emplace(ds.teacher);
    s.embed = pipeline::teacher_embedder(*s.teacher);
    return;
  }
  const auto ckpt = arg(a, "ckpt");
  if (ckpt.empty()) fail(ErrorKind::Config, "one of --ckpt or --teacher is required");
  m.add_input("checkpoint", ckpt);
  s.student = encoder::load_checkpoint(ckpt);
  pipeline::check_compatible(*s.student, ds);
  s.embed = pipeline::student_embedder(*s.student);
}

int cmd_evaluate(const Args& a) {
  auto m = start_manifest("evaluate", a);
  const std::string data_dir = arg(a, "data");
  add_data_inputs(m, data_dir);
  const auto ds = dataio::read_dataset(data_dir);
  Subject subject;
  load_subject(subject, a, ds, m);
  const std::string task = arg(a, "task");
  const std::size_t k = std::stoul(arg(a, "k", "10"));
  const auto score = eval::score_from_string(arg(a, "score", "dot"));
  const std::string out = arg(a, "out");
  const std::string rankings = arg(a, "rankings");
  m.add_output("report", out);
  if (!rankings.empty()) m.add_output("rankings", rankings);
  m.write(manifest_path_for(out));

  eval::MetricReport report;
  if (task == "retrieval") {
    std::vector<eval::RankedResult> ranked;
    report = pipeline::evaluate_retrieval(subject.embed, ds, k, score, &ranked);
    if (!rankings.empty()) {
      std::ofstream os(rankings, std::ios::trunc);
      if (!os) fail(ErrorKind::Data, "cannot write '" + rankings + "'");
      eval::write_rankings_tsv(os, ranked, ds.query_ids, ds.corpus_ids);
    }
  } else {
    report = pipeline::evaluate_sts(subject.embed, ds);
  }
  write_text(out, report.to_json() + "\n");
  m.finalize();
  m.write(manifest_path_for(out));
  for (const auto& [name, v] : report.metrics) std::cout << name << " = " << std::setprecision(6) << v << '\n';
  return kOk;
}

int cmd_diagnose(const Args& a) {
  auto m = start_manifest("diagnose", a);
  const std::string data_dir = arg(a, "data");
  add_data_inputs(m, data_dir);
  const auto ds = dataio::read_dataset(data_dir);
  Subject subject;
  load_subject(subject, a, ds, m);
  const std::string out = arg(a, "out");
  const std::string cov_path = arg(a, "covariance", out + ".covariance.csv");
  m.add_output("report", out);
  m.add_output("covariance", cov_path);
  m.write(manifest_path_for(out));

  const auto d = pipeline::diagnose(subject.embed, ds);
  write_text(out, d.report.to_json() + "\n");
  std::ofstream cov(cov_path, std::ios::trunc);
  if (!cov) fail(ErrorKind::Data, "cannot write '" + cov_path + "'");
  cov << std::setprecision(17);
  for (std::size_t i = 0; i < d.covariance.rows(); ++i) {
    for (std::size_t j = 0; j < d.covariance.cols(); ++j) cov << (j ? "," : "") << d.covariance(i, j);
    cov << '\n';
  }
  cov.close();
  m.finalize();
  m.write(manifest_path_for(out));
  for (const auto& [name, v] : d.report.metrics) std::cout << name << " = " << std::setprecision(6) << v << '\n';
  for (const auto& w : d.report.warnings) std::cerr << "warning: " << w << '\n';
  return kOk;
}

int dispatch(const std::string& command, const Args& a) {
  if (command == "gen-synthetic") return cmd_gen_synthetic(a);
  if (command == "distill" || command == "finetune") return run_stage(command, a);
  if (command == "evaluate") return cmd_evaluate(a);
  if (command == "diagnose") return cmd_diagnose(a);
  fail(ErrorKind::Config, "unknown command '" + command + "'");
}

std::string output_manifest_path(const std::string& command, const Args& a) {
  if (command == "gen-synthetic") return (fs::path(arg(a, "out")) / "manifest.json").string();
  return manifest_path_for(arg(a, "out"));
}

int cmd_replay(const std::string& manifest_path, const std::string& out_dir) {
  const auto m = cli::RunManifest::read(manifest_path);
  if (m.status != "complete") fail(ErrorKind::Data, "manifest records an incomplete run (" + m.status + ")");
  if (const auto changed = cli::changed_inputs(m); !changed.empty()) {
    std::string list;
    for (const auto& c : changed) list += (list.empty() ? "" : ", ") + c;
    fail(ErrorKind::Data, "inputs changed since the recorded run: " + list);
  }
  auto it = kOutputFlags.find(m.command);
  if (it == kOutputFlags.end()) fail(ErrorKind::Format, "manifest names unknown command '" + m.command + "'");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::Data, "cannot create '" + out_dir + "': " + ec.message());

  Args args = m.args;
  for (const auto& flag : it->second) {
    if (auto a = args.find(flag); a != args.end() && !a->second.empty()) {
      a->second = (fs::path(out_dir) / fs::path(a->second).filename()).string();
    }
  }
  // Derived default outputs follow --out, so redirecting --out covers them.
  const int rc = dispatch(m.command, args);
  if (rc != kOk) return rc;

  const auto replayed = cli::RunManifest::read(output_manifest_path(m.command, args));
  int mismatches = 0;
  for (const auto& [name, f] : m.outputs) {
    auto r = replayed.outputs.find(name);
    if (r == replayed.outputs.end()) {
      std::cout << "missing  " << name << '\n';
      ++mismatches;
    } else if (!f.reproducible) {
      std::cout << "skipped  " << name << " (contains timings)\n";
    } else if (r->second.sha256 == f.sha256) {
      std::cout << "match    " << name << '\n';
    } else {
      std::cout << "MISMATCH " << name << '\n';
      ++mismatches;
    }
  }
  if (mismatches) {
    std::cerr << "error: " << mismatches << " output(s) differ from the manifest\n";
    return kRuntime;
  }
  return kOk;
}

const CLI::Validator kPositiveInt(
    [](std::string& v) -> std::string {
      std::size_t pos = 0;
      long long n = 0;
      try {
        n = std::stoll(v, &pos);
      } catch (const std::exception&) {
        return "must be a positive integer, got '" + v + "'";
      }
      if (pos != v.size() || n < 1) return "must be a positive integer, got '" + v + "'";
      return {};
    },
    "INT>=1");

}  // namespace

int main(int argc, char** argv) {
  parallel::apply_thread_env();
  CLI::App app{"Information-bottleneck distillation of text embeddings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kToolVersion);

  Args args;
  auto flag = [&args](CLI::App* sub, const std::string& name, const std::string& help, bool required) {
    auto* opt = sub->add_option_function<std::string>(
        "--" + name, [&args, name](const std::string& v) { args[name] = v; }, help);
    if (required) opt->required();
    return opt;
  };

  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic teacher/task dataset");
  flag(gen, "spec", "SyntheticSpec JSON (defaults when omitted)", false)->check(CLI::ExistingFile);
  flag(gen, "out", "Output directory", true);

  auto* distill = app.add_subcommand("distill", "Distillation stage from a fresh student");
  flag(distill, "config", "Run config JSON", true)->check(CLI::ExistingFile);
  flag(distill, "data", "Dataset directory", true)->check(CLI::ExistingDirectory);
  flag(distill, "out", "Output checkpoint", true);
  flag(distill, "history", "History CSV (default <out>.history.csv)", false);

  auto* finetune = app.add_subcommand("finetune", "Fine-tuning stage from a checkpoint");
  flag(finetune, "config", "Run config JSON", true)->check(CLI::ExistingFile);
  flag(finetune, "ckpt", "Input checkpoint", true)->check(CLI::ExistingFile);
  flag(finetune, "data", "Dataset directory", true)->check(CLI::ExistingDirectory);
  flag(finetune, "out", "Output checkpoint", true);
  flag(finetune, "history", "History CSV (default <out>.history.csv)", false);

  auto* evaluate = app.add_subcommand("evaluate", "Retrieval or similarity metrics");
  auto* eval_ckpt = flag(evaluate, "ckpt", "Student checkpoint", false)->check(CLI::ExistingFile);
  auto* eval_teacher = evaluate->add_flag_callback("--teacher", [&args] { args["teacher"] = "true"; },
                                                   "Evaluate the dataset's teacher instead of a checkpoint");
  eval_ckpt->excludes(eval_teacher);
  flag(evaluate, "data", "Dataset directory", true)->check(CLI::ExistingDirectory);
  flag(evaluate, "task", "retrieval or sts", true)->check(CLI::IsMember({"retrieval", "sts"}));
  flag(evaluate, "k", "Cutoff for retrieval metrics (default 10)", false)->check(kPositiveInt);
  flag(evaluate, "score", "dot or cosine", false)->check(CLI::IsMember({"dot", "cosine"}));
  flag(evaluate, "out", "Report JSON", true);
  flag(evaluate, "rankings", "Optional rankings TSV", false);

  auto* diagnose = app.add_subcommand("diagnose", "Alignment, uniformity and covariance diagnostics");
  auto* diag_ckpt = flag(diagnose, "ckpt", "Student checkpoint", false)->check(CLI::ExistingFile);
  auto* diag_teacher = diagnose->add_flag_callback("--teacher", [&args] { args["teacher"] = "true"; },
                                                   "Diagnose the dataset's teacher");
  diag_ckpt->excludes(diag_teacher);
  flag(diagnose, "data", "Dataset directory", true)->check(CLI::ExistingDirectory);
  flag(diagnose, "out", "Report JSON", true);
  flag(diagnose, "covariance", "Covariance CSV (default <out>.covariance.csv)", false);

  std::string manifest, out_dir;
  auto* replay = app.add_subcommand("replay", "Re-run a recorded command and compare output digests");
  replay->add_option("--manifest", manifest, "Manifest JSON of the run")->required()->check(CLI::ExistingFile);
  replay->add_option("--out-dir", out_dir, "Directory for the re-run's outputs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    for (auto* sub : {evaluate, diagnose}) {
      if (sub->parsed() && !args.count("ckpt") && !args.count("teacher")) {
        std::cerr << "error: one of --ckpt or --teacher is required\n";
        return kUsage;
      }
    }
    if (replay->parsed()) return cmd_replay(manifest, out_dir);
    return dispatch(app.get_subcommands().front()->get_name(), args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::Config ? kUsage : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
