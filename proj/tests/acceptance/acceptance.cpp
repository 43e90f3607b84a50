// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ibkd/config.hpp"
#include "ibkd/dataio.hpp"
#include "ibkd/encoder.hpp"
#include "ibkd/evalsuite.hpp"
#include "ibkd/kernels.hpp"
#include "ibkd/linalg.hpp"
#include "ibkd/objectives.hpp"
#include "ibkd/pipeline.hpp"
#include "ibkd/trainer.hpp"

using namespace ibkd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Matrix normal(std::size_t r, std::size_t c, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sd);
  Matrix m(r, c);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

struct Criterion {
  int id;
  bool pass;
  std::string detail;
  double secs;
};

std::vector<Criterion> results;

void report(int id, bool pass, const std::string& detail, double secs) {
  std::printf("criterion %2d: %s  %s  [%.2f s]\n", id, pass ? "PASS" : "FAIL", detail.c_str(), secs);
  std::fflush(stdout);
  results.push_back({id, pass, detail, secs});
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

void criterion1() {
  const auto t0 = Clock::now();
  const Matrix x{{1, 0}, {0, 1}};
  const double v = objectives::hsic(x, x, kernels::KernelSpec::linear(), kernels::KernelSpec::linear());
  const double secs = seconds_since(t0);
  report(1, std::abs(v - 0.25) <= 1e-12 && secs < 1.0, fmt("hsic = %.17g", v), secs);
}

// Worst relative error of an analytic gradient over `instances` seeded draws.
struct GradCheck {
  std::string name;
  double worst = 0.0;
  void add(const Matrix& analytic, const std::function<double(const Matrix&)>& f, const Matrix& at) {
    worst = std::max(worst, linalg::max_rel_error(analytic, linalg::finite_diff_grad(f, at)));
  }
};

void criterion2() {
  const auto t0 = Clock::now();
  constexpr int kInstances = 20;
  std::vector<GradCheck> checks;
  const std::vector<kernels::KernelSpec> kspecs{kernels::KernelSpec::linear(), kernels::KernelSpec::rbf(0.5),
                                                kernels::KernelSpec::imq(1.0)};

  for (const auto& ks : kspecs) {
    GradCheck g{"hsic/" + kernels::to_string(ks.kind)};
    for (int i = 0; i < kInstances; ++i) {
      const Matrix x = normal(8, 6, 100 + i), s = normal(8, 4, 200 + i);
      g.add(objectives::hsic_grad_s(x, s, ks, ks), [&](const Matrix& m) { return objectives::hsic(x, m, ks, ks); }, s);
    }
    checks.push_back(g);
  }

  {
    GradCheck gs{"infonce_distill/s"}, gw{"infonce_distill/W"};
    for (int i = 0; i < kInstances; ++i) {
      const Matrix s = normal(8, 6, 300 + i), t = normal(8, 5, 400 + i);
      const objectives::AlignmentHead head{normal(6, 5, 500 + i, 0.5)};
      const auto ev = objectives::infonce_distill_grads(s, t, head, 0.5);
      gs.add(ev.grad_s, [&](const Matrix& m) { return objectives::infonce_distill(m, t, head, 0.5); }, s);
      gw.add(ev.grad_w, [&](const Matrix& m) { return objectives::infonce_distill(s, t, {m}, 0.5); }, head.w);
    }
    checks.push_back(gs);
    checks.push_back(gw);
  }

  {
    GradCheck ga{"infonce_supervised/anchors"}, gp{"infonce_supervised/positives"}, gn{"infonce_supervised/negatives"};
    constexpr std::size_t l = 4, K = 2;
    for (int i = 0; i < kInstances; ++i) {
      const Matrix a = normal(l, 5, 600 + i), p = normal(l, 5, 700 + i), n = normal(l * K, 5, 800 + i);
      const auto ev = objectives::infonce_supervised_grads(a, p, n, K, 0.5);
      ga.add(ev.grad_anchors, [&](const Matrix& m) { return objectives::infonce_supervised(m, p, n, K, 0.5); }, a);
      gp.add(ev.grad_positives, [&](const Matrix& m) { return objectives::infonce_supervised(a, m, n, K, 0.5); }, p);
      gn.add(ev.grad_negatives, [&](const Matrix& m) { return objectives::infonce_supervised(a, p, m, K, 0.5); }, n);
    }
    checks.push_back(ga);
    checks.push_back(gp);
    checks.push_back(gn);
  }

  DistillConfig cfg;
  cfg.tau_distill = 0.5;
  cfg.tau_finetune = 0.5;
  {
    GradCheck gs{"distill_stage/s"}, gw{"distill_stage/W"};
    for (int i = 0; i < kInstances; ++i) {
      const Matrix x = normal(8, 7, 900 + i), s = normal(8, 6, 1000 + i), t = normal(8, 5, 1100 + i);
      const objectives::AlignmentHead head{normal(6, 5, 1200 + i, 0.5)};
      const auto ev = objectives::loss_distill_stage_grads(s, t, x, head, cfg);
      gs.add(ev.grad_s, [&](const Matrix& m) { return objectives::loss_distill_stage(m, t, x, head, cfg).total; }, s);
      gw.add(ev.grad_w, [&](const Matrix& m) { return objectives::loss_distill_stage(s, t, x, {m}, cfg).total; },
             head.w);
    }
    checks.push_back(gs);
    checks.push_back(gw);
  }

  {
    GradCheck ga{"finetune_stage/anchors"}, gp{"finetune_stage/positives"}, gn{"finetune_stage/negatives"};
    constexpr std::size_t l = 4, K = 2;
    for (int i = 0; i < kInstances; ++i) {
      const Matrix x = normal(l, 7, 1300 + i);
      const Matrix a = normal(l, 5, 1400 + i), p = normal(l, 5, 1500 + i), n = normal(l * K, 5, 1600 + i);
      const auto ev = objectives::loss_finetune_stage_grads(a, p, n, K, x, cfg);
      auto f = [&](const Matrix& aa, const Matrix& pp, const Matrix& nn) {
        return objectives::loss_finetune_stage(aa, pp, nn, K, x, cfg).total;
      };
      ga.add(ev.grad_anchors, [&](const Matrix& m) { return f(m, p, n); }, a);
      gp.add(ev.grad_positives, [&](const Matrix& m) { return f(a, m, n); }, p);
      gn.add(ev.grad_negatives, [&](const Matrix& m) { return f(a, p, m); }, n);
    }
    checks.push_back(ga);
    checks.push_back(gp);
    checks.push_back(gn);
  }

  {
    // Distillation loss through a 3-layer student, differentiated with
    // respect to every layer's weights and biases.
    GradCheck g{"encoder+distill_stage"};
    for (int i = 0; i < kInstances; ++i) {
      const auto model = encoder::StudentModel::init(encoder::MLPSpec{{7, 9, 8, 6}}, 1700 + i);
      const Matrix x = normal(8, 7, 1800 + i), t = normal(8, 5, 1900 + i);
      const objectives::AlignmentHead head{normal(6, 5, 2000 + i, 0.5)};
      const auto fwd = encoder::forward(model, x);
      const auto ev = objectives::loss_distill_stage_grads(fwd.output, t, x, head, cfg);
      const auto grads = encoder::backward(model, fwd.cache, ev.grad_s);
      for (std::size_t li = 0; li < model.layers.size(); ++li) {
        auto loss_with = [&](auto setter) {
          return [&, setter](const Matrix& m) {
            auto copy = model;
            setter(copy, m);
            return objectives::loss_distill_stage(encoder::forward(copy, x).output, t, x, head, cfg).total;
          };
        };
        g.add(grads.w[li], loss_with([li](encoder::StudentModel& c, const Matrix& m) { c.layers[li].w = m; }),
              model.layers[li].w);
        g.add(grads.b[li], loss_with([li](encoder::StudentModel& c, const Matrix& m) { c.layers[li].b = m; }),
              model.layers[li].b);
      }
    }
    checks.push_back(g);
  }

  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : checks) {
    if (c.worst >= worst) {
      worst = c.worst;
      worst_name = c.name;
    }
  }
  const double secs = seconds_since(t0);
  report(2, worst <= 1e-4 && secs < 60.0,
         fmt("%zu gradient families x %d instances, worst rel err %.3g (%s)", checks.size(), kInstances, worst,
             worst_name.c_str()),
         secs);
}

void criterion3() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::size_t n : {2, 4, 16}) {
    const Matrix u(n, n, 0.3);
    worst = std::max(worst, std::abs(objectives::infonce_from_logits(u, 0.1) - std::log(double(n))));
    // A zero alignment head gives uniform logits through the distillation entry point too.
    const Matrix s = normal(n, 4, n);
    const objectives::AlignmentHead head{Matrix(4, 3, 0.0)};
    worst = std::max(worst, std::abs(objectives::infonce_distill(s, normal(n, 3, n), head, 0.1) - std::log(double(n))));
  }
  const Matrix a(2, 3, 0.0), p(2, 3, 0.0), neg(16, 3, 0.0);
  const double sup = objectives::infonce_supervised(a, p, neg, 8, 0.05);
  const double sup_err = std::abs(sup - std::log(10.0));
  report(3, worst <= 1e-12 && sup_err <= 1e-12,
         fmt("max |L - log n| = %.3g, supervised (2,8) = %.17g", worst, sup), seconds_since(t0));
}

void criterion4() {
  const auto t0 = Clock::now();
  const auto rbf = kernels::KernelSpec::rbf(0.5);
  const Matrix x = normal(512, 2, 41), s = normal(512, 2, 42);
  const double dep = objectives::hsic(x, x, rbf, rbf);
  const double indep = objectives::hsic(x, s, rbf, rbf);
  const double secs = seconds_since(t0);
  report(4, dep >= 10.0 * indep && secs < 10.0,
         fmt("hsic(x,x) = %.6g, hsic(x,s) = %.6g, ratio %.1f", dep, indep, dep / indep), secs);
}

void criterion5() {
  const auto t0 = Clock::now();
  double min_eig = 1e300, asym = 0.0, idem = 0.0, sums = 0.0;
  for (const auto& ks : {kernels::KernelSpec::linear(), kernels::KernelSpec::rbf(0.5), kernels::KernelSpec::imq(1.0)}) {
    for (int i = 0; i < 50; ++i) {
      const Matrix x = normal(20, 5, 3000 + i);
      const Matrix k = kernels::gram(ks, x);
      const auto eig = linalg::symmetric_eigenvalues(k);
      min_eig = std::min(min_eig, eig.front());
      for (std::size_t r = 0; r < k.rows(); ++r)
        for (std::size_t c = 0; c < k.cols(); ++c) asym = std::max(asym, std::abs(k(r, c) - k(c, r)));
      const Matrix hk = kernels::center(k);
      idem = std::max(idem, max_abs_diff(hk, kernels::center(hk)));
      for (std::size_t r = 0; r < hk.rows(); ++r) {
        double rs = 0.0, cs = 0.0;
        for (std::size_t c = 0; c < hk.cols(); ++c) {
          rs += hk(r, c);
          cs += hk(c, r);
        }
        sums = std::max({sums, std::abs(rs), std::abs(cs)});
      }
    }
  }
  report(5, min_eig >= -1e-8 && asym == 0.0 && idem <= 1e-10 && sums < 1e-10,
         fmt("min eigenvalue %.3g, asymmetry %.3g, |HHK - HK| %.3g, max centered sum %.3g", min_eig, asym, idem, sums),
         seconds_since(t0));
}

// ---------------------------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  double teacher_mrr = 0.0;
  double spearman = 0.0;
  double mrr_distill = 0.0;
  double mrr_final = 0.0;
  double mrr_final_cos = 0.0;
  double mrr_reduced = 0.0;
  double mrr_reduced_cos = 0.0;
  double offdiag_b1 = 0.0;
  double offdiag_b0 = 0.0;
  double secs_main = 0.0;
};

double mrr(const encoder::StudentModel& m, const dataio::Dataset& ds, eval::Score score) {
  return pipeline::evaluate_retrieval(pipeline::student_embedder(m), ds, 10, score).metrics.at("mrr@10");
}

double offdiag(const encoder::StudentModel& m, const dataio::Dataset& ds) {
  return pipeline::diagnose(pipeline::student_embedder(m), ds).report.metrics.at("offdiag_mass");
}

std::vector<SeedRun> run_seeds() {
  std::vector<SeedRun> runs;
  for (std::uint64_t seed : {7, 8, 9}) {
    SeedRun r;
    r.seed = seed;
    dataio::SyntheticSpec spec;
    spec.seed = seed;
    const auto ds = dataio::gen_synthetic(spec);
    const encoder::TeacherModel teacher(ds.teacher);
    r.teacher_mrr = pipeline::evaluate_retrieval(pipeline::teacher_embedder(teacher), ds, 10, eval::Score::Dot)
                        .metrics.at("mrr@10");

    DistillConfig cfg;
    cfg.seed = seed;
    const auto t0 = Clock::now();
    const auto main = pipeline::run_pipeline(cfg, ds);
    r.secs_main = seconds_since(t0);
    r.spearman = pipeline::evaluate_sts(pipeline::student_embedder(main.finetuned), ds).metrics.at("spearman");
    r.mrr_distill = mrr(main.distilled, ds, eval::Score::Dot);
    r.mrr_final = mrr(main.finetuned, ds, eval::Score::Dot);
    r.mrr_final_cos = mrr(main.finetuned, ds, eval::Score::Cosine);
    r.offdiag_b1 = offdiag(main.finetuned, ds);

    auto reduced_cfg = cfg;
    reduced_cfg.reduce_to = main.distilled.spec.d_out() / 2;
    const auto reduced = trainer::run_finetune_stage(reduced_cfg, main.distilled, ds.supervised).student;
    r.mrr_reduced = mrr(reduced, ds, eval::Score::Dot);
    r.mrr_reduced_cos = mrr(reduced, ds, eval::Score::Cosine);

    auto off_cfg = cfg;
    off_cfg.beta1 = 0.0;
    r.offdiag_b0 = offdiag(pipeline::run_pipeline(off_cfg, ds).finetuned, ds);

    std::printf(
        "  seed %llu: teacher mrr %.4f | spearman %.4f | mrr distill %.4f final %.4f (cosine %.4f) | reduced %.4f "
        "(cosine %.4f) | offdiag b1=1 %.6f b1=0 %.6f | pipeline %.1f s\n",
        static_cast<unsigned long long>(seed), r.teacher_mrr, r.spearman, r.mrr_distill, r.mrr_final, r.mrr_final_cos,
        r.mrr_reduced, r.mrr_reduced_cos, r.offdiag_b1, r.offdiag_b0, r.secs_main);
    std::fflush(stdout);
    runs.push_back(r);
  }
  return runs;
}

void criteria6to9(const std::vector<SeedRun>& runs, double total_secs) {
  bool p6 = true, p7 = true, p8 = true, p9 = true;
  double pipeline_secs = 0.0, min_sp = 1.0, max_gap = 0.0, max_drop = -1.0, min_ft_gain = 1e9;
  std::string d7;
  for (const auto& r : runs) {
    pipeline_secs += r.secs_main;
    min_sp = std::min(min_sp, r.spearman);
    max_gap = std::max(max_gap, r.teacher_mrr - r.mrr_final);
    p6 = p6 && r.spearman >= 0.9 && r.teacher_mrr - r.mrr_final <= 0.05;
    p7 = p7 && r.offdiag_b1 < r.offdiag_b0;
    d7 += fmt("%s%.6f vs %.6f", d7.empty() ? "" : ", ", r.offdiag_b1, r.offdiag_b0);
    min_ft_gain = std::min(min_ft_gain, r.mrr_final - r.mrr_distill);
    p8 = p8 && r.mrr_final >= r.mrr_distill;
    max_drop = std::max(max_drop, r.mrr_final - r.mrr_reduced);
    p9 = p9 && r.mrr_final - r.mrr_reduced <= 0.05;
  }
  p6 = p6 && pipeline_secs < 600.0;
  report(6, p6,
         fmt("min spearman %.4f (need >= 0.9), max teacher-student mrr@10 gap %.4f (need <= 0.05), 3 pipelines %.1f s",
             min_sp, max_gap, pipeline_secs),
         pipeline_secs);
  report(7, p7, "offdiag_mass beta1=1 vs beta1=0: " + d7, total_secs);
  report(8, p8, fmt("min (finetuned - distilled) mrr@10 = %.4f", min_ft_gain), total_secs);
  report(9, p9, fmt("max mrr@10 drop with reduce_to = d_out/2: %.4f (need <= 0.05)", max_drop), total_secs);
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + IBKD_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion10() {
  const auto t0 = Clock::now();
  std::vector<std::string> failures;
  const fs::path dir = fs::temp_directory_path() / ("ibkd_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);

  dataio::SyntheticSpec spec;
  spec.corpus_size = 400;
  spec.query_count = 40;
  spec.sts_pairs = 60;
  const auto ds = dataio::gen_synthetic(spec);
  DistillConfig cfg;
  cfg.epochs_distill = 2;
  cfg.epochs_finetune = 1;
  cfg.batch_size = 64;
  const auto a = pipeline::run_pipeline(cfg, ds), b = pipeline::run_pipeline(cfg, ds);
  if (encoder::serialize_checkpoint(a.finetuned) != encoder::serialize_checkpoint(b.finetuned) ||
      encoder::serialize_checkpoint(a.distilled) != encoder::serialize_checkpoint(b.distilled))
    failures.push_back("checkpoints differ between identical runs");

  const auto records = dataio::to_records(ds.corpus_ids, ds.corpus);
  dataio::write_embeddings((dir / "corpus.ibkv").string(), records);
  const auto back = dataio::read_embeddings((dir / "corpus.ibkv").string());
  const auto bytes = dataio::encode_embeddings(records);
  if (back != records || dataio::encode_embeddings(back) != bytes ||
      slurp(dir / "corpus.ibkv") != std::string(bytes.begin(), bytes.end()))
    failures.push_back("embedding file round trip");

  encoder::save_checkpoint((dir / "m.ckpt").string(), a.distilled);
  const auto loaded = encoder::load_checkpoint((dir / "m.ckpt").string());
  if (!(loaded == a.distilled) || encoder::serialize_checkpoint(loaded) != encoder::serialize_checkpoint(a.distilled))
    failures.push_back("checkpoint round trip");

  {
    std::ofstream(dir / "spec.json") << spec.to_json_text();
    std::ofstream(dir / "cfg.json") << cfg.to_json_text();
    const auto data = (dir / "data").string();
    const auto c = (dir / "cfg.json").string();
    bool ok = run_cli("gen-synthetic --spec " + (dir / "spec.json").string() + " --out " + data) == 0 &&
              run_cli("distill --config " + c + " --data " + data + " --out " + (dir / "s.ckpt").string()) == 0 &&
              run_cli("finetune --config " + c + " --data " + data + " --ckpt " + (dir / "s.ckpt").string() +
                      " --out " + (dir / "f.ckpt").string()) == 0 &&
              run_cli("evaluate --ckpt " + (dir / "f.ckpt").string() + " --data " + data +
                      " --task retrieval --out " + (dir / "r.json").string()) == 0;
    if (!ok) failures.push_back("cli pipeline");
    for (const char* m : {"data/manifest.json", "s.ckpt.manifest.json", "f.ckpt.manifest.json", "r.json.manifest.json"}) {
      if (run_cli("replay --manifest " + (dir / m).string() + " --out-dir " + (dir / "replay").string()) != 0)
        failures.push_back(std::string("replay of ") + m);
    }
    if (slurp(dir / "replay" / "f.ckpt") != slurp(dir / "f.ckpt")) failures.push_back("replayed checkpoint bytes");
  }
  fs::remove_all(dir);

  std::string detail = "checkpoints, embedding files and manifest replays bit-exact";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " [" + f + "]";
  }
  report(10, failures.empty(), detail, seconds_since(t0));
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  const auto t0 = Clock::now();
  const auto runs = run_seeds();
  criteria6to9(runs, seconds_since(t0));
  criterion10();
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.pass;
  std::printf("%zu/%zu criteria passed\n", passed, results.size());
  return passed == results.size() ? 0 : 1;
}
