// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass criterion numbers as arguments to run a
// subset, e.g. `acceptance 1 2 3`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "ictd/autodiff.hpp"
#include "ictd/constructions.hpp"
#include "ictd/metrics.hpp"
#include "ictd/training.hpp"
#include "ictd/verify.hpp"

using namespace ictd;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kEquivalenceTol = 1e-8;
constexpr double kFiniteDiffH = 1e-6;
constexpr double kFiniteDiffRelTol = 1e-5;
constexpr double kClosedFormTol = 1e-10;
constexpr std::size_t kInvariantSamples = 10000;
constexpr std::size_t kEmergenceTasks = 1000;
constexpr std::size_t kEmergenceSeeds = 5;
constexpr double kTraceFraction = 0.7;
constexpr double kOthersMax = 0.2;
constexpr double kPBottomRightMin = 0.9;
constexpr std::size_t kSingleLayerSeeds = 3;
constexpr double kSingleLayerRightMax = 0.2;
constexpr std::size_t kDemoTasks = 300;
constexpr double kDemoFinalRatio = 0.25;
constexpr double kSimilarityMin = 0.9;
constexpr double kVdScaleFraction = 0.1;
constexpr std::size_t kMetricEvalTasks = 20;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

Prompt random_prompt(std::size_t d, std::size_t n, SeededRng& rng) {
  std::vector<Vector> phis;
  for (std::size_t j = 0; j <= n + 1; ++j) phis.push_back(rng.uniform_vector(d, -1, 1));
  const Vector rewards = rng.uniform_vector(n, -1, 1);
  const std::span<const Vector> f(phis);
  return build_prompt(f.subspan(0, n), f.subspan(1, n), rewards, 0.9, f[n + 1]);
}

TransformerParams random_params(std::size_t d, std::size_t layers, AttentionKind attn, SeededRng& rng) {
  TransformerParams params;
  params.attn = attn;
  params.num_layers = layers;
  params.shared = true;
  Matrix p(2 * d + 1, 2 * d + 1), q(2 * d + 1, 2 * d + 1);
  for (double& x : p.data()) x = rng.uniform(-0.5, 0.5);
  for (double& x : q.data()) x = rng.uniform(-0.5, 0.5);
  params.layers.push_back({p, q});
  return params;
}

TrainConfig emergence_config(std::uint64_t seed, std::size_t layers) {
  TrainConfig cfg;
  cfg.k = kEmergenceTasks;
  cfg.layers = layers;
  cfg.seed = seed;
  cfg.log_every = 0;
  cfg.snapshot_every = 0;
  return cfg;
}

// Trained criterion-5 models, shared with criterion 8.
std::vector<TransformerParams>& emergence_models() {
  static std::vector<TransformerParams> models;
  if (models.empty()) {
    for (std::size_t s = 0; s < kEmergenceSeeds; ++s) models.push_back(train(emergence_config(s + 1, 3)).params);
  }
  return models;
}

Outcome forward_equivalence() {
  double worst = 0.0;
  std::ostringstream detail;
  for (EquivalenceKind kind : {EquivalenceKind::TD0, EquivalenceKind::TD0OneLayer, EquivalenceKind::RG,
                               EquivalenceKind::TDLambda, EquivalenceKind::Avg}) {
    for (double lambda : kind == EquivalenceKind::TDLambda ? std::vector<double>{0.0, 0.5, 0.9, 1.0}
                                                           : std::vector<double>{0.0}) {
      EquivalenceConfig cfg;
      cfg.kind = kind;
      cfg.lambda = lambda;
      cfg.layers = kind == EquivalenceKind::TD0OneLayer ? 1 : 40;
      const double m = verify_equivalence(cfg).max_abs_diff();
      worst = std::max(worst, m);
      detail << to_string(kind) << (kind == EquivalenceKind::TDLambda ? "(" + fmt(lambda) + ")" : "") << "="
             << fmt(m) << " ";
    }
  }
  detail << "max=" << fmt(worst) << " tol=" << fmt(kEquivalenceTol);
  return {worst <= kEquivalenceTol, detail.str()};
}

Outcome mask_degeneration() {
  std::size_t mismatches = 0;
  for (std::size_t n = 1; n <= 40; ++n) {
    const Matrix a = make_mask(MaskKind::td_lambda(0.0), n);
    const Matrix b = make_mask(MaskKind::td0(), n);
    for (std::size_t k = 0; k < a.size(); ++k) mismatches += a.data()[k] != b.data()[k];
  }
  return {mismatches == 0, "n=1..40 entrywise mismatches=" + std::to_string(mismatches)};
}

Outcome gradient_correctness() {
  SeededRng rng(3);
  double worst_fd = 0.0;
  for (AttentionKind attn : {AttentionKind::Linear, AttentionKind::Softmax}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Prompt z0 = random_prompt(3, 6, rng);
      const TransformerParams params = random_params(3, 3, attn, rng);
      worst_fd = std::max(worst_fd, relative_error(grad_output(z0, params).layers,
                                                   finite_diff(z0, params, kFiniteDiffH)));
    }
  }
  double worst_cf = 0.0;
  const std::size_t d = 4;
  for (int trial = 0; trial < 50; ++trial) {
    const Prompt z0 = random_prompt(d, 9, rng);
    TransformerParams params = random_params(d, 1, AttentionKind::Linear, rng);
    const Matrix& p = params.layers[0].p;
    const Matrix& q = params.layers[0].q;
    const Tf1ClosedForm cf = tf1_closed_form(z0, p, q);
    const Gradient g = grad_output(z0, params);
    auto track = [&](double a, double b) { worst_cf = std::max(worst_cf, std::abs(a - b)); };
    track(cf.value, g.output);
    track(cf.grad_p_reward, g.layers[0].p(2 * d, 2 * d));
    for (std::size_t k = 0; k < d; ++k) {
      track(cf.grad_p_top[k], g.layers[0].p(2 * d, k));
      track(cf.grad_p_mid[k], g.layers[0].p(2 * d, d + k));
      track(cf.grad_q_a[k], g.layers[0].q(2 * d, k));
      for (std::size_t c = 0; c < d; ++c) {
        track(cf.grad_qa(k, c), g.layers[0].q(k, c));
        track(cf.grad_qa_prime(k, c), g.layers[0].q(d + k, c));
      }
    }
  }
  const bool ok = worst_fd <= kFiniteDiffRelTol && worst_cf <= kClosedFormTol;
  return {ok, "fd_rel_err=" + fmt(worst_fd) + " (tol " + fmt(kFiniteDiffRelTol) + ") closed_form_err=" +
                  fmt(worst_cf) + " (tol " + fmt(kClosedFormTol) + ")"};
}

Outcome invariant_set() {
  InvariantSetConfig cfg;
  cfg.samples = kInvariantSamples;
  const InvariantSetReport at = verify_invariant_set(cfg);
  cfg.perturb_p = 0.5;
  const InvariantSetReport off = verify_invariant_set(cfg);
  std::size_t outside = 0;
  for (const CoordinateStat& s : at.off_pattern) outside += !s.consistent_with_zero();
  std::size_t control_outside = 0;
  for (const CoordinateStat& s : off.off_pattern) control_outside += !s.consistent_with_zero();
  return {at.pass() && !off.pass(), "K=" + std::to_string(cfg.samples) + " off-pattern outside 4 SE: " +
                                        std::to_string(outside) + "/" + std::to_string(at.off_pattern.size()) +
                                        "; perturbed control outside: " + std::to_string(control_outside)};
}

Outcome emergence() {
  const std::size_t d = 4;
  double left = 0, right = 0, p_others = 0, q_others = 0, pbr = 0;
  for (const TransformerParams& m : emergence_models()) {
    const MetricRecord r = elementwise_stats(m.layers[0].p, m.layers[0].q, d);
    left += r.q_trace_left;
    right += r.q_trace_right;
    p_others += r.p_avg_abs_others;
    q_others += r.q_avg_abs_others;
    pbr += r.p_bottom_right;
  }
  const double s = static_cast<double>(kEmergenceSeeds);
  left /= s, right /= s, p_others /= s, q_others /= s, pbr /= s;
  const double bound = kTraceFraction * static_cast<double>(d);
  const bool ok = left <= -bound && right >= bound && p_others <= kOthersMax && q_others <= kOthersMax &&
                  pbr >= kPBottomRightMin;
  return {ok, "k=" + std::to_string(kEmergenceTasks) + " seeds=" + std::to_string(kEmergenceSeeds) +
                  " trQ_left=" + fmt(left) + " (<= " + fmt(-bound) + ") trQ_right=" + fmt(right) + " (>= " +
                  fmt(bound) + ") P_others=" + fmt(p_others) + " Q_others=" + fmt(q_others) + " (<= " +
                  fmt(kOthersMax) + ") P[-1,-1]=" + fmt(pbr) + " (>= " + fmt(kPBottomRightMin) + ")"};
}

Outcome single_layer() {
  const std::size_t d = 4;
  double left = 0, right = 0;
  for (std::size_t s = 0; s < kSingleLayerSeeds; ++s) {
    const TransformerParams m = train(emergence_config(s + 1, 1)).params;
    const MetricRecord r = elementwise_stats(m.layers[0].p, m.layers[0].q, d);
    left += r.q_trace_left;
    right += r.q_trace_right;
  }
  left /= static_cast<double>(kSingleLayerSeeds);
  right /= static_cast<double>(kSingleLayerSeeds);
  const bool ok = std::abs(right) <= kSingleLayerRightMax * d && left <= -kTraceFraction * d;
  return {ok, "seeds=" + std::to_string(kSingleLayerSeeds) + " |trQ_right|=" + fmt(std::abs(right)) + " (<= " +
                  fmt(kSingleLayerRightMax * d) + ") trQ_left=" + fmt(left) + " (<= " + fmt(-kTraceFraction * d) +
                  ")"};
}

Outcome demo_trend() {
  DemoConfig cfg;
  cfg.grid = DemoConfig::default_grid();
  cfg.tasks = kDemoTasks;
  const DemoResult res = demo_msve_vs_context(cfg);
  const DemoRow& first = res.rows.front();
  const DemoRow& last = res.rows.back();
  const bool separated = last.mean_msve + last.std_error < first.mean_msve - first.std_error;
  const bool ratio = last.mean_msve < kDemoFinalRatio * first.mean_msve;
  return {separated && ratio, "msve(1)=" + fmt(first.mean_msve) + "+-" + fmt(first.std_error) +
                                  " msve(40)=" + fmt(last.mean_msve) + "+-" + fmt(last.std_error) +
                                  " ratio=" + fmt(last.mean_msve / first.mean_msve) + " (< " +
                                  fmt(kDemoFinalRatio) + ")"};
}

Outcome metric_sanity() {
  const TrainConfig cfg = emergence_config(1, 3);
  const TdReference td = make_td_reference(cfg.d, fit_alpha_for_vtd(cfg), cfg.layers);

  // Identity: the reference compared with itself.
  SeededRng rng(99);
  double self_vd = 0.0, self_iws = 1.0, self_ss = 1.0;
  double vd = 0, iws = 0, ss = 0, scale = 0;
  std::size_t count = 0;
  for (const TransformerParams& model : emergence_models()) {
    for (std::size_t e = 0; e < kMetricEvalTasks; ++e) {
      const Task task = sample_task(cfg, rng);
      const EvalSupport support = eval_support(task, rng);
      const Trajectory traj = sample_trajectory(task, cfg.n, rng);
      const std::span<const Vector> f(traj.features);
      const Prompt context =
          build_prompt(f.subspan(0, cfg.n), f.subspan(1, cfg.n), traj.rewards, cfg.gamma, f[cfg.n]);
      self_vd = std::max(self_vd, value_difference(td.params, td, support, context));
      self_iws = std::min(self_iws, implicit_weight_similarity(td.params, td, support, context));
      self_ss = std::min(self_ss, sensitivity_similarity(td.params, td, support, context));
      vd += value_difference(model, td, support, context);
      iws += implicit_weight_similarity(model, td, support, context);
      ss += sensitivity_similarity(model, td, support, context);
      const Vector v_td = predict_values(context, td.params, support.phi);
      for (std::size_t s = 0; s < v_td.size(); ++s) scale += support.weights[s] * v_td[s] * v_td[s];
      ++count;
    }
  }
  const double c = static_cast<double>(count);
  vd /= c, iws /= c, ss /= c, scale /= c;
  const bool identity = self_vd == 0.0 && std::abs(self_iws - 1.0) <= 1e-12 && std::abs(self_ss - 1.0) <= 1e-12;
  const bool trained = iws >= kSimilarityMin && ss >= kSimilarityMin && vd <= kVdScaleFraction * scale;
  return {identity && trained, "self: VD=" + fmt(self_vd) + " IWS=" + fmt(self_iws) + " SS=" + fmt(self_ss) +
                                   "; trained: IWS=" + fmt(iws) + " SS=" + fmt(ss) + " (>= " +
                                   fmt(kSimilarityMin) + ") VD=" + fmt(vd) + " (<= " + fmt(kVdScaleFraction) +
                                   " x " + fmt(scale) + ") alpha_td=" + fmt(td.c_list.front()(0, 0))};
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "ictd_acceptance_replay";
  fs::remove_all(root);
  const std::vector<std::vector<std::string>> runs = {
      {"verify", "--kind", "td-lambda", "--lambda", "0.7", "--seeds", "5"},
      {"verify", "--invariant-set", "--samples", "500"},
      {"demo", "--tasks", "20", "--max-context", "10"},
      {"train", "--tasks", "3", "--tau", "60", "--context", "10", "--log-every", "25", "--eval-tasks", "2",
       "--alpha-fit-tasks", "3", "--seed", "11"},
  };
  std::size_t matched = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path dir = root / ("run" + std::to_string(i));
    std::vector<std::string> args = runs[i];
    args.push_back("--out-dir");
    args.push_back(dir.string());
    std::ostringstream out, err;
    if (cli::run(args, out, err) != cli::kExitOk) continue;
    std::ostringstream rout, rerr;
    const int rc = cli::run({"replay", "--manifest", (dir / "manifest.json").string()}, rout, rerr);
    matched += rc == cli::kExitOk && rout.str().find("DIFFER") == std::string::npos;
  }
  return {matched == runs.size(), "bitwise replays " + std::to_string(matched) + "/" + std::to_string(runs.size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"forward-pass equivalence", forward_equivalence},
      {"mask degeneration", mask_degeneration},
      {"gradient correctness", gradient_correctness},
      {"invariant-set consistency", invariant_set},
      {"emergence of in-context TD (L=3)", emergence},
      {"single-layer emergence pattern", single_layer},
      {"MSVE falls with context length", demo_trend},
      {"metric suite sanity", metric_sanity},
      {"reproducibility", reproducibility},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
              << " (" << fmt(secs) << " s)" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
