#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "io.hpp"
#include "lipattn/bounds.hpp"
#include "lipattn/checks.hpp"
#include "lipattn/error.hpp"
#include "lipattn/generators.hpp"
#include "lipattn/jacobian.hpp"
#include "lipattn/linalg.hpp"
#include "lipattn/spectral.hpp"
#include "lipattn/sweep.hpp"

namespace {

using namespace lipattn;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitViolation = 2;

/// Bad flag combinations detected after parsing.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A check or invariant failed; maps to exit code 2.
struct ViolationExit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void print_line(const std::string& key, const std::string& value) { std::cout << key << ' ' << value << '\n'; }
void print_line(const std::string& key, double value) { print_line(key, fmt(value)); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

SweepVariant require_variant(const std::string& name) {
  const auto v = parse_variant(name);
  if (!v) throw UsageError("unknown variant '" + name + "' (unmasked, masked, multi_head, weighted, biased)");
  return *v;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string input;
  std::string params;
  std::string weights;
  std::string variant = "unmasked";
  std::string out;
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  std::uint64_t seed = 0;
};

int run_estimate(const EstimateArgs& a) {
  const SweepVariant variant = require_variant(a.variant);
  const TokenSequence x = cli::read_tokens_csv(a.input);
  const std::size_t d = x.dim();
  cli::ModelFile model;
  if (!a.params.empty()) {
    model = cli::read_params(a.params);
  } else if (variant == SweepVariant::MultiHead) {
    throw UsageError("--variant multi_head needs --params");
  } else {
    // A = I and V = I; the biased variant gets zero biases.
    const Matrix id = Matrix::identity(d);
    model.single = AttentionParams::from_bilinear(id, id);
    if (variant == SweepVariant::Biased) model.single = model.single->with_biases({Vector(d), Vector(d), Vector(d)});
  }
  if ((variant == SweepVariant::MultiHead) != model.multi.has_value()) {
    throw UsageError("--variant " + a.variant + " does not match the parameter file");
  }
  if (variant == SweepVariant::Biased && !model.single->biases()) {
    throw UsageError("--variant biased needs b_Q, b_K, b_V in the parameter file");
  }
  if (!a.weights.empty() && variant != SweepVariant::Weighted) throw UsageError("--weights needs --variant weighted");

  PowerIterationOptions po;
  po.tol = a.tol;
  po.max_iter = a.max_iter;
  po.seed = a.seed;
  PowerIterationResult res;
  switch (variant) {
    case SweepVariant::Unmasked:
      res = local_lipschitz(JacobianOperator::unmasked(x, *model.single), po);
      break;
    case SweepVariant::Masked:
      res = local_lipschitz(JacobianOperator::masked(x, *model.single), po);
      break;
    case SweepVariant::Biased:
      res = local_lipschitz(JacobianOperator::biased(x, *model.single), po);
      break;
    case SweepVariant::Weighted: {
      const SimplexWeights w = a.weights.empty() ? SimplexWeights::uniform(x.size()) : cli::read_weights(a.weights);
      res = local_lipschitz_weighted(JacobianOperator::weighted(x, *model.single, w), po);
      break;
    }
    case SweepVariant::MultiHead:
      res = multi_head_local_lipschitz(x, *model.multi, po);
      break;
  }

  print_line("variant", std::string(to_string(variant)));
  print_line("n", std::to_string(x.size()));
  print_line("d", std::to_string(d));
  print_line("radius", x.radius());
  print_line("measured_lipschitz", res.lipschitz);
  print_line("converged", res.converged ? "true" : "false");
  print_line("iterations", std::to_string(res.iterations));
  if (!a.out.empty()) {
    const json j{{"variant", to_string(variant)}, {"n", x.size()},
                 {"d", d},
                 {"radius", x.radius()},
                 {"measured_lipschitz", res.lipschitz},
                 {"converged", res.converged},
                 {"iterations", res.iterations},
                 {"final_residual", res.final_residual}};
    write_text(a.out, j.dump(2) + "\n");
  }
  return kExitOk;
}

// ------------------------------------------------------------------ bounds

struct BoundsArgs {
  std::optional<std::size_t> n;
  std::optional<double> radius;
  std::optional<double> norm_a, norm_v, norm_q, norm_k, bias_q, gamma, rho, r;
  std::string params;
  std::string input;
  std::string out;
};

int run_bounds(const BoundsArgs& a) {
  BoundInputs bi;
  std::optional<double> gamma = a.gamma;
  std::optional<double> rho = a.rho;
  std::optional<double> r = a.r;
  bool have_qk = a.norm_q && a.norm_k;
  std::optional<TokenSequence> x;
  if (!a.input.empty()) x = cli::read_tokens_csv(a.input);
  if (!a.params.empty()) {
    const cli::ModelFile mf = cli::read_params(a.params);
    if (!mf.single) throw UsageError("bounds takes single-head parameters");
    const std::size_t n = a.n ? *a.n : x ? x->size() : 0;
    const double radius = a.radius ? *a.radius : x ? x->radius() : -1.0;
    if (n == 0 || radius < 0) throw UsageError("bounds --params needs --n and --R, or --input");
    bi = BoundInputs::from_params(*mf.single, n, radius);
    have_qk = mf.single->biases().has_value();
    if (!gamma) gamma = lower_bound_gamma(real_eigenpairs(mf.single->bilinear()));
    if (x) {
      const RhoR rr = measure_rho_r(*x, mf.single->bilinear());
      if (!rho) rho = rr.rho;
      if (!r) r = rr.r;
    }
  } else {
    if (!a.n || !a.radius || !a.norm_a || !a.norm_v) {
      throw UsageError("bounds needs --n, --R, --norm-a and --norm-v (or --params)");
    }
    bi.n = *a.n;
    bi.radius = *a.radius;
    bi.norm_a = *a.norm_a;
    bi.norm_v = *a.norm_v;
    if (a.norm_q) bi.norm_q = *a.norm_q;
    if (a.norm_k) bi.norm_k = *a.norm_k;
    if (a.bias_q) bi.bias_norm_q = *a.bias_q;
  }
  if (bi.n == 0) throw UsageError("--n must be >= 1");
  if (!(bi.radius >= 0.0)) throw UsageError("--R must be >= 0");

  json j;
  auto emit = [&](const std::string& name, double v) {
    print_line(name, v);
    j[name] = v;
  };
  emit("upper_general", upper_general(bi));
  emit("upper_general_tight", upper_general_tight(bi));
  emit("upper_mean_field", upper_mean_field(bi));
  emit("upper_masked", upper_masked(bi));
  emit("upper_masked_mean_field", upper_masked_mean_field(bi));
  if (rho && r) {
    bi.rho = *rho;
    bi.r = *r;
    emit("upper_rho_r", upper_rho_r(bi));
  }
  if (have_qk) {
    emit("upper_biased", upper_biased(bi));
    emit("upper_biased_squared_key", upper_biased_squared_key(bi));
  }
  if (gamma) {
    emit("lower_prop32", lower_prop32(bi.n, bi.radius, *gamma));
    emit("lower_prop35", lower_prop35(bi.radius, *gamma));
  }
  if (const auto cross = general_vs_mean_field_crossover(bi, std::size_t{1} << 40)) {
    print_line("general_exceeds_mean_field_from_n", std::to_string(*cross));
    j["general_exceeds_mean_field_from_n"] = *cross;
  }
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  return kExitOk;
}

// ------------------------------------------------------------- adversarial

struct AdversarialArgs {
  std::string generator;
  std::string variant;
  std::size_t n = 8;
  double radius = 1.0;
  std::size_t d = 2;
  std::size_t k = 0;
  std::size_t H = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string weights_out;
  std::string params_out;
};

SweepVariant default_variant(SweepGenerator g) {
  switch (g) {
    case SweepGenerator::Prop35:
      return SweepVariant::Weighted;
    case SweepGenerator::Section52:
      return SweepVariant::MultiHead;
    default:
      return SweepVariant::Unmasked;
  }
}

int run_adversarial(const AdversarialArgs& a) {
  const auto gen = parse_generator(a.generator);
  if (!gen) {
    throw UsageError("unknown generator '" + a.generator +
                     "' (prop32, prop35, section52, quadratic, random_generic, random_ball)");
  }
  SweepConfig cfg;
  cfg.generator = *gen;
  cfg.variant = a.variant.empty() ? default_variant(*gen) : require_variant(a.variant);
  cfg.n_grid = {*gen == SweepGenerator::Prop35 ? std::size_t{2} : a.n};
  cfg.R_grid = {a.radius};
  cfg.d = a.d;
  cfg.k = a.k;
  cfg.H = a.H;
  cfg.seeds = {a.seed};
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const SweepPoint pt = sweep_point(cfg, cfg.n_grid.front(), a.radius);
  if (pt.weights && a.weights_out.empty()) throw UsageError("this configuration is weighted; pass --weights-out");

  cli::write_tokens_csv(a.out, pt.x);
  if (pt.weights) cli::write_weights(a.weights_out, *pt.weights);
  if (!a.params_out.empty()) {
    if (pt.params) cli::write_params(a.params_out, *pt.params);
    if (pt.multi_head) cli::write_params(a.params_out, *pt.multi_head);
  }

  print_line("generator", std::string(to_string(cfg.generator)));
  print_line("variant", std::string(to_string(cfg.variant)));
  print_line("n", std::to_string(pt.x.size()));
  print_line("d", std::to_string(pt.x.dim()));
  print_line("radius", pt.x.radius());
  std::optional<AdversarialConfig> witness;
  if (cfg.generator == SweepGenerator::Prop32) witness = prop32_config(*pt.params, a.radius, pt.x.size());
  if (cfg.generator == SweepGenerator::Prop35) witness = prop35_weighted_config(*pt.params, a.radius);
  if (cfg.generator == SweepGenerator::Section52) {
    witness = section52_adversarial(*pt.multi_head, pt.adversarial_head, a.radius, pt.x.size());
    print_line("adversarial_head", std::to_string(pt.adversarial_head));
  }
  if (witness) {
    print_line("case", std::string(to_string(witness->case_tag)));
    print_line("expected_lower_bound", witness->expected_lower_bound);
  }
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepArgs {
  std::string config;
  std::optional<std::string> variant;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::string out;
  std::size_t threads = 0;
  bool timing = false;
};

int run_sweep_command(const SweepArgs& a) {
  SweepConfig cfg = load_sweep_config(a.config);
  if (a.variant) cfg.variant = require_variant(*a.variant);
  if (a.seed) cfg.seeds = {*a.seed};
  if (a.tol) cfg.tol = *a.tol;
  if (!a.out.empty()) cfg.output_path = a.out;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  SweepOptions opts;
  opts.threads = a.threads;
  opts.record_timing = a.timing;
  std::vector<SweepRecord> records;
  try {
    records = run_sweep(cfg, opts);
  } catch (const BoundViolationError& e) {
    throw ViolationExit(std::string("bound invariant violated: ") + e.what());
  }
  std::size_t unconverged = 0;
  double worst_ratio = 0.0;
  std::size_t bounded = 0;
  for (const auto& r : records) {
    if (!r.converged) ++unconverged;
    if (r.bound_general && *r.bound_general > 0.0) {
      ++bounded;
      worst_ratio = std::max(worst_ratio, r.measured_lipschitz / *r.bound_general);
    }
  }
  if (cfg.output_path.empty()) {
    std::cout << emit_csv(records);
  } else {
    write_csv(cfg.output_path, records);
    print_line("records", std::to_string(records.size()));
    print_line("unconverged", std::to_string(unconverged));
    if (bounded > 0) {
      print_line("max_measured_over_bound_general", worst_ratio);
    } else {
      print_line("max_measured_over_bound_general", std::string("n/a"));
    }
    print_line("csv", cfg.output_path);
  }
  return kExitOk;
}

// ------------------------------------------------------------------- check

struct CheckArgs {
  std::uint64_t seed = 0;
  std::string out;
  bool masked_mean_field = false;
};

int run_check(const CheckArgs& a) {
  std::vector<CheckReport> reports = run_all_checks(a.seed);
  if (a.masked_mean_field) reports.push_back(check_masked_mean_field_ratio(a.seed));
  bool all = true;
  for (const auto& r : reports) {
    std::cout << r.describe() << '\n';
    all = all && r.passed;
  }
  if (!a.out.empty()) write_text(a.out, checks_to_json(reports) + "\n");
  if (!all) throw ViolationExit("one or more checks failed");
  return kExitOk;
}

// ------------------------------------------------------------------- slope

struct SlopeArgs {
  std::string csv;
  std::string x = "n";
  std::string y = "measured_lipschitz";
  std::string fit = "loglog";
  bool sqrt_y = false;
  std::string out;
};

int run_slope(const SlopeArgs& a) {
  if (a.fit != "loglog" && a.fit != "linear") throw UsageError("--fit must be loglog or linear");
  const std::vector<SweepRecord> records = read_csv(a.csv);
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& r : records) {
    const auto xv = record_field(r, a.x);
    const auto yv = record_field(r, a.y);
    if (!xv || !yv) continue;
    xs.push_back(*xv);
    ys.push_back(a.sqrt_y ? std::sqrt(*yv) : *yv);
  }
  const LinearFit f = a.fit == "loglog" ? fit_loglog_slope(xs, ys) : fit_linear(xs, ys);
  print_line("points", std::to_string(xs.size()));
  print_line("slope", f.slope);
  print_line("intercept", f.intercept);
  print_line("r_squared", f.r_squared);
  if (!a.out.empty()) {
    const json j{{"fit", a.fit},         {"x", a.x}, {"y", a.sqrt_y ? "sqrt(" + a.y + ")" : a.y},
                 {"points", xs.size()},  {"slope", f.slope},
                 {"intercept", f.intercept}, {"r_squared", f.r_squared}};
    write_text(a.out, j.dump(2) + "\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local Lipschitz constants of self-attention: estimates, bounds, generators, sweeps"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "Local Lipschitz constant at a token file (CSV, n rows x d columns)");
  c_est->add_option("input,--input", est.input, "Token CSV")->required()->check(CLI::ExistingFile);
  c_est->add_option("--params", est.params, "Parameter JSON (default A = V = I)")->check(CLI::ExistingFile);
  c_est->add_option("--variant", est.variant, "unmasked, masked, weighted, biased or multi_head")
      ->capture_default_str();
  c_est->add_option("--weights", est.weights, "Weights file for the weighted variant (default uniform)")
      ->check(CLI::ExistingFile);
  c_est->add_option("--tol", est.tol, "Power-iteration relative tolerance")->capture_default_str();
  c_est->add_option("--max-iter", est.max_iter, "Power-iteration cap")->capture_default_str();
  c_est->add_option("--seed", est.seed, "Power-iteration start seed")->capture_default_str();
  c_est->add_option("--out", est.out, "Also write the result as JSON");

  BoundsArgs bnd;
  auto* c_bnd = app.add_subcommand("bounds", "Print every closed-form bound for the given norms or parameters");
  c_bnd->add_option("--n", bnd.n, "Sequence length");
  c_bnd->add_option("--R", bnd.radius, "Radius");
  c_bnd->add_option("--norm-a", bnd.norm_a, "||A||");
  c_bnd->add_option("--norm-v", bnd.norm_v, "||V||");
  c_bnd->add_option("--norm-q", bnd.norm_q, "||Q|| (biased bounds)");
  c_bnd->add_option("--norm-k", bnd.norm_k, "||K|| (biased bounds)");
  c_bnd->add_option("--bias-q", bnd.bias_q, "|b_Q| (biased bounds)");
  c_bnd->add_option("--gamma", bnd.gamma, "Eigenvalue parameter of the lower bounds");
  c_bnd->add_option("--rho", bnd.rho, "max_i |A x_i|");
  c_bnd->add_option("--r", bnd.r, "max_ij |x_i - x_j|");
  c_bnd->add_option("--params", bnd.params, "Parameter JSON; norms and gamma are computed")->check(CLI::ExistingFile);
  c_bnd->add_option("--input", bnd.input, "Token CSV; n, R, rho and r are measured")->check(CLI::ExistingFile);
  c_bnd->add_option("--out", bnd.out, "Also write the values as JSON");

  AdversarialArgs adv;
  auto* c_adv = app.add_subcommand("adversarial", "Write the tokens a sweep would evaluate at one grid point");
  c_adv->add_option("--generator", adv.generator, "prop32, prop35, section52, quadratic, random_generic, random_ball")
      ->required();
  c_adv->add_option("--variant", adv.variant, "Defaults to weighted for prop35, multi_head for section52");
  c_adv->add_option("--n", adv.n, "Sequence length")->capture_default_str();
  c_adv->add_option("--R", adv.radius, "Radius")->capture_default_str();
  c_adv->add_option("--d", adv.d, "Token dimension")->capture_default_str();
  c_adv->add_option("--k", adv.k, "Head width (0: automatic)")->capture_default_str();
  c_adv->add_option("--H", adv.H, "Head count")->capture_default_str();
  c_adv->add_option("--seed", adv.seed, "Model and data seed")->capture_default_str();
  c_adv->add_option("--out", adv.out, "Token CSV to write")->required();
  c_adv->add_option("--weights-out", adv.weights_out, "Weights file (weighted configurations)");
  c_adv->add_option("--params-out", adv.params_out, "Parameter JSON to write");

  SweepArgs swp;
  auto* c_swp = app.add_subcommand("sweep", "Run a parameter sweep from a JSON config and write CSV");
  c_swp->add_option("--config", swp.config, "Sweep config JSON")->required()->check(CLI::ExistingFile);
  c_swp->add_option("--variant", swp.variant, "Override the config variant");
  c_swp->add_option("--seed", swp.seed, "Replace the config seeds by this one");
  c_swp->add_option("--tol", swp.tol, "Override the power-iteration tolerance");
  c_swp->add_option("--out", swp.out, "Override output_path (empty config path: CSV to stdout)");
  c_swp->add_option("--threads", swp.threads, "Worker threads (0: LIPATTN_THREADS or hardware)");
  c_swp->add_flag("--timing", swp.timing, "Record wall_time_ms (breaks byte-identical reruns)");

  CheckArgs chk;
  auto* c_chk = app.add_subcommand("check", "Run the consistency and bound-validity checks");
  c_chk->add_option("--seed", chk.seed, "Battery seed")->capture_default_str();
  c_chk->add_option("--out", chk.out, "JSON summary path");
  c_chk->add_flag("--masked-mean-field", chk.masked_mean_field,
                  "Also test the masked mean-field ratio, which is known to fail");

  SlopeArgs slp;
  auto* c_slp = app.add_subcommand("slope", "Fit a line to two columns of a sweep CSV");
  c_slp->add_option("--csv", slp.csv, "Sweep CSV")->required()->check(CLI::ExistingFile);
  c_slp->add_option("--x", slp.x, "x column")->capture_default_str();
  c_slp->add_option("--y", slp.y, "y column")->capture_default_str();
  c_slp->add_option("--fit", slp.fit, "loglog (median per x) or linear")->capture_default_str();
  c_slp->add_flag("--sqrt-y", slp.sqrt_y, "Fit sqrt(y) instead of y");
  c_slp->add_option("--out", slp.out, "Also write the fit as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_est->parsed()) return run_estimate(est);
    if (c_bnd->parsed()) return run_bounds(bnd);
    if (c_adv->parsed()) return run_adversarial(adv);
    if (c_swp->parsed()) return run_sweep_command(swp);
    if (c_chk->parsed()) return run_check(chk);
    if (c_slp->parsed()) return run_slope(slp);
  } catch (const ViolationExit& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitViolation;
  } catch (const BoundViolationError& e) {
    std::cerr << "error: bound invariant violated: " << e.what() << '\n';
    return kExitViolation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
