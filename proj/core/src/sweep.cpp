#include "lipattn/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lipattn/bounds.hpp"
#include "lipattn/error.hpp"
#include "lipattn/generators.hpp"
#include "lipattn/jacobian.hpp"
#include "lipattn/linalg.hpp"
#include "lipattn/spectral.hpp"

namespace lipattn {

namespace {

constexpr std::pair<SweepVariant, std::string_view> kVariantNames[] = {
    {SweepVariant::Unmasked, "unmasked"}, {SweepVariant::Masked, "masked"},
    {SweepVariant::MultiHead, "multi_head"}, {SweepVariant::Weighted, "weighted"},
    {SweepVariant::Biased, "biased"},
};

constexpr std::pair<SweepGenerator, std::string_view> kGeneratorNames[] = {
    {SweepGenerator::Prop32, "prop32"},       {SweepGenerator::Prop35, "prop35"},
    {SweepGenerator::Section52, "section52"}, {SweepGenerator::Quadratic, "quadratic"},
    {SweepGenerator::RandomGeneric, "random_generic"}, {SweepGenerator::RandomBall, "random_ball"},
};

constexpr std::string_view kHeader =
    "variant,generator,n,R,d,seed,measured_lipschitz,converged,iterations,bound_general,bound_rho_r,"
    "bound_mean_field,bound_masked,lower_prop32,gamma_diagnostic,wall_time_ms";
constexpr std::size_t kColumns = 16;

constexpr std::size_t kParamAttempts = 256;
constexpr double kViolationSlack = 1e-9;

std::size_t head_width(const SweepConfig& cfg) {
  if (cfg.k != 0) return cfg.k;
  return cfg.variant == SweepVariant::MultiHead ? cfg.d / cfg.H : cfg.d;
}

bool needs_real_spectrum(SweepGenerator g) {
  return g == SweepGenerator::Prop32 || g == SweepGenerator::Prop35 || g == SweepGenerator::Section52;
}

struct Model {
  std::optional<AttentionParams> single;
  std::optional<MultiHeadParams> multi;
  std::size_t adversarial_head = 0;
};

// Parameters depend on the replicate seed only. Generators built on an
// eigenvector redraw until A has a real eigenvalue; for multi-head models the
// adversarial head is the one with the largest gamma.
Model build_model(const SweepConfig& cfg, std::uint64_t seed) {
  Model m;
  const std::size_t k = head_width(cfg);
  if (cfg.generator == SweepGenerator::Quadratic) {
    const Matrix id = Matrix::identity(cfg.d);
    m.single = AttentionParams::from_bilinear(id, id);
    return m;
  }
  for (std::size_t attempt = 0; attempt < kParamAttempts; ++attempt) {
    const std::uint64_t s = seed_hash({seed, 1, attempt});
    if (cfg.variant == SweepVariant::MultiHead) {
      MultiHeadParams mp = random_multi_head(cfg.d, cfg.H, 1.0, s);
      std::optional<double> best;
      for (std::size_t h = 0; h < mp.head_count(); ++h) {
        const auto g = lower_bound_gamma(real_eigenpairs(mp.head(h).bilinear()));
        if (g && (!best || *g > *best)) {
          best = g;
          m.adversarial_head = h;
        }
      }
      if (best || !needs_real_spectrum(cfg.generator)) {
        m.multi = std::move(mp);
        return m;
      }
    } else {
      AttentionParams p = random_params(cfg.d, k, 1.0, s, cfg.variant == SweepVariant::Biased);
      if (!needs_real_spectrum(cfg.generator) || !real_eigenpairs(p.bilinear()).empty_flag) {
        m.single = std::move(p);
        return m;
      }
    }
  }
  throw LimitExceededError("no parameter draw with a real eigenvalue for seed " + std::to_string(seed));
}

struct PointInput {
  TokenSequence x;
  std::optional<SimplexWeights> weights;
};

SimplexWeights random_simplex(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> raw(n);
  for (double& v : raw) v = expo(rng) + 1e-3;
  return SimplexWeights::normalized(std::move(raw));
}

PointInput generate(const SweepConfig& cfg, const Model& m, std::size_t n, double radius, std::uint64_t seed) {
  PointInput in;
  switch (cfg.generator) {
    case SweepGenerator::Prop32:
      in.x = prop32_config(*m.single, radius, n).x;
      break;
    case SweepGenerator::Prop35: {
      AdversarialConfig c = prop35_weighted_config(*m.single, radius);
      in.x = std::move(c.x);
      in.weights = std::move(c.weights);
      break;
    }
    case SweepGenerator::Section52:
      in.x = section52_adversarial(*m.multi, m.adversarial_head, radius, n).x;
      break;
    case SweepGenerator::Quadratic:
      in.x = quadratic_growth_config(radius, n, cfg.d);
      break;
    case SweepGenerator::RandomGeneric: {
      GenericOptions opts;
      opts.masked = cfg.variant == SweepVariant::Masked;
      Matrix x = random_generic_config(n, cfg.d, seed, m.single->bilinear(), opts).x.matrix();
      x *= radius;
      in.x = TokenSequence(std::move(x));
      break;
    }
    case SweepGenerator::RandomBall:
      in.x = random_ball(n, cfg.d, radius, seed);
      break;
  }
  if (cfg.variant == SweepVariant::Weighted && !in.weights) {
    in.weights = random_simplex(n, seed_hash({seed, 7}));
  }
  return in;
}

std::uint64_t point_seed_of(std::uint64_t seed, std::size_t n, double radius, std::size_t replicate) {
  return seed_hash({seed, n, seed_bits(radius), replicate});
}

SweepRecord evaluate(const SweepConfig& cfg, const Model& m, std::size_t n, double radius, std::uint64_t seed,
                     std::size_t replicate) {
  const std::uint64_t point_seed = point_seed_of(seed, n, radius, replicate);
  SweepRecord rec;
  rec.variant = std::string(to_string(cfg.variant));
  rec.generator = std::string(to_string(cfg.generator));
  rec.n = n;
  rec.R = radius;
  rec.d = cfg.d;
  rec.seed = seed;

  PointInput in = generate(cfg, m, n, radius, point_seed);
  rec.n = in.x.size();
  const double actual_radius = in.x.radius();
  PowerIterationOptions po;
  po.tol = cfg.tol;
  po.max_iter = cfg.max_iter;
  po.seed = seed_hash({point_seed, 3});

  PowerIterationResult res;
  if (cfg.variant == SweepVariant::MultiHead) {
    const MultiHeadParams& mp = *m.multi;
    res = multi_head_local_lipschitz(in.x, mp, po);
    std::vector<double> per_head;
    std::vector<double> proj;
    for (std::size_t h = 0; h < mp.head_count(); ++h) {
      per_head.push_back(upper_general(BoundInputs::from_params(mp.head(h), rec.n, actual_radius)));
      proj.push_back(spectral_norm(mp.projection(h)));
    }
    rec.bound_general = upper_multi_head(per_head, proj);
    rec.gamma_diagnostic = gamma_diagnostic(mp.head(m.adversarial_head), in.x);
  } else {
    const AttentionParams& p = *m.single;
    BoundInputs bi = BoundInputs::from_params(p, rec.n, actual_radius);
    switch (cfg.variant) {
      case SweepVariant::Unmasked: {
        res = local_lipschitz(JacobianOperator::unmasked(in.x, p), po);
        rec.bound_general = upper_general(bi);
        const RhoR rr = measure_rho_r(in.x, p.bilinear());
        bi.rho = rr.rho;
        bi.r = rr.r;
        rec.bound_rho_r = upper_rho_r(bi);
        rec.bound_mean_field = upper_mean_field(bi);
        if (const auto g = lower_bound_gamma(real_eigenpairs(p.bilinear()))) {
          rec.lower_prop32 = lower_prop32(rec.n, radius, *g);
        }
        break;
      }
      case SweepVariant::Masked:
        res = local_lipschitz(JacobianOperator::masked(in.x, p), po);
        rec.bound_general = upper_general(bi);
        rec.bound_masked = upper_masked(bi);
        rec.bound_mean_field = upper_masked_mean_field(bi);
        break;
      case SweepVariant::Weighted:
        res = local_lipschitz_weighted(JacobianOperator::weighted(in.x, p, *in.weights), po);
        rec.bound_mean_field = upper_mean_field(bi);
        break;
      case SweepVariant::Biased:
        res = local_lipschitz(JacobianOperator::biased(in.x, p), po);
        break;
      case SweepVariant::MultiHead:
        break;
    }
    rec.gamma_diagnostic = gamma_diagnostic(p, in.x);
  }
  rec.measured_lipschitz = res.lipschitz;
  rec.converged = res.converged;
  rec.iterations = res.iterations;
  return rec;
}

void check_bound(const SweepRecord& r) {
  if (!r.converged || !r.bound_general) return;
  if (r.measured_lipschitz > *r.bound_general * (1.0 + kViolationSlack)) {
    std::ostringstream os;
    os.precision(17);
    os << "measured Lipschitz " << r.measured_lipschitz << " exceeds bound_general " << *r.bound_general
       << " (variant " << r.variant << ", generator " << r.generator << ", n " << r.n << ", R " << r.R
       << ", d " << r.d << ", seed " << r.seed << ")";
    throw BoundViolationError(os.str());
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

double parse_double(std::string_view s, std::string_view column) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + std::string(s) + "' in column " + std::string(column));
  }
  return v;
}

template <typename T>
T parse_unsigned(std::string_view s, std::string_view column) {
  T v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad integer '" + std::string(s) + "' in column " + std::string(column));
  }
  return v;
}

std::optional<double> parse_optional(std::string_view s, std::string_view column) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, column);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(SweepVariant v) noexcept {
  for (const auto& [value, name] : kVariantNames) {
    if (value == v) return name;
  }
  return "unknown";
}

std::string_view to_string(SweepGenerator g) noexcept {
  for (const auto& [value, name] : kGeneratorNames) {
    if (value == g) return name;
  }
  return "unknown";
}

std::optional<SweepVariant> parse_variant(std::string_view name) noexcept {
  for (const auto& [value, n] : kVariantNames) {
    if (n == name) return value;
  }
  return std::nullopt;
}

std::optional<SweepGenerator> parse_generator(std::string_view name) noexcept {
  for (const auto& [value, n] : kGeneratorNames) {
    if (n == name) return value;
  }
  return std::nullopt;
}

void SweepConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("sweep config: " + msg); };
  if (n_grid.empty()) fail("n_grid is empty");
  if (R_grid.empty()) fail("R_grid is empty");
  if (seeds.empty()) fail("seeds is empty");
  if (d == 0) fail("d must be positive");
  if (!(tol > 0.0)) fail("tol must be positive");
  if (max_iter == 0) fail("max_iter must be positive");
  for (double r : R_grid) {
    if (!(r >= 0.0) || !std::isfinite(r)) fail("radii must be finite and nonnegative");
  }
  for (std::size_t n : n_grid) {
    if (n == 0) fail("sequence lengths must be positive");
  }
  if (variant == SweepVariant::MultiHead) {
    if (H == 0 || d % H != 0) fail("H must divide d");
    if (k != 0 && k != d / H) fail("k must equal d / H for multi_head");
  } else if (H != 1) {
    fail("H must be 1 for single-head variants");
  }
  const std::size_t min_n = [&] {
    switch (generator) {
      case SweepGenerator::Prop32:
      case SweepGenerator::Section52:
        return std::size_t{2};
      case SweepGenerator::Quadratic:
        return std::size_t{3};
      default:
        return std::size_t{1};
    }
  }();
  for (std::size_t n : n_grid) {
    if (n < min_n) fail("generator " + std::string(to_string(generator)) + " needs n >= " + std::to_string(min_n));
  }
  switch (generator) {
    case SweepGenerator::Prop32:
      if (variant == SweepVariant::MultiHead) fail("prop32 needs a single-head variant");
      break;
    case SweepGenerator::Prop35:
      if (variant != SweepVariant::Weighted) fail("prop35 needs the weighted variant");
      for (std::size_t n : n_grid) {
        if (n != 2) fail("prop35 builds two atoms; n_grid must be [2]");
      }
      break;
    case SweepGenerator::Section52:
      if (variant != SweepVariant::MultiHead) fail("section52 needs the multi_head variant");
      break;
    case SweepGenerator::Quadratic:
      if (variant == SweepVariant::MultiHead || variant == SweepVariant::Biased) {
        fail("quadratic uses A = V = I and needs unmasked, masked or weighted");
      }
      if (k != 0 && k != d) fail("quadratic needs k = d");
      break;
    case SweepGenerator::RandomGeneric:
      if (variant == SweepVariant::MultiHead || variant == SweepVariant::Biased) {
        fail("random_generic needs an unbiased single-head variant");
      }
      break;
    case SweepGenerator::RandomBall:
      break;
  }
}

SweepConfig parse_sweep_config(std::string_view json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("sweep config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("sweep config: top level must be an object");

  static const std::set<std::string> known = {"variant", "n_grid", "R_grid", "d",        "k",  "H",
                                              "seeds",   "generator", "tol", "max_iter", "output_path"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("sweep config: unknown key '" + key + "'");
  }
  for (const char* key : {"variant", "n_grid", "R_grid", "d", "seeds", "generator"}) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("sweep config: missing key '") + key + "'");
  }

  SweepConfig cfg;
  try {
    const auto variant = parse_variant(j.at("variant").get<std::string>());
    if (!variant) throw std::invalid_argument("sweep config: unknown variant");
    cfg.variant = *variant;
    const auto generator = parse_generator(j.at("generator").get<std::string>());
    if (!generator) throw std::invalid_argument("sweep config: unknown generator");
    cfg.generator = *generator;
    cfg.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
    cfg.R_grid = j.at("R_grid").get<std::vector<double>>();
    cfg.d = j.at("d").get<std::size_t>();
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("k")) cfg.k = j.at("k").get<std::size_t>();
    if (j.contains("H")) cfg.H = j.at("H").get<std::size_t>();
    if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
    if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<std::size_t>();
    if (j.contains("output_path")) cfg.output_path = j.at("output_path").get<std::string>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("sweep config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

SweepConfig load_sweep_config(const std::string& path) { return parse_sweep_config(read_file(path)); }

std::size_t default_thread_count() {
  if (const char* env = std::getenv("LIPATTN_THREADS")) {
    std::size_t v = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, const SweepOptions& opts) {
  cfg.validate();
  std::vector<Model> models;
  models.reserve(cfg.seeds.size());
  for (std::uint64_t s : cfg.seeds) models.push_back(build_model(cfg, s));

  struct Task {
    std::size_t n;
    double radius;
    std::size_t replicate;
  };
  std::vector<Task> tasks;
  for (std::size_t n : cfg.n_grid) {
    for (double r : cfg.R_grid) {
      for (std::size_t i = 0; i < cfg.seeds.size(); ++i) tasks.push_back({n, r, i});
    }
  }

  std::vector<SweepRecord> records(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      try {
        const Task& task = tasks[t];
        const auto start = std::chrono::steady_clock::now();
        SweepRecord rec =
            evaluate(cfg, models[task.replicate], task.n, task.radius, cfg.seeds[task.replicate], task.replicate);
        if (opts.record_timing) {
          rec.wall_time_ms =
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
        records[t] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(tasks.size());
        return;
      }
    }
  };

  const std::size_t threads = std::min(tasks.size(), opts.threads ? opts.threads : default_thread_count());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::stable_sort(records.begin(), records.end(), [](const SweepRecord& a, const SweepRecord& b) {
    if (a.n != b.n) return a.n < b.n;
    if (a.R != b.R) return a.R < b.R;
    return a.seed < b.seed;
  });
  for (const auto& r : records) check_bound(r);
  return records;
}

SweepPoint sweep_point(const SweepConfig& cfg, std::size_t n, double radius, std::size_t replicate) {
  cfg.validate();
  const std::uint64_t seed = cfg.seeds.at(replicate);
  Model m = build_model(cfg, seed);
  PointInput in = generate(cfg, m, n, radius, point_seed_of(seed, n, radius, replicate));
  SweepPoint pt{std::move(in.x), std::move(in.weights), std::move(m.single), std::move(m.multi),
                m.adversarial_head};
  return pt;
}

std::string_view csv_header() noexcept { return kHeader; }

std::string emit_csv(std::span<const SweepRecord> records) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& r : records) {
    out += r.variant + ',' + r.generator + ',' + std::to_string(r.n) + ',' + format_double(r.R) + ',' +
           std::to_string(r.d) + ',' + std::to_string(r.seed) + ',' + format_double(r.measured_lipschitz) + ',' +
           (r.converged ? "true" : "false") + ',' + std::to_string(r.iterations) + ',' +
           format_optional(r.bound_general) + ',' + format_optional(r.bound_rho_r) + ',' +
           format_optional(r.bound_mean_field) + ',' + format_optional(r.bound_masked) + ',' +
           format_optional(r.lower_prop32) + ',' + format_optional(r.gamma_diagnostic) + ',' +
           format_double(r.wall_time_ms) + '\n';
  }
  return out;
}

std::vector<SweepRecord> parse_csv(std::string_view text) {
  std::vector<SweepRecord> out;
  bool header_seen = false;
  std::size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kHeader) throw std::invalid_argument("CSV header does not match the sweep schema");
      header_seen = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != kColumns) {
      throw std::invalid_argument("CSV line " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                                  " fields, expected " + std::to_string(kColumns));
    }
    SweepRecord r;
    r.variant = std::string(f[0]);
    r.generator = std::string(f[1]);
    r.n = parse_unsigned<std::size_t>(f[2], "n");
    r.R = parse_double(f[3], "R");
    r.d = parse_unsigned<std::size_t>(f[4], "d");
    r.seed = parse_unsigned<std::uint64_t>(f[5], "seed");
    r.measured_lipschitz = parse_double(f[6], "measured_lipschitz");
    if (f[7] == "true") {
      r.converged = true;
    } else if (f[7] == "false") {
      r.converged = false;
    } else {
      throw std::invalid_argument("bad boolean in column converged");
    }
    r.iterations = parse_unsigned<std::size_t>(f[8], "iterations");
    r.bound_general = parse_optional(f[9], "bound_general");
    r.bound_rho_r = parse_optional(f[10], "bound_rho_r");
    r.bound_mean_field = parse_optional(f[11], "bound_mean_field");
    r.bound_masked = parse_optional(f[12], "bound_masked");
    r.lower_prop32 = parse_optional(f[13], "lower_prop32");
    r.gamma_diagnostic = parse_optional(f[14], "gamma_diagnostic");
    r.wall_time_ms = parse_double(f[15], "wall_time_ms");
    out.push_back(std::move(r));
  }
  if (!header_seen) throw std::invalid_argument("CSV is empty");
  return out;
}

void write_csv(const std::string& path, std::span<const SweepRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << emit_csv(records);
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<SweepRecord> read_csv(const std::string& path) { return parse_csv(read_file(path)); }

std::optional<double> record_field(const SweepRecord& r, std::string_view name) {
  if (name == "n") return static_cast<double>(r.n);
  if (name == "R") return r.R;
  if (name == "d") return static_cast<double>(r.d);
  if (name == "seed") return static_cast<double>(r.seed);
  if (name == "measured_lipschitz") return r.measured_lipschitz;
  if (name == "converged") return r.converged ? 1.0 : 0.0;
  if (name == "iterations") return static_cast<double>(r.iterations);
  if (name == "bound_general") return r.bound_general;
  if (name == "bound_rho_r") return r.bound_rho_r;
  if (name == "bound_mean_field") return r.bound_mean_field;
  if (name == "bound_masked") return r.bound_masked;
  if (name == "lower_prop32") return r.lower_prop32;
  if (name == "gamma_diagnostic") return r.gamma_diagnostic;
  if (name == "wall_time_ms") return r.wall_time_ms;
  throw std::invalid_argument("no numeric column named '" + std::string(name) + "'");
}

LinearFit fit_linear(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("fit_linear: x and y differ in length");
  if (x.size() < 2) throw std::invalid_argument("fit_linear needs at least 2 points");
  const double m = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_linear needs at least 2 distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += e * e;
  }
  fit.r_squared = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

LinearFit fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("fit_loglog_slope: x and y differ in length");
  if (x.size() < 3) throw std::invalid_argument("fit_loglog_slope needs at least 3 points");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("fit_loglog_slope: values must be positive");
    pts.emplace_back(x[i], y[i]);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < pts.size();) {
    std::size_t j = i;
    std::vector<double> group;
    while (j < pts.size() && pts[j].first == pts[i].first) group.push_back(pts[j++].second);
    lx.push_back(std::log(pts[i].first));
    ly.push_back(std::log(median(std::move(group))));
    i = j;
  }
  return fit_linear(lx, ly);
}

LinearFit fit_loglog_slope(std::span<const SweepRecord> records, std::string_view x_field, std::string_view y_field) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& r : records) {
    const auto xv = record_field(r, x_field);
    const auto yv = record_field(r, y_field);
    if (xv && yv) {
      x.push_back(*xv);
      y.push_back(*yv);
    }
  }
  return fit_loglog_slope(x, y);
}

}  // namespace lipattn
