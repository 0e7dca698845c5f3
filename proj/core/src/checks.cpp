#include "lipattn/checks.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lipattn/attention.hpp"
#include "lipattn/bounds.hpp"
#include "lipattn/error.hpp"
#include "lipattn/generators.hpp"
#include "lipattn/jacobian.hpp"
#include "lipattn/linalg.hpp"
#include "lipattn/ot.hpp"
#include "lipattn/spectral.hpp"

namespace lipattn {

namespace {

constexpr double kIdentityTol = 1e-11;
constexpr double kLinkTol = 1e-9;
constexpr double kProbeStep = 1e-4;
constexpr double kProbeCurvature = 100.0;  // allowed c in ratio <= Lip (1 + c h)
constexpr double kCollapseTol = 1e-6;
constexpr double kLargeRadius = 200.0;
constexpr double kRatioSlack = 1e-9;
constexpr double kMinRadius = 0.2;
constexpr double kMaxRadius = 1.0;
constexpr std::uint64_t kMaxModelDraws = 64;

class Tracker {
 public:
  Tracker(std::string name, double tolerance) { metric_.name = std::move(name), metric_.tolerance = tolerance; }

  void record(double value, const CheckInstance& where) {
    ++metric_.instances;
    if (metric_.instances == 1 || value > metric_.worst || std::isnan(value)) {
      metric_.worst = value;
      metric_.where = where;
    }
    if (!(value <= metric_.tolerance)) metric_.passed = false;
  }

  CheckMetric finish() const { return metric_; }

 private:
  CheckMetric metric_;
};

CheckReport assemble(std::string name, std::initializer_list<const Tracker*> trackers) {
  CheckReport r;
  r.name = std::move(name);
  for (const Tracker* t : trackers) {
    r.metrics.push_back(t->finish());
    r.passed = r.passed && r.metrics.back().passed;
  }
  return r;
}

struct Instance {
  CheckInstance id;
  std::mt19937_64 rng;
};

Instance draw_instance(std::uint64_t seed, std::size_t index, std::size_t max_n, std::size_t max_d) {
  const std::uint64_t s = seed_hash({seed, index});
  std::mt19937_64 rng(s);
  std::uniform_int_distribution<std::size_t> pick_n(1, max_n);
  std::uniform_int_distribution<std::size_t> pick_d(1, max_d);
  Instance in{{s, pick_n(rng), pick_d(rng)}, std::move(rng)};
  return in;
}

double max_row_deviation(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += (a(i, c) - b(i, c)) * (a(i, c) - b(i, c));
    worst = std::max(worst, std::sqrt(s));
  }
  return worst;
}

// Copies some rows of x over others so that the sequence has repeats.
TokenSequence with_duplicates(const TokenSequence& x, std::mt19937_64& rng) {
  Matrix m = x.matrix();
  std::uniform_int_distribution<std::size_t> pick(0, m.rows() - 1);
  for (std::size_t t = 0; t < m.rows() / 2 + 1; ++t) {
    const std::size_t from = pick(rng);
    const std::size_t to = pick(rng);
    const auto src = m.row(from);
    std::copy(src.begin(), src.end(), m.row(to).begin());
  }
  return TokenSequence(std::move(m));
}

// The measure m(X) with repeated tokens merged into one atom of summed mass.
DiscreteMeasure merged_empirical(const TokenSequence& x) {
  std::vector<std::size_t> unique;
  std::vector<double> mass;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto row = x[i];
    bool found = false;
    for (std::size_t u = 0; u < unique.size(); ++u) {
      if (std::equal(row.begin(), row.end(), x[unique[u]].begin())) {
        mass[u] += 1.0;
        found = true;
        break;
      }
    }
    if (!found) {
      unique.push_back(i);
      mass.push_back(1.0);
    }
  }
  Matrix pts(unique.size(), x.dim());
  for (std::size_t u = 0; u < unique.size(); ++u) {
    std::copy(x[unique[u]].begin(), x[unique[u]].end(), pts.row(u).begin());
  }
  return DiscreteMeasure(std::move(pts), SimplexWeights::normalized(std::move(mass)));
}

PowerIterationOptions tight_options(std::uint64_t seed) {
  PowerIterationOptions o;
  o.tol = 1e-13;
  o.max_iter = 200000;
  o.seed = seed;
  return o;
}

SimplexWeights random_weights(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> raw(n);
  for (double& v : raw) v = u(rng);
  return SimplexWeights::normalized(std::move(raw));
}

}  // namespace

std::string CheckReport::describe() const {
  std::ostringstream os;
  os.precision(6);
  os << (passed ? "PASS " : "FAIL ") << name << '\n';
  for (const auto& m : metrics) {
    os << "  " << (m.passed ? "ok   " : "FAIL ") << m.name << ": worst " << m.worst << " (tol " << m.tolerance
       << ", " << m.instances << " instances; worst at seed " << m.where.seed << ", n " << m.where.n << ", d "
       << m.where.d << ")\n";
  }
  return os.str();
}

CheckReport check_pushforward_consistency(std::uint64_t seed, std::size_t instances) {
  Tracker unmasked("unmasked pushforward displacement", kIdentityTol);
  Tracker duplicated("repeated-token pushforward displacement", kIdentityTol);
  Tracker masked("masked pushforward displacement", kIdentityTol);
  for (std::size_t i = 0; i < instances; ++i) {
    Instance in = draw_instance(seed, i, 8, 5);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 5)(in.rng);
    const AttentionParams p = random_params(in.id.d, k, 1.0, seed_hash({in.id.seed, 1}));
    const TokenSequence x = random_ball(in.id.n, in.id.d, 2.0, seed_hash({in.id.seed, 2}));

    const DiscreteMeasure lhs = pushforward_attention(DiscreteMeasure::empirical(x), p);
    const DiscreteMeasure rhs = DiscreteMeasure::empirical(self_attention(x, p));
    unmasked.record(max_coupled_displacement(lhs, rhs), in.id);

    const TokenSequence xd = with_duplicates(x, in.rng);
    const DiscreteMeasure lhs_d = pushforward_attention(merged_empirical(xd), p);
    const DiscreteMeasure rhs_d = DiscreteMeasure::empirical(self_attention(xd, p));
    duplicated.record(max_coupled_displacement(lhs_d, rhs_d), in.id);

    const OrderedDiscreteMeasure lhs_m = pushforward_masked_attention(OrderedDiscreteMeasure::ord(x), p);
    const OrderedDiscreteMeasure rhs_m = OrderedDiscreteMeasure::ord(masked_self_attention(x, p));
    const bool same_positions = lhs_m.positions() == rhs_m.positions();
    masked.record(same_positions ? max_row_deviation(lhs_m.points(), rhs_m.points()) : kInfiniteDistance, in.id);
  }
  return assemble("pushforward_consistency", {&unmasked, &duplicated, &masked});
}

CheckReport check_frobenius_wasserstein_link(std::uint64_t seed, std::size_t instances) {
  Tracker link("relative gap between Euclidean and uniform-weight local constants", kLinkTol);
  Tracker probe("finite-difference transport ratio excess (ratio / Lip - 1) / h", kProbeCurvature);
  Tracker identical("identical tokens with V = I: |Lip - 1| (both norms)", kLinkTol);
  for (std::size_t i = 0; i < instances; ++i) {
    Instance in = draw_instance(seed, i, 6, 4);
    const std::size_t n = in.id.n;
    const std::size_t d = in.id.d;
    const AttentionParams p = random_params(d, d, 0.7, seed_hash({in.id.seed, 1}));
    const TokenSequence x = random_ball(n, d, 1.0, seed_hash({in.id.seed, 2}));
    const auto opts = tight_options(seed_hash({in.id.seed, 3}));

    const JacobianOperator j = JacobianOperator::unmasked(x, p);
    const double lip = local_lipschitz(j, opts).lipschitz;
    const JacobianOperator jw = JacobianOperator::weighted(x, p, SimplexWeights::uniform(n));
    const double lip_w = local_lipschitz_weighted(jw, opts).lipschitz;
    link.record(std::abs(lip - lip_w) / std::max(lip, 1e-300), in.id);

    Matrix eps(n, d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : eps.entries()) v = normal(in.rng);
    eps *= 1.0 / eps.frobenius_norm();
    const TokenSequence xh(x.matrix() + kProbeStep * eps);
    const double num = wasserstein_p(DiscreteMeasure::empirical(self_attention(x, p)),
                                     DiscreteMeasure::empirical(self_attention(xh, p)), 2.0);
    const double den = wasserstein_p(DiscreteMeasure::empirical(x), DiscreteMeasure::empirical(xh), 2.0);
    probe.record((num / den / lip - 1.0) / kProbeStep, in.id);

    Matrix a = random_params(d, d, 1.0, seed_hash({in.id.seed, 4})).bilinear();
    const AttentionParams pid = AttentionParams::from_bilinear(a, Matrix::identity(d));
    Matrix same(n, d);
    for (std::size_t r = 0; r < n; ++r) std::copy(x[0].begin(), x[0].end(), same.row(r).begin());
    const TokenSequence xs(std::move(same));
    const double l1 = local_lipschitz(JacobianOperator::unmasked(xs, pid), opts).lipschitz;
    const double l2 =
        local_lipschitz_weighted(JacobianOperator::weighted(xs, pid, SimplexWeights::uniform(n)), opts).lipschitz;
    identical.record(std::max(std::abs(l1 - 1.0), std::abs(l2 - 1.0)), in.id);
  }
  return assemble("frobenius_wasserstein_link", {&link, &probe, &identical});
}

CheckReport check_masked_jacobian_structure(std::uint64_t seed, std::size_t instances) {
  Tracker upper("max |entry| above the block diagonal of the dense masked Jacobian", 0.0);
  Tracker bound("masked local constant / masked bound - 1", kRatioSlack);
  Tracker collapse("large-radius masked attention: max |P - one-hot(prefix argmax)|", kCollapseTol);
  for (std::size_t i = 0; i < instances; ++i) {
    Instance in = draw_instance(seed, i, 8, 5);
    const std::size_t n = in.id.n;
    const std::size_t d = in.id.d;
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 5)(in.rng);
    const AttentionParams p = random_params(d, k, 1.0, seed_hash({in.id.seed, 1}));
    const double radius = std::uniform_real_distribution<double>(0.1, 3.0)(in.rng);
    const TokenSequence x = random_ball(n, d, radius, seed_hash({in.id.seed, 2}));

    const JacobianOperator j = JacobianOperator::masked(x, p);
    const Matrix dense = assemble_dense(j);
    double above = 0.0;
    for (std::size_t bi = 0; bi < n; ++bi) {
      for (std::size_t bj = bi + 1; bj < n; ++bj) {
        for (std::size_t r = 0; r < k; ++r) {
          for (std::size_t c = 0; c < d; ++c) above = std::max(above, std::abs(dense(bi * k + r, bj * d + c)));
        }
      }
    }
    upper.record(above, in.id);

    const double lip = local_lipschitz(j, tight_options(seed_hash({in.id.seed, 3}))).lipschitz;
    const double ub = upper_masked(BoundInputs::from_params(p, n, x.radius()));
    bound.record(lip / ub - 1.0, in.id);

    GenericOptions go;
    go.margin = 1e-3;
    go.masked = true;
    // Models whose score gaps cannot reach the margin are redrawn.
    std::optional<AttentionParams> pa;
    std::optional<GenericConfig> found;
    for (std::uint64_t attempt = 0; !found; ++attempt) {
      pa = random_params(d, d, 1.0, seed_hash({in.id.seed, 4, attempt}));
      try {
        found = random_generic_config(n, d, seed_hash({in.id.seed, 5, attempt}), pa->bilinear(), go);
      } catch (const LimitExceededError&) {
        if (attempt + 1 >= kMaxModelDraws) throw;
      }
    }
    const GenericConfig& g = *found;
    const TokenSequence big(kLargeRadius * g.x.matrix());
    const Matrix pm = masked_attention_matrix(big, *pa);
    double dev = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) dev = std::max(dev, std::abs(pm(r, c) - (c == g.argmax[r] ? 1.0 : 0.0)));
    }
    collapse.record(dev, in.id);
  }
  return assemble("masked_jacobian_structure", {&upper, &bound, &collapse});
}

CheckReport check_mean_field_ratio(std::uint64_t seed, std::size_t instances) {
  Tracker unmasked("W_2 ratio / mean-field bound - 1", kRatioSlack);
  for (std::size_t i = 0; i < instances; ++i) {
    Instance in = draw_instance(seed, i, 6, 3);
    const std::size_t d = in.id.d;
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 3)(in.rng);
    const AttentionParams p = random_params(d, k, 1.0, seed_hash({in.id.seed, 1}));
    const double radius = std::uniform_real_distribution<double>(kMinRadius, kMaxRadius)(in.rng);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 6)(in.rng);
    const BoundInputs bi = BoundInputs::from_params(p, in.id.n, radius);

    const DiscreteMeasure mu(random_ball(in.id.n, d, radius, seed_hash({in.id.seed, 2})).matrix(),
                             random_weights(in.id.n, in.rng));
    const DiscreteMeasure nu(random_ball(m, d, radius, seed_hash({in.id.seed, 3})).matrix(),
                             random_weights(m, in.rng));
    const double w_in = wasserstein_p(mu, nu, 2.0);
    const double w_out = wasserstein_p(pushforward_attention(mu, p), pushforward_attention(nu, p), 2.0);
    unmasked.record(w_in > 0.0 ? w_out / (upper_mean_field(bi) * w_in) - 1.0 : 0.0, in.id);
  }
  return assemble("mean_field_ratio", {&unmasked});
}

CheckReport check_masked_mean_field_ratio(std::uint64_t seed, std::size_t instances) {
  Tracker masked("d_2 ratio / masked mean-field bound - 1", kRatioSlack);
  for (std::size_t i = 0; i < instances; ++i) {
    Instance in = draw_instance(seed, i, 6, 3);
    const std::size_t d = in.id.d;
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 3)(in.rng);
    const AttentionParams p = random_params(d, k, 1.0, seed_hash({in.id.seed, 1}));
    const double radius = std::uniform_real_distribution<double>(kMinRadius, kMaxRadius)(in.rng);
    const BoundInputs bi = BoundInputs::from_params(p, in.id.n, radius);

    // Shared position marginal: each atom gets a position from a small grid
    // so that slices hold several atoms.
    const std::size_t atoms = in.id.n;
    std::uniform_int_distribution<int> slot(1, 3);
    Vector pos(atoms);
    for (double& s : pos) s = slot(in.rng) / 3.0;
    const SimplexWeights w = random_weights(atoms, in.rng);
    const OrderedDiscreteMeasure mb(pos, random_ball(atoms, d, radius, seed_hash({in.id.seed, 4})).matrix(), w);
    const OrderedDiscreteMeasure nb(pos, random_ball(atoms, d, radius, seed_hash({in.id.seed, 5})).matrix(), w);
    const double c_in = conditional_dp(mb, nb, 2.0);
    const double c_out =
        conditional_dp(pushforward_masked_attention(mb, p), pushforward_masked_attention(nb, p), 2.0);
    masked.record(c_in > 0.0 ? c_out / (upper_masked_mean_field(bi) * c_in) - 1.0 : 0.0, in.id);
  }
  return assemble("masked_mean_field_ratio", {&masked});
}

std::vector<CheckReport> run_all_checks(std::uint64_t seed) {
  return {check_pushforward_consistency(seed), check_frobenius_wasserstein_link(seed),
          check_masked_jacobian_structure(seed), check_mean_field_ratio(seed)};
}

std::string checks_to_json(std::span<const CheckReport> reports) {
  using nlohmann::json;
  json out;
  bool all = true;
  json arr = json::array();
  for (const auto& r : reports) {
    all = all && r.passed;
    json metrics = json::array();
    for (const auto& m : r.metrics) {
      metrics.push_back({{"name", m.name},
                         {"passed", m.passed},
                         {"worst", m.worst},
                         {"tolerance", m.tolerance},
                         {"instances", m.instances},
                         {"worst_instance", {{"seed", m.where.seed}, {"n", m.where.n}, {"d", m.where.d}}}});
    }
    arr.push_back({{"name", r.name}, {"passed", r.passed}, {"metrics", metrics}});
  }
  out["passed"] = all;
  out["checks"] = arr;
  return out.dump(2);
}

}  // namespace lipattn
