#include "lipattn/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lipattn/error.hpp"
#include "lipattn/linalg.hpp"

namespace lipattn {

namespace {

constexpr double kMassEps = 1e-15;
constexpr double kPositionTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_size(std::size_t points, std::size_t weights) {
  if (points != weights) {
    throw DimensionError("measure has " + std::to_string(points) + " points but " +
                         std::to_string(weights) + " weights");
  }
}

double distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x[i] - y[i];
    s += t * t;
  }
  return std::sqrt(s);
}

// Residual network for the transport problem. Node 0 is the source, nodes
// 1..m are supplies, m+1..m+k are demands, m+k+1 is the sink. Supply-demand
// arcs have unbounded forward capacity and backward capacity equal to the
// current flow on them.
class TransportNetwork {
 public:
  TransportNetwork(const Matrix& cost, std::span<const double> supply, std::span<const double> demand)
      : m_(cost.rows()),
        k_(cost.cols()),
        cost_(cost),
        flow_(cost.rows(), cost.cols()),
        supply_left_(supply.begin(), supply.end()),
        demand_left_(demand.begin(), demand.end()),
        supply_used_(cost.rows(), 0.0),
        demand_used_(cost.cols(), 0.0),
        potential_(m_ + k_ + 2, 0.0) {}

  void solve() {
    while (augment()) {
    }
  }

  const Matrix& flow() const noexcept { return flow_; }

 private:
  std::size_t source() const { return 0; }
  std::size_t sink() const { return m_ + k_ + 1; }
  std::size_t supply_node(std::size_t i) const { return 1 + i; }
  std::size_t demand_node(std::size_t j) const { return 1 + m_ + j; }

  // One Dijkstra pass on reduced costs followed by a bottleneck augmentation.
  bool augment() {
    const std::size_t nodes = m_ + k_ + 2;
    std::vector<double> dist(nodes, kInf);
    std::vector<std::size_t> parent(nodes, nodes);
    std::vector<bool> done(nodes, false);
    dist[source()] = 0.0;

    auto relax = [&](std::size_t u, std::size_t v, double c) {
      const double reduced = std::max(0.0, c + potential_[u] - potential_[v]);
      if (dist[u] + reduced < dist[v]) {
        dist[v] = dist[u] + reduced;
        parent[v] = u;
      }
    };

    for (;;) {
      std::size_t u = nodes;
      double best = kInf;
      for (std::size_t v = 0; v < nodes; ++v) {
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      }
      if (u == nodes) break;
      done[u] = true;
      if (u == source()) {
        for (std::size_t i = 0; i < m_; ++i) {
          if (supply_left_[i] > kMassEps) relax(u, supply_node(i), 0.0);
        }
      } else if (u <= m_) {
        const std::size_t i = u - 1;
        for (std::size_t j = 0; j < k_; ++j) relax(u, demand_node(j), cost_(i, j));
        if (supply_used_[i] > kMassEps) relax(u, source(), 0.0);
      } else if (u < sink()) {
        const std::size_t j = u - 1 - m_;
        for (std::size_t i = 0; i < m_; ++i) {
          if (flow_(i, j) > kMassEps) relax(u, supply_node(i), -cost_(i, j));
        }
        if (demand_left_[j] > kMassEps) relax(u, sink(), 0.0);
      } else {
        for (std::size_t j = 0; j < k_; ++j) {
          if (demand_used_[j] > kMassEps) relax(u, demand_node(j), 0.0);
        }
      }
    }
    if (!std::isfinite(dist[sink()])) return false;

    for (std::size_t v = 0; v < nodes; ++v) {
      potential_[v] += std::isfinite(dist[v]) ? dist[v] : dist[sink()];
    }

    double bottleneck = kInf;
    for (std::size_t v = sink(); v != source(); v = parent[v]) {
      bottleneck = std::min(bottleneck, capacity(parent[v], v));
    }
    if (!(bottleneck > kMassEps)) return false;
    for (std::size_t v = sink(); v != source(); v = parent[v]) push(parent[v], v, bottleneck);
    return true;
  }

  double capacity(std::size_t u, std::size_t v) const {
    if (u == source()) return supply_left_[v - 1];
    if (v == sink()) return demand_left_[u - 1 - m_];
    if (v == source()) return supply_used_[u - 1];
    if (u == sink()) return demand_used_[v - 1 - m_];
    if (u <= m_) return kInf;
    return flow_(v - 1, u - 1 - m_);
  }

  void push(std::size_t u, std::size_t v, double amount) {
    if (u == source()) {
      supply_left_[v - 1] -= amount;
      supply_used_[v - 1] += amount;
    } else if (v == sink()) {
      demand_left_[u - 1 - m_] -= amount;
      demand_used_[u - 1 - m_] += amount;
    } else if (v == source()) {
      supply_left_[u - 1] += amount;
      supply_used_[u - 1] -= amount;
    } else if (u == sink()) {
      demand_left_[v - 1 - m_] += amount;
      demand_used_[v - 1 - m_] -= amount;
    } else if (u <= m_) {
      flow_(u - 1, v - 1 - m_) += amount;
    } else {
      flow_(v - 1, u - 1 - m_) -= amount;
    }
  }

  std::size_t m_;
  std::size_t k_;
  const Matrix& cost_;
  Matrix flow_;
  std::vector<double> supply_left_;
  std::vector<double> demand_left_;
  std::vector<double> supply_used_;
  std::vector<double> demand_used_;
  std::vector<double> potential_;
};

struct PositionGroup {
  double position;
  double mass;
  std::vector<std::size_t> atoms;
};

std::vector<PositionGroup> group_by_position(const OrderedDiscreteMeasure& mu) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu.weights()[i] > 0.0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return mu.positions()[a] < mu.positions()[b];
  });
  std::vector<PositionGroup> groups;
  for (std::size_t i : order) {
    const double s = mu.positions()[i];
    if (groups.empty() || s - groups.back().position > kPositionTol) {
      groups.push_back({s, 0.0, {}});
    }
    groups.back().mass += mu.weights()[i];
    groups.back().atoms.push_back(i);
  }
  return groups;
}

DiscreteMeasure slice(const OrderedDiscreteMeasure& mu, const PositionGroup& g) {
  Matrix points(g.atoms.size(), mu.dim());
  std::vector<double> w(g.atoms.size());
  for (std::size_t r = 0; r < g.atoms.size(); ++r) {
    const auto src = mu.points().row(g.atoms[r]);
    std::copy(src.begin(), src.end(), points.row(r).begin());
    w[r] = mu.weights()[g.atoms[r]];
  }
  return DiscreteMeasure(std::move(points), SimplexWeights::normalized(std::move(w)));
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(Matrix points, SimplexWeights weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  require_same_size(points_.rows(), weights_.size());
  if (points_.empty()) throw DimensionError("measure must have at least one atom");
  if (!points_.all_finite()) throw std::invalid_argument("measure support must be finite");
}

DiscreteMeasure DiscreteMeasure::empirical(const TokenSequence& x) {
  return DiscreteMeasure(x.matrix(), SimplexWeights::uniform(x.size()));
}

DiscreteMeasure DiscreteMeasure::weighted(const TokenSequence& x, SimplexWeights a) {
  return DiscreteMeasure(x.matrix(), std::move(a));
}

OrderedDiscreteMeasure::OrderedDiscreteMeasure(Vector positions, Matrix points, SimplexWeights weights)
    : positions_(std::move(positions)), points_(std::move(points)), weights_(std::move(weights)) {
  require_same_size(points_.rows(), weights_.size());
  if (positions_.size() != points_.rows()) {
    throw DimensionError("ordered measure needs one position per atom");
  }
  if (points_.empty()) throw DimensionError("measure must have at least one atom");
  if (!points_.all_finite()) throw std::invalid_argument("measure support must be finite");
  for (double s : positions_) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("positions must lie in [0, 1]");
  }
}

OrderedDiscreteMeasure OrderedDiscreteMeasure::ord(const TokenSequence& x) {
  const std::size_t n = x.size();
  Vector s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  return ord(x, std::move(s));
}

OrderedDiscreteMeasure OrderedDiscreteMeasure::ord(const TokenSequence& x, Vector positions) {
  for (std::size_t i = 1; i < positions.size(); ++i) {
    if (!(positions[i] > positions[i - 1])) {
      throw std::invalid_argument("ord positions must be strictly increasing");
    }
  }
  return OrderedDiscreteMeasure(std::move(positions), x.matrix(), SimplexWeights::uniform(x.size()));
}

TransportPlan optimal_transport(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  if (mu.dim() != nu.dim()) throw DimensionError("measures live in different dimensions");
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("transport exponent must be finite and >= 1");

  Matrix cost(mu.size(), nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) {
      cost(i, j) = std::pow(distance(mu.points().row(i), nu.points().row(j)), p);
    }
  }
  TransportNetwork net(cost, mu.weights().values(), nu.weights().values());
  net.solve();

  TransportPlan plan{net.flow(), 0.0};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) plan.cost += plan.coupling(i, j) * cost(i, j);
  }
  return plan;
}

double wasserstein_p(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  return std::pow(std::max(0.0, optimal_transport(mu, nu, p).cost), 1.0 / p);
}

double max_coupled_displacement(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const TransportPlan plan = optimal_transport(mu, nu, 2.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) {
      if (plan.coupling(i, j) > kMassEps) {
        worst = std::max(worst, distance(mu.points().row(i), nu.points().row(j)));
      }
    }
  }
  return worst;
}

double conditional_dp(const OrderedDiscreteMeasure& mu, const OrderedDiscreteMeasure& nu, double p) {
  if (mu.dim() != nu.dim()) throw DimensionError("measures live in different dimensions");
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("transport exponent must be finite and >= 1");
  const auto gm = group_by_position(mu);
  const auto gn = group_by_position(nu);
  if (gm.size() != gn.size()) return kInfiniteDistance;
  for (std::size_t t = 0; t < gm.size(); ++t) {
    if (std::abs(gm[t].position - gn[t].position) > kPositionTol ||
        std::abs(gm[t].mass - gn[t].mass) > kPositionTol) {
      return kInfiniteDistance;
    }
  }
  double total = 0.0;
  for (std::size_t t = 0; t < gm.size(); ++t) {
    total += gm[t].mass * optimal_transport(slice(mu, gm[t]), slice(nu, gn[t]), p).cost;
  }
  return std::pow(std::max(0.0, total), 1.0 / p);
}

DiscreteMeasure pushforward_attention(const DiscreteMeasure& mu, const AttentionParams& p) {
  if (!mu.weights().strictly_positive()) {
    throw std::invalid_argument("pushforward needs strictly positive weights");
  }
  const TokenSequence x(mu.points());
  TokenSequence out = weighted_self_attention(x, p, mu.weights());
  return DiscreteMeasure(std::move(out.matrix()), mu.weights());
}

OrderedDiscreteMeasure pushforward_masked_attention(const OrderedDiscreteMeasure& mu, const AttentionParams& p) {
  if (!mu.weights().strictly_positive()) {
    throw std::invalid_argument("pushforward needs strictly positive weights");
  }
  if (mu.dim() != p.model_dim()) throw DimensionError("measure dimension does not match parameters");
  const Matrix& y = mu.points();
  const Matrix& a = p.bilinear();
  const Matrix& v = p.value();
  const std::size_t m = mu.size();

  Matrix out(m, p.head_dim());
  std::vector<double> logits;
  std::vector<double> prefix_weights;
  for (std::size_t i = 0; i < m; ++i) {
    const Vector ax = matvec(a, y.row(i));
    const double s = mu.positions()[i];
    logits.assign(m, 0.0);
    prefix_weights.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      if (mu.positions()[j] <= s) {
        logits[j] = dot(ax, y.row(j));
        prefix_weights[j] = mu.weights()[j];
      }
    }
    const SimplexWeights w = weighted_softmax(logits, SimplexWeights::normalized(prefix_weights));
    Vector mean(mu.dim(), 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      if (w[j] == 0.0) continue;
      const auto yj = y.row(j);
      for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += w[j] * yj[c];
    }
    const Vector vy = matvec(v, mean);
    std::copy(vy.begin(), vy.end(), out.row(i).begin());
  }
  return OrderedDiscreteMeasure(mu.positions(), std::move(out), mu.weights());
}

double measure_variance_norm(const DiscreteMeasure& mu) {
  const std::size_t d = mu.dim();
  Vector mean(d, 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto x = mu.points().row(i);
    for (std::size_t c = 0; c < d; ++c) mean[c] += mu.weights()[i] * x[c];
  }
  Matrix cov(d, d);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto x = mu.points().row(i);
    const double w = mu.weights()[i];
    for (std::size_t r = 0; r < d; ++r) {
      const double dr = x[r] - mean[r];
      for (std::size_t c = 0; c < d; ++c) cov(r, c) += w * dr * (x[c] - mean[c]);
    }
  }
  return spectral_norm(cov);
}

}  // namespace lipattn
