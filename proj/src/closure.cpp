#include "fanova/closure.hpp"

#include "fanova/error.hpp"

#include <algorithm>
#include <bit>
#include <memory>
#include <numeric>
#include <unordered_set>

namespace fanova {

std::string node_label(NodeMask node, std::size_t m) {
  std::vector<std::string> parts;
  bool wide = m >= 10;
  for (std::size_t i = 0; i < m; ++i) {
    if (node & (NodeMask{1} << i)) parts.push_back(std::to_string(i + 1));
  }
  std::string out = "H";
  if (wide) out += "{";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (wide && i > 0) out += ",";
    out += parts[i];
  }
  if (wide) out += "}";
  return out;
}

NodePFunction permutation_node_p(const NullStatMatrix& nulls, PValueRule rule) {
  auto shared = std::make_shared<const NullStatMatrix>(nulls);
  return [shared, rule](NodeMask node) {
    const auto m = static_cast<Eigen::Index>(shared->intervals());
    double observed = 0.0;
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(shared->stats.rows());
    for (Eigen::Index i = 0; i < m; ++i) {
      if (node & (NodeMask{1} << i)) {
        observed += shared->observed(i);
        sums += shared->stats.col(i);
      }
    }
    return p_value(observed, sums, rule);
  };
}

NodePFunction monotone_node_p(std::span<const double> observed, std::function<double(double)> survival) {
  std::vector<double> stats(observed.begin(), observed.end());
  return [stats = std::move(stats), survival = std::move(survival)](NodeMask node) {
    double sum = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i) {
      if (node & (NodeMask{1} << i)) sum += stats[i];
    }
    return survival(sum);
  };
}

NodeEvaluator::NodeEvaluator(std::size_t m, NodePFunction fn) : m_(m), fn_(std::move(fn)) {
  if (m == 0 || m > 63) throw ValidationError("number of hypotheses must be between 1 and 63");
}

double NodeEvaluator::p_value(NodeMask node) {
  if (node == 0 || (node & ~full_mask(m_)) != 0) throw std::invalid_argument("node outside the closure set");
  if (const auto it = cache_.find(node); it != cache_.end()) return it->second;
  double p = 0.0;
  if (const auto ov = overrides_.find(node); ov != overrides_.end()) {
    p = ov->second;
  } else {
    p = fn_(node);
  }
  cache_.emplace(node, p);
  return p;
}

double NodeEvaluator::base_p(NodeMask node) {
  if (!overrides_.count(node)) return p_value(node);
  if (const auto it = base_cache_.find(node); it != base_cache_.end()) return it->second;
  const double p = fn_(node);
  base_cache_.emplace(node, p);
  return p;
}

void NodeEvaluator::override_p(NodeMask node, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("overriding p-value must lie in (0, 1]");
  overrides_[node] = p;
  if (const auto it = cache_.find(node); it != cache_.end()) it->second = p;
}

std::string to_string(ClosureMethod method) {
  switch (method) {
    case ClosureMethod::full: return "full";
    case ClosureMethod::shortcut_stat: return "shortcut_stat";
    case ClosureMethod::shortcut_p: return "shortcut_p";
    case ClosureMethod::combined: return "combined";
  }
  return "combined";
}

ClosureMethod parse_closure_method(const std::string& text) {
  if (text == "full") return ClosureMethod::full;
  if (text == "shortcut" || text == "shortcut_stat") return ClosureMethod::shortcut_stat;
  if (text == "shortcut_p") return ClosureMethod::shortcut_p;
  if (text == "combined") return ClosureMethod::combined;
  throw ValidationError("unknown closure method '" + text + "' (full|shortcut|shortcut_p|combined)");
}

namespace {

NodeMask bit(std::size_t i) { return NodeMask{1} << i; }

void check_size(std::span<const double> observed, const NodeEvaluator& nodes) {
  if (observed.size() != nodes.size()) throw ValidationError("statistics and closure set differ in size");
}

ClosureReport make_report(ClosureMethod method, std::span<const double> observed, NodeEvaluator& nodes,
                          const std::vector<double>& adjusted, const std::vector<NodeMask>& achieving) {
  const std::size_t m = observed.size();
  ClosureReport report;
  report.method = method;
  report.m = m;
  for (std::size_t i = 0; i < m; ++i) {
    AdjustedHypothesis h;
    h.name = node_label(bit(i), m);
    h.raw_p = nodes.base_p(bit(i));
    h.adjusted_p = adjusted[i];
    h.achieving_node = achieving[i];
    report.hypotheses.push_back(std::move(h));
  }
  report.global_p = nodes.p_value(full_mask(m));
  report.node_evaluations = nodes.distinct_evaluations();
  return report;
}

ShortcutPass run_pass(std::vector<std::size_t> order, NodeEvaluator& nodes) {
  const std::size_t m = order.size();
  ShortcutPass pass;
  pass.order = std::move(order);
  pass.adjusted.assign(m, 0.0);
  pass.achieving.assign(m, 0);

  std::unordered_set<NodeMask> touched;
  auto p_of = [&](NodeMask node) {
    touched.insert(node);
    return nodes.p_value(node);
  };

  // prefix[r] = {(0), ..., (r)}
  std::vector<NodeMask> prefix(m);
  NodeMask acc = 0;
  for (std::size_t r = 0; r < m; ++r) prefix[r] = acc |= bit(pass.order[r]);

  for (std::size_t r = m; r-- > 0;) {
    const std::size_t h = pass.order[r];
    NodeMask node = bit(h);
    double best = p_of(node);
    NodeMask best_node = node;
    for (std::size_t s = 0; s < r; ++s) {
      node |= bit(pass.order[s]);
      const double p = p_of(node);
      if (p > best) best = p, best_node = node;
    }
    for (std::size_t j = r + 1; j < m; ++j) {
      const double p = p_of(prefix[j]);
      if (p > best) best = p, best_node = prefix[j];
    }
    pass.adjusted[h] = best;
    pass.achieving[h] = best_node;
  }
  pass.node_evaluations = touched.size();
  return pass;
}

}  // namespace

ClosureReport full_closure(std::span<const double> observed, NodeEvaluator& nodes, std::size_t cap) {
  check_size(observed, nodes);
  const std::size_t m = observed.size();
  if (m > cap || m > 30) {
    throw ValidationError("full closure over " + std::to_string(m) + " hypotheses exceeds the cap of " +
                          std::to_string(std::min<std::size_t>(cap, 30)) + "; use the shortcut or combined method");
  }
  std::vector<double> adjusted(m, -1.0);
  std::vector<NodeMask> achieving(m, 0);
  const NodeMask top = full_mask(m);
  for (NodeMask node = 1; node <= top; ++node) {
    const double p = nodes.p_value(node);
    for (std::size_t i = 0; i < m; ++i) {
      if ((node & bit(i)) && p > adjusted[i]) {
        adjusted[i] = p;
        achieving[i] = node;
      }
    }
  }
  return make_report(ClosureMethod::full, observed, nodes, adjusted, achieving);
}

ShortcutPass shortcut_stat_ordered(std::span<const double> observed, NodeEvaluator& nodes) {
  check_size(observed, nodes);
  std::vector<std::size_t> order(observed.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return observed[a] < observed[b]; });
  return run_pass(std::move(order), nodes);
}

ShortcutPass shortcut_p_ordered(std::span<const double> observed, NodeEvaluator& nodes) {
  check_size(observed, nodes);
  std::vector<double> raw(observed.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = nodes.base_p(bit(i));
  std::vector<std::size_t> order(observed.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a] > raw[b]; });
  return run_pass(std::move(order), nodes);
}

ClosureReport shortcut_report(std::span<const double> observed, NodeEvaluator& nodes, ClosureMethod method) {
  ShortcutPass pass = method == ClosureMethod::shortcut_p ? shortcut_p_ordered(observed, nodes)
                                                          : shortcut_stat_ordered(observed, nodes);
  return make_report(method == ClosureMethod::shortcut_p ? method : ClosureMethod::shortcut_stat, observed, nodes,
                     pass.adjusted, pass.achieving);
}

ClosureReport combined_shortcut(std::span<const double> observed, NodeEvaluator& nodes) {
  const ShortcutPass by_stat = shortcut_stat_ordered(observed, nodes);
  const ShortcutPass by_p = shortcut_p_ordered(observed, nodes);
  std::vector<double> adjusted(observed.size());
  std::vector<NodeMask> achieving(observed.size());
  for (std::size_t i = 0; i < adjusted.size(); ++i) {
    if (by_p.adjusted[i] > by_stat.adjusted[i]) {
      adjusted[i] = by_p.adjusted[i];
      achieving[i] = by_p.achieving[i];
    } else {
      adjusted[i] = by_stat.adjusted[i];
      achieving[i] = by_stat.achieving[i];
    }
  }
  return make_report(ClosureMethod::combined, observed, nodes, adjusted, achieving);
}

ClosureReport adjust(std::span<const double> observed, NodeEvaluator& nodes, ClosureMethod method,
                     std::size_t full_cap) {
  switch (method) {
    case ClosureMethod::full: return full_closure(observed, nodes, full_cap);
    case ClosureMethod::combined: return combined_shortcut(observed, nodes);
    default: return shortcut_report(observed, nodes, method);
  }
}

ClosureReport adjust_intervals(const NullStatMatrix& nulls, ClosureMethod method, std::optional<double> top_override,
                               PValueRule rule, std::size_t full_cap) {
  NodeEvaluator nodes(nulls.intervals(), permutation_node_p(nulls, rule));
  if (top_override) nodes.override_p(full_mask(nulls.intervals()), *top_override);
  const std::span<const double> observed(nulls.observed.data(), nulls.intervals());
  return adjust(observed, nodes, method, full_cap);
}

}  // namespace fanova
