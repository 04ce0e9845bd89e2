#include "smoothsr/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_set>

namespace smoothsr {

namespace {

constexpr double kDivGuard = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Op parse_op(const std::string& name) {
  if (name == "add") return Op::add;
  if (name == "mul") return Op::mul;
  if (name == "sub") return Op::sub;
  if (name == "div") return Op::div;
  throw std::invalid_argument("unknown operator '" + name +
                              "' (valid: add, mul, sub, div)");
}

const char* op_name(Op op) {
  switch (op) {
    case Op::add: return "add";
    case Op::mul: return "mul";
    case Op::sub: return "sub";
    case Op::div: return "div";
  }
  return "?";
}

const char* op_symbol(Op op) {
  switch (op) {
    case Op::add: return "+";
    case Op::mul: return "*";
    case Op::sub: return "-";
    case Op::div: return "/";
  }
  return "?";
}

double apply_op(Op op, double a, double b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::mul: return a * b;
    case Op::sub: return a - b;
    case Op::div: return std::abs(b) > kDivGuard ? a / b : 1.0;
  }
  return 0.0;
}

double fold_op(Op op, std::span<const double> terms) {
  if (terms.empty()) return 0.0;
  double acc = terms[0];
  switch (op) {
    case Op::add:
      for (std::size_t i = 1; i < terms.size(); ++i) acc += terms[i];
      break;
    case Op::mul:
      for (std::size_t i = 1; i < terms.size(); ++i) acc *= terms[i];
      break;
    case Op::sub:
      for (std::size_t i = 1; i < terms.size(); ++i) acc -= terms[i];
      break;
    case Op::div:
      for (std::size_t i = 1; i < terms.size(); ++i)
        acc = apply_op(Op::div, acc, terms[i]);
      break;
  }
  return acc;
}

LeafMode parse_leaf_mode(const std::string& name) {
  if (name == "op_fold") return LeafMode::op_fold;
  if (name == "linear") return LeafMode::linear;
  throw std::invalid_argument("unknown leaf mode '" + name +
                              "' (valid: op_fold, linear)");
}

const char* leaf_mode_name(LeafMode mode) {
  return mode == LeafMode::op_fold ? "op_fold" : "linear";
}

void TreeConfig::validate() const {
  if (depth < 1 || depth > 24)
    throw std::invalid_argument("tree depth must be in [1, 24]");
  if (num_vars < 1) throw std::invalid_argument("num_vars must be >= 1");
  if (operators.empty()) throw std::invalid_argument("operator set is empty");
  if (leaf_mode == LeafMode::op_fold && operators.size() < 2)
    throw std::invalid_argument("op_fold mode needs at least 2 operators");
  std::unordered_set<int> seen;
  for (Op op : operators)
    if (!seen.insert(static_cast<int>(op)).second)
      throw std::invalid_argument("duplicate operator in operator set");
}

GenotypeLayout build_layout(const TreeConfig& config) {
  config.validate();
  GenotypeLayout layout;
  layout.config = config;
  layout.op_node_count = config.leaf_mode == LeafMode::op_fold
                             ? config.node_count()
                             : config.internal_count();
  const std::size_t k1 = static_cast<std::size_t>(config.num_operators() - 1);
  layout.op_weight_count = static_cast<std::size_t>(layout.op_node_count) * k1;
  layout.var_weight_count =
      static_cast<std::size_t>(config.leaf_count()) * layout.var_block_size();
  layout.total_dim = layout.op_weight_count + layout.var_weight_count;
  return layout;
}

void check_genotype(const Genotype& g, const GenotypeLayout& layout) {
  if (g.size() != layout.total_dim)
    throw std::invalid_argument("genotype length " + std::to_string(g.size()) +
                                " does not match layout dimension " +
                                std::to_string(layout.total_dim));
  for (double v : g)
    if (!std::isfinite(v))
      throw std::invalid_argument("genotype contains a non-finite entry");
}

void mix_weights(std::span<const double> raw, std::span<double> out) {
  const std::size_t k = raw.size() + 1;
  if (out.size() != k) throw std::invalid_argument("mix output size mismatch");
  double rest = 1.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const double s = sigmoid(raw[i]);
    out[i] = s * rest;
    rest *= 1.0 - s;
  }
  out[k - 1] = rest;
}

std::vector<double> operator_mix_weights(std::span<const double> raw) {
  std::vector<double> out(raw.size() + 1);
  mix_weights(raw, out);
  return out;
}

namespace {

// Shared evaluation core. Operator mixes depend only on the genotype, so they
// are computed once and reused across rows.
struct EvalScratch {
  std::vector<double> mix;    // op_node_count x k
  std::vector<double> value;  // node values for the current row
  std::vector<double> terms;  // leaf terms, n+1
};

void compute_mixes(const Genotype& g, const GenotypeLayout& layout,
                   std::vector<double>& mix) {
  const int k = layout.config.num_operators();
  mix.resize(static_cast<std::size_t>(layout.op_node_count) * k);
  for (int node = 0; node < layout.op_node_count; ++node) {
    std::span<const double> raw(g.data() + layout.op_block(node),
                                static_cast<std::size_t>(k - 1));
    mix_weights(raw, std::span<double>(mix.data() +
                                           static_cast<std::size_t>(node) * k,
                                       static_cast<std::size_t>(k)));
  }
}

double eval_row(const Genotype& g, const GenotypeLayout& layout,
                std::span<const double> row, EvalScratch& scratch) {
  const TreeConfig& cfg = layout.config;
  const int k = cfg.num_operators();
  const int nodes = cfg.node_count();
  const int internal = cfg.internal_count();
  const int n = cfg.num_vars;

  scratch.value.resize(nodes);
  scratch.terms.resize(static_cast<std::size_t>(n) + 1);

  for (int i = nodes - 1; i >= 0; --i) {
    double v;
    if (i >= internal) {
      const int leaf = i - internal;
      const double* beta = g.data() + layout.var_block(leaf);
      if (cfg.leaf_mode == LeafMode::linear) {
        v = beta[n];
        for (int j = 0; j < n; ++j) v += beta[j] * row[j];
      } else {
        for (int j = 0; j < n; ++j) scratch.terms[j] = beta[j] * row[j];
        scratch.terms[n] = beta[n];
        const double* w = scratch.mix.data() + static_cast<std::size_t>(i) * k;
        v = 0.0;
        for (int o = 0; o < k; ++o)
          v += w[o] * fold_op(cfg.operators[o], scratch.terms);
      }
    } else {
      const double a = scratch.value[2 * i + 1];
      const double b = scratch.value[2 * i + 2];
      const double* w = scratch.mix.data() + static_cast<std::size_t>(i) * k;
      v = 0.0;
      for (int o = 0; o < k; ++o) v += w[o] * apply_op(cfg.operators[o], a, b);
    }
    scratch.value[i] = v;
  }
  return scratch.value[0];
}

}  // namespace

double eval_smooth(const Genotype& g, const GenotypeLayout& layout,
                   std::span<const double> row) {
  if (row.size() != static_cast<std::size_t>(layout.config.num_vars))
    throw std::invalid_argument("row length does not match num_vars");
  EvalScratch scratch;
  compute_mixes(g, layout, scratch.mix);
  return eval_row(g, layout, row, scratch);
}

void predict(const Genotype& g, const GenotypeLayout& layout,
             std::span<const double> matrix, std::size_t rows,
             std::span<double> out) {
  const std::size_t n = static_cast<std::size_t>(layout.config.num_vars);
  if (matrix.size() != rows * n)
    throw std::invalid_argument("matrix size does not match rows x num_vars");
  if (out.size() != rows)
    throw std::invalid_argument("output size does not match rows");
  EvalScratch scratch;
  compute_mixes(g, layout, scratch.mix);
  for (std::size_t r = 0; r < rows; ++r)
    out[r] = eval_row(g, layout, matrix.subspan(r * n, n), scratch);
}

std::vector<double> predict(const Genotype& g, const GenotypeLayout& layout,
                            std::span<const double> matrix, std::size_t rows) {
  std::vector<double> out(rows);
  predict(g, layout, matrix, rows, out);
  return out;
}

std::string format_coefficient(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

namespace {

std::string render_leaf(const CrispTree& tree, int leaf, const char* joiner) {
  const int n = tree.config.num_vars;
  std::string out;
  const auto& terms = tree.leaves[static_cast<std::size_t>(leaf)];
  for (std::size_t t = 0; t < terms.size(); ++t) {
    if (t > 0) {
      out += ' ';
      out += joiner;
      out += ' ';
    }
    out += format_coefficient(terms[t].coefficient);
    if (terms[t].slot < n) {
      out += "·x";
      out += std::to_string(terms[t].slot + 1);
    }
  }
  return out;
}

std::string render_node(const CrispTree& tree, int node, bool is_root) {
  const int internal = tree.config.internal_count();
  std::string body;
  if (node >= internal) {
    const int leaf = node - internal;
    const char* joiner = "+";
    if (tree.config.leaf_mode == LeafMode::op_fold)
      joiner = op_symbol(tree.node_ops[static_cast<std::size_t>(node)]);
    body = render_leaf(tree, leaf, joiner);
    // single-term leaves need no inner structure, but keep the node parens
  } else {
    const Op op = tree.node_ops[static_cast<std::size_t>(node)];
    body = render_node(tree, 2 * node + 1, false) + ' ' + op_symbol(op) + ' ' +
           render_node(tree, 2 * node + 2, false);
  }
  if (is_root) return body;
  return "(" + body + ")";
}

}  // namespace

std::string CrispTree::render() const {
  return render_node(*this, 0, true);
}

CrispTree decode(const Genotype& g, const GenotypeLayout& layout,
                 double var_threshold) {
  if (!(var_threshold > 0.0 && var_threshold < 1.0))
    throw std::invalid_argument("var_threshold must be in (0, 1)");
  check_genotype(g, layout);

  const TreeConfig& cfg = layout.config;
  const int k = cfg.num_operators();
  CrispTree tree;
  tree.config = cfg;
  tree.node_ops.resize(static_cast<std::size_t>(layout.op_node_count));
  tree.leaves.resize(static_cast<std::size_t>(cfg.leaf_count()));
  tree.degenerate_leaves.assign(static_cast<std::size_t>(cfg.leaf_count()),
                                false);

  std::vector<double> mix;
  compute_mixes(g, layout, mix);
  for (int node = 0; node < layout.op_node_count; ++node) {
    const double* w = mix.data() + static_cast<std::size_t>(node) * k;
    int best = 0;
    for (int o = 1; o < k; ++o)
      if (w[o] > w[best]) best = o;  // ties keep the lowest operator index
    tree.node_ops[static_cast<std::size_t>(node)] = cfg.operators[best];
  }

  const int n = cfg.num_vars;
  for (int leaf = 0; leaf < cfg.leaf_count(); ++leaf) {
    const double* beta = g.data() + layout.var_block(leaf);
    double mass = 0.0;
    for (int j = 0; j <= n; ++j) mass += std::abs(beta[j]);
    auto& terms = tree.leaves[static_cast<std::size_t>(leaf)];
    if (mass == 0.0) {
      terms.push_back({n, 0.0});
      tree.degenerate_leaves[static_cast<std::size_t>(leaf)] = true;
      continue;
    }
    for (int j = 0; j <= n; ++j)
      if (std::abs(beta[j]) / mass >= var_threshold)
        terms.push_back({j, beta[j]});
    if (terms.empty()) {
      int best = 0;
      for (int j = 1; j <= n; ++j)
        if (std::abs(beta[j]) > std::abs(beta[best])) best = j;
      terms.push_back({best, beta[best]});
    }
  }
  return tree;
}

Genotype encode_crisp(const CrispTree& tree, const GenotypeLayout& layout,
                      double saturation) {
  if (saturation < 10.0)
    throw std::invalid_argument("saturation must be >= 10");
  if (!(tree.config == layout.config))
    throw std::invalid_argument("crisp tree shape does not match layout");
  if (tree.node_ops.size() != static_cast<std::size_t>(layout.op_node_count))
    throw std::invalid_argument("crisp tree has wrong operator count");
  if (tree.leaves.size() != static_cast<std::size_t>(tree.config.leaf_count()))
    throw std::invalid_argument("crisp tree has wrong leaf count");

  const TreeConfig& cfg = tree.config;
  const int k = cfg.num_operators();
  const int n = cfg.num_vars;
  Genotype g(layout.total_dim, 0.0);

  for (int node = 0; node < layout.op_node_count; ++node) {
    const Op op = tree.node_ops[static_cast<std::size_t>(node)];
    const auto it = std::find(cfg.operators.begin(), cfg.operators.end(), op);
    if (it == cfg.operators.end())
      throw std::invalid_argument("crisp tree uses an operator outside the set");
    const int chosen = static_cast<int>(it - cfg.operators.begin());
    double* raw = g.data() + layout.op_block(node);
    for (int i = 0; i < k - 1; ++i)
      raw[i] = i == chosen ? saturation : -saturation;
  }

  for (int leaf = 0; leaf < cfg.leaf_count(); ++leaf) {
    double* beta = g.data() + layout.var_block(leaf);
    const auto& terms = tree.leaves[static_cast<std::size_t>(leaf)];
    if (terms.empty())
      throw std::invalid_argument("crisp tree leaf has no terms");
    for (const LeafTerm& term : terms) {
      if (term.slot < 0 || term.slot > n)
        throw std::invalid_argument("crisp tree term slot out of range");
      beta[term.slot] = term.coefficient;
    }
  }
  return g;
}

}  // namespace smoothsr
