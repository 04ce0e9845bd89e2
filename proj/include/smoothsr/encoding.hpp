#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace smoothsr {

// Node operators. div is protected: a/b when |b| > 1e-12, else 1.
enum class Op { add, mul, sub, div };

Op parse_op(const std::string& name);
const char* op_name(Op op);
const char* op_symbol(Op op);
double apply_op(Op op, double a, double b);
// n-ary left fold of the binary operator over a term list (leaf semantics)
double fold_op(Op op, std::span<const double> terms);

enum class LeafMode { op_fold, linear };

LeafMode parse_leaf_mode(const std::string& name);
const char* leaf_mode_name(LeafMode mode);

// Shape of the fixed expression tree: a full binary tree with `depth` levels,
// `num_vars` input variables and an ordered operator set.
struct TreeConfig {
  int depth = 5;
  int num_vars = 10;
  std::vector<Op> operators = {Op::add, Op::mul};
  LeafMode leaf_mode = LeafMode::op_fold;

  int node_count() const { return (1 << depth) - 1; }
  int leaf_count() const { return 1 << (depth - 1); }
  int internal_count() const { return leaf_count() - 1; }
  int num_operators() const { return static_cast<int>(operators.size()); }

  void validate() const;  // throws std::invalid_argument
  bool operator==(const TreeConfig&) const = default;
};

// Index map from the flat genotype vector to per-node raw operator weights
// and per-leaf raw variable weights. Nodes are numbered breadth-first
// (children of i are 2i+1 and 2i+2), leaves left to right. Per op-carrying
// node there are k-1 raw operator values; per leaf n+1 raw variable values,
// the last one being the constant slot.
struct GenotypeLayout {
  TreeConfig config;
  int op_node_count = 0;  // all nodes in op_fold mode, internal only in linear
  std::size_t op_weight_count = 0;
  std::size_t var_weight_count = 0;
  std::size_t total_dim = 0;

  bool node_has_ops(int node) const { return node < op_node_count; }
  std::size_t op_block(int node) const {
    return static_cast<std::size_t>(node) *
           static_cast<std::size_t>(config.num_operators() - 1);
  }
  std::size_t var_block(int leaf) const {
    return op_weight_count + static_cast<std::size_t>(leaf) * var_block_size();
  }
  std::size_t var_block_size() const {
    return static_cast<std::size_t>(config.num_vars) + 1;
  }
};

GenotypeLayout build_layout(const TreeConfig& config);

// The optimization variable: one unbounded real per layout slot.
using Genotype = std::vector<double>;

void check_genotype(const Genotype& g, const GenotypeLayout& layout);

// Stick-breaking map from k-1 unbounded reals to a point on the k-simplex:
// w_i = sigmoid(raw_i) * prod_{j<i}(1 - sigmoid(raw_j)), remainder to w_k.
void mix_weights(std::span<const double> raw, std::span<double> out);
std::vector<double> operator_mix_weights(std::span<const double> raw);

// Smooth evaluation of the genotype on one input row (length num_vars).
// Non-finite intermediates propagate into the result.
double eval_smooth(const Genotype& g, const GenotypeLayout& layout,
                   std::span<const double> row);

// Batch evaluation over a row-major matrix of `rows` rows; out has one
// prediction per row. Pure; safe to call concurrently.
void predict(const Genotype& g, const GenotypeLayout& layout,
             std::span<const double> matrix, std::size_t rows,
             std::span<double> out);
std::vector<double> predict(const Genotype& g, const GenotypeLayout& layout,
                            std::span<const double> matrix, std::size_t rows);

// One selected term of a leaf: slot in [0, num_vars], where slot == num_vars
// is the constant slot.
struct LeafTerm {
  int slot = 0;
  double coefficient = 0.0;
  bool operator==(const LeafTerm&) const = default;
};

// Discrete expression tree: one operator per op-carrying node (breadth-first
// order) and the selected terms per leaf. Leaf semantics match the smooth
// evaluator with the unselected slots at zero, so a one-hot re-encoding
// evaluates identically.
struct CrispTree {
  TreeConfig config;
  std::vector<Op> node_ops;
  std::vector<std::vector<LeafTerm>> leaves;
  std::vector<bool> degenerate_leaves;  // all-zero blocks seen by decode

  // Deterministic infix rendering: x1..xn, coefficients with 6 significant
  // digits, every node except the root parenthesized.
  std::string render() const;
};

// Argmax/threshold decoding. var_threshold in (0,1): a leaf keeps every slot
// whose share of the leaf's total |beta| mass is >= var_threshold; if none
// passes, the single largest slot is kept.
CrispTree decode(const Genotype& g, const GenotypeLayout& layout,
                 double var_threshold);

// One-hot encoding of a crisp tree: raw operator weights at +-saturation,
// leaf coefficients in their slots, zeros elsewhere. saturation >= 10; the
// default renders the operator mix numerically one-hot in double precision.
Genotype encode_crisp(const CrispTree& tree, const GenotypeLayout& layout,
                      double saturation = 60.0);

std::string format_coefficient(double value);

}  // namespace smoothsr
