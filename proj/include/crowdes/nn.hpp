#pragma once

// Minimal reverse-mode automatic differentiation over dense matrices, plus the
// small network blocks (linear, MLP, set attention) used by the emitter and simulator.
// Rows are batch items / tokens, columns are features.

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdes::nn {

using Matrix = Eigen::MatrixXd;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;  // same shape as value
};

class StaleTapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Owns parameters with stable addresses. The version increments whenever values
// change through an optimizer step or a load, which invalidates outstanding tapes.
class ParamStore {
 public:
  Param& add(const std::string& name, int rows, int cols);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  std::deque<Param>& params() { return params_; }
  const std::deque<Param>& params() const { return params_; }
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }
  void zero_grad();
  std::size_t parameter_count() const;

 private:
  std::deque<Param> params_;
  std::uint64_t version_ = 0;
};

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  const Matrix& value() const;
  bool valid() const { return tape != nullptr; }
};

class Tape {
 public:
  explicit Tape(const ParamStore* store = nullptr);

  Var constant(Matrix value);
  Var param(Param& p);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);            // elementwise
  Var add_row(Var a, Var row);      // broadcast a 1xN row over the rows of a
  Var scale(Var a, double s);
  Var relu(Var a);
  Var gelu(Var a);
  Var softmax_rows(Var a);
  Var transpose(Var a);
  Var concat_cols(Var a, Var b);
  Var sum(Var a);                   // 1x1

  // Scalar losses (1x1) against constant targets.
  Var mse(Var pred, const Matrix& target);
  Var mae(Var pred, const Matrix& target);
  Var cross_entropy(Var logits, const std::vector<int>& labels);

  // Reverse pass from `output` seeded with `output_grad`; accumulates into Param::grad.
  // A tape can be run backward once, and only while its parameters are unchanged.
  void backward(Var output, const Matrix& output_grad);
  void backward(Var output);  // seed of ones

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Param* param = nullptr;
    std::function<void(std::vector<Node>&, const Node&)> backward;
  };
  Var push(Matrix value, std::function<void(std::vector<Node>&, const Node&)> backward);
  void check_same_tape(Var v) const;

  std::vector<Node> nodes_;
  const ParamStore* store_ = nullptr;
  std::uint64_t store_version_ = 0;
  bool consumed_ = false;
};

enum class Activation { kRelu, kGelu };
enum class Init { kRandom, kZero, kIdentity };

Var activate(Tape& tape, Var x, Activation act);

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, Init init, std::uint64_t seed);
  Var forward(Tape& tape, Var x) const;
  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Param& weight() const { return *w_; }
  Param& bias() const { return *b_; }

 private:
  Param* w_ = nullptr;
  Param* b_ = nullptr;
  int in_ = 0;
  int out_ = 0;
};

// Layer widths, nonlinearity, attention heads and the parameter seed.
struct NetSpec {
  std::vector<int> widths;  // input, hidden..., output
  Activation activation = Activation::kGelu;
  int heads = 2;
  std::uint64_t seed = 0;
  Init init = Init::kRandom;
  void validate() const;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& name, const NetSpec& spec);
  // Throws std::invalid_argument on input width mismatch.
  Var forward(Tape& tape, Var x) const;
  const NetSpec& spec() const { return spec_; }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  NetSpec spec_;
  std::vector<Linear> layers_;
};

// Residual block: multi-head self-attention over tokens, multi-head cross-attention
// against context tokens, then a feed-forward layer. No positional terms on the
// tokens, so the block is permutation-equivariant in its token rows.
class SetAttentionBlock {
 public:
  SetAttentionBlock() = default;
  SetAttentionBlock(ParamStore& store, const std::string& name, int model_dim, int context_dim,
                    int heads, int ffn_width, Activation act, std::uint64_t seed,
                    Init init = Init::kRandom);
  // An empty context (zero rows or invalid Var) skips cross-attention.
  Var forward(Tape& tape, Var tokens, Var context) const;
  int model_dim() const { return dim_; }

 private:
  struct Head {
    Linear q, k, v, o;
  };
  Var attend(Tape& tape, const std::vector<Head>& heads, Var queries, Var keys) const;

  std::vector<Head> self_heads_;
  std::vector<Head> cross_heads_;
  Linear ffn_in_, ffn_out_;
  Activation act_ = Activation::kGelu;
  int dim_ = 0;
  int head_dim_ = 0;
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

struct StepReport {
  bool applied = false;
  std::string message;
};

// AdamW with decoupled weight decay. A non-finite gradient rejects the whole step
// and leaves parameters and optimizer state untouched.
StepReport adam_step(ParamStore& store, AdamState& state, const AdamOptions& options);

// Checkpoint body: one `param <name> <rows> <cols>` line followed by the values.
void write_params(std::ostream& out, const ParamStore& store);
// Loads into an already-constructed store; names and shapes must match.
void read_params(std::istream& in, ParamStore& store, const std::string& source);

}  // namespace crowdes::nn
